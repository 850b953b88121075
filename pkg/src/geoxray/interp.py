"""Interpolation kernels and separable 2-D resampling on uniform grids."""

from __future__ import annotations

import math

import numba
import numpy as np

LANCZOS_A = 3


def sinc(x):
    """Normalized sinc, ``sin(pi x) / (pi x)``."""
    return np.sinc(x)


def lanczos3(x):
    x = np.asarray(x, dtype=float)
    return np.where(np.abs(x) < LANCZOS_A, np.sinc(x) * np.sinc(x / LANCZOS_A), 0.0)


def schwartz_sinc(x, width: float = 6.0):
    """Gaussian-tapered sinc: rapidly decaying, Fourier transform smooth."""
    x = np.asarray(x, dtype=float)
    return np.sinc(x) * np.exp(-0.5 * (x / width) ** 2)


@numba.njit(cache=True, inline="always")
def _l3(x):
    ax = abs(x)
    if ax < 1e-12:
        return 1.0
    if ax >= 3.0:
        return 0.0
    px = math.pi * x
    return 3.0 * math.sin(px) * math.sin(px / 3.0) / (px * px)


@numba.njit(cache=True)
def _weights(f, n, periodic, idx, w):
    i0 = int(math.floor(f))
    tot = 0.0
    for k in range(6):
        i = i0 - 2 + k
        wk = _l3(f - i)
        if periodic:
            i = i % n
        else:
            i = min(max(i, 0), n - 1)
        idx[k] = i
        w[k] = wk
        tot += wk
    for k in range(6):
        w[k] /= tot


@numba.njit(cache=True, parallel=True)
def _interp2(grid, o1, h1, p1, o2, h2, p2, y1, y2, out):
    n1, n2 = grid.shape
    for m in numba.prange(y1.size):
        i1 = np.empty(6, np.int64)
        w1 = np.empty(6)
        i2 = np.empty(6, np.int64)
        w2 = np.empty(6)
        _weights((y1[m] - o1) / h1, n1, p1, i1, w1)
        _weights((y2[m] - o2) / h2, n2, p2, i2, w2)
        acc = 0.0
        for a in range(6):
            row = 0.0
            for b in range(6):
                row += w2[b] * grid[i1[a], i2[b]]
            acc += w1[a] * row
        out[m] = acc


def lanczos_interp2(grid, origin, step, periodic, y1, y2):
    """Lanczos-3 interpolation of samples ``grid[i, j]`` at ``origin + (i, j) * step``.

    Weights are normalized to sum to one, so constants are reproduced exactly.
    Periodic axes wrap; other axes replicate their edge samples.
    """
    grid = np.ascontiguousarray(grid, dtype=float)
    y1, y2 = np.broadcast_arrays(np.asarray(y1, dtype=float), np.asarray(y2, dtype=float))
    shape = y1.shape
    out = np.empty(y1.size)
    _interp2(grid, float(origin[0]), float(step[0]), bool(periodic[0]),
             float(origin[1]), float(step[1]), bool(periodic[1]),
             np.ascontiguousarray(y1).ravel(), np.ascontiguousarray(y2).ravel(), out)
    return out.reshape(shape)


def lanczos_resample_axis(data, axis, origin, step, periodic, new_coords):
    """Resample ``data`` along one axis at ``new_coords`` with Lanczos-3."""
    data = np.moveaxis(np.asarray(data, dtype=float), axis, 0)
    n = data.shape[0]
    f = (np.asarray(new_coords, dtype=float) - origin) / step
    i0 = np.floor(f).astype(int)
    taps = i0[:, None] + np.arange(-2, 4)[None, :]
    w = lanczos3(f[:, None] - taps)
    w /= w.sum(axis=1, keepdims=True)
    taps = np.mod(taps, n) if periodic else np.clip(taps, 0, n - 1)
    out = np.einsum("mk,mk...->m...", w, data[taps])
    return np.moveaxis(out, 0, axis)


def fourier_upsample_periodic(data, axis, factor: int):
    """Band-limited (trigonometric) upsampling of periodic samples by an integer factor."""
    data = np.moveaxis(np.asarray(data, dtype=float), axis, 0)
    n = data.shape[0]
    F = np.fft.fft(data, axis=0)
    m = n * factor
    G = np.zeros((m,) + data.shape[1:], dtype=complex)
    h = n // 2
    G[:h] = F[:h]
    G[m - (n - h):] = F[h:]
    if n % 2 == 0:
        # split the Nyquist bin symmetrically
        G[h] = 0.5 * F[h]
        G[m - h] = 0.5 * F[h]
    out = np.fft.ifft(G, axis=0).real * factor
    return np.moveaxis(out, 0, axis)
