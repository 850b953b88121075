"""Phantoms and the geodesic X-ray transform sampled on chart grids.

Sinogram grids are uniform. Axis 1 (``s`` or ``w``) is periodic of period
``L`` with nodes ``i * L / n1``; axis 2 (``alpha`` or ``p``) is cell centred,
``lo + (j + 1/2) * (hi - lo) / n2``, so that no node sits on a tangential ray.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numba
import numpy as np
from scipy import ndimage

from .geometry import (
    TWO_PI,
    DomainError,
    GeometryParams,
    exit_time,
    geodesic_point,
    parallel_to_fb,
    fb_to_parallel,
)
from .interp import lanczos_interp2


class QuadratureWarning(UserWarning):
    """The quadrature step is too coarse for the declared band limit."""


# --------------------------------------------------------------------------
# phantoms


@dataclass(frozen=True)
class WavePacketSpec:
    """Coherent state ``sin(x . xi0 / h) exp(-|x - x0|^2 / 2h)``.

    ``x0`` and ``xi0`` are complex numbers standing for points and vectors of
    the plane; ``xi0`` is normally a unit vector.
    """

    x0: complex
    xi0: complex
    h: float = 0.01
    amplitude: float = 1.0

    def __post_init__(self):
        if not self.h > 0:
            raise DomainError("h must be positive")
        if self.xi0 == 0:
            raise DomainError("xi0 must be nonzero")

    @property
    def main_frequency(self) -> float:
        return abs(self.xi0) / self.h

    @property
    def band_limit(self) -> float:
        """Carrier plus three envelope widths ``1 / sqrt(h)``."""
        return abs(self.xi0) / self.h + 3.0 / math.sqrt(self.h)

    @property
    def frequency(self) -> complex:
        return self.xi0 / self.h

    def evaluate(self, z):
        z = np.asarray(z, dtype=complex)
        ph = (z.real * self.xi0.real + z.imag * self.xi0.imag) / self.h
        return self.amplitude * np.sin(ph) * np.exp(-np.abs(z - self.x0) ** 2 / (2 * self.h))

    @classmethod
    def conormal_to_geodesic(cls, g: GeometryParams, s, alpha, u, h=0.01, amplitude=1.0):
        """Packet at ``gamma_{s,alpha}(u tau)`` oscillating along ``e^{i pi/2} gamma'``."""
        tau = float(exit_time(g, alpha))
        z, th = geodesic_point(g, s, alpha, u * tau)
        return cls(complex(z), complex(np.exp(1j * (float(th) + np.pi / 2))), h, amplitude)


@dataclass(frozen=True)
class ImageGrid:
    """Square pixel grid over ``[-R, R]^2``; ``values[i, j]`` sits at ``(x_j, y_i)``.

    Pixel centres are ``-R + (k + 1/2) 2R / n``; row index ``i`` increases with ``y``.
    """

    values: np.ndarray
    R: float = 1.0

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 2 or v.shape[0] != v.shape[1]:
            raise DomainError("ImageGrid must be square")
        object.__setattr__(self, "values", v)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def step(self) -> float:
        return 2 * self.R / self.n

    @staticmethod
    def axis(n, R=1.0):
        return -R + (np.arange(n) + 0.5) * (2 * R / n)

    @staticmethod
    def points(n, R=1.0):
        x = ImageGrid.axis(n, R)
        return x[None, :] + 1j * x[:, None]

    def mask(self):
        return np.abs(self.points(self.n, self.R)) <= self.R

    @classmethod
    def sample(cls, fn, n, R=1.0):
        z = cls.points(n, R)
        inside = np.abs(z) <= R
        out = np.zeros(z.shape)
        out[inside] = fn(z[inside])
        return cls(out, R)


@numba.njit(cache=True)
def _gauss_sum(zr, zi, cx, cy, w, sig, out):
    for m in range(zr.size):
        acc = 0.0
        for k in range(cx.size):
            dx = zr[m] - cx[k]
            dy = zi[m] - cy[k]
            e = (dx * dx + dy * dy) / (2.0 * sig[k] * sig[k])
            if e < 40.0:
                acc += w[k] * math.exp(-e)
        out[m] = acc


@numba.njit(cache=True)
def _packet_sum(zr, zi, cx, cy, kx, ky, h, amp, out):
    for m in range(zr.size):
        acc = 0.0
        for k in range(cx.size):
            dx = zr[m] - cx[k]
            dy = zi[m] - cy[k]
            e = (dx * dx + dy * dy) / (2.0 * h[k])
            if e < 40.0:
                acc += amp[k] * math.sin((zr[m] * kx[k] + zi[m] * ky[k]) / h[k]) * math.exp(-e)
        out[m] = acc


@dataclass(frozen=True)
class Phantom:
    """Function on the disk: a Gaussian sum, a sum of coherent states, or a pixel grid.

    Use the ``gaussian_sum``, ``coherent_sum`` and ``from_image`` constructors.
    """

    kind: str
    gaussians: tuple = ()
    packets: tuple = ()
    image: ImageGrid | None = None
    order: int = 3
    declared_band_limit: float | None = None

    def __post_init__(self):
        if self.kind not in ("gaussian_sum", "coherent_sum", "grid"):
            raise DomainError(f"unknown phantom kind {self.kind!r}")
        if self.kind == "grid" and self.image is None:
            raise DomainError("grid phantom needs an image")

    @classmethod
    def gaussian_sum(cls, centers, weights=None, sigma=0.03):
        centers = [complex(c) for c in centers]
        weights = [1.0] * len(centers) if weights is None else [float(w) for w in weights]
        sig = np.broadcast_to(np.asarray(sigma, dtype=float), (len(centers),))
        return cls("gaussian_sum", tuple(zip(centers, weights, map(float, sig))))

    @classmethod
    def coherent_sum(cls, packets):
        return cls("coherent_sum", packets=tuple(packets))

    @classmethod
    def from_image(cls, image: ImageGrid, order: int = 3, band_limit: float | None = None):
        return cls("grid", image=image, order=order, declared_band_limit=band_limit)

    @property
    def band_limit(self) -> float:
        """Declared essential band limit (Euclidean frequency)."""
        if self.declared_band_limit is not None:
            return self.declared_band_limit
        if self.kind == "gaussian_sum":
            return max(3.0 / s for _, _, s in self.gaussians)
        if self.kind == "coherent_sum":
            return max(p.band_limit for p in self.packets)
        return np.pi / self.image.step

    def evaluate(self, z):
        z = np.asarray(z, dtype=complex)
        shape = z.shape
        zr = np.ascontiguousarray(z.real, dtype=float).ravel()
        zi = np.ascontiguousarray(z.imag, dtype=float).ravel()
        out = np.empty(zr.size)
        if self.kind == "gaussian_sum":
            if not self.gaussians:
                return np.zeros(shape)
            c = np.array([g[0] for g in self.gaussians])
            _gauss_sum(zr, zi, c.real.copy(), c.imag.copy(),
                       np.array([g[1] for g in self.gaussians]),
                       np.array([g[2] for g in self.gaussians]), out)
        elif self.kind == "coherent_sum":
            if not self.packets:
                return np.zeros(shape)
            c = np.array([p.x0 for p in self.packets])
            k = np.array([p.xi0 for p in self.packets])
            _packet_sum(zr, zi, c.real.copy(), c.imag.copy(), k.real.copy(), k.imag.copy(),
                        np.array([p.h for p in self.packets], dtype=float),
                        np.array([p.amplitude for p in self.packets], dtype=float), out)
        else:
            im = self.image
            # fractional pixel index of the centre grid
            fx = (zr + im.R) / im.step - 0.5
            fy = (zi + im.R) / im.step - 0.5
            out = ndimage.map_coordinates(im.values, [fy, fx], order=self.order, mode="constant",
                                          cval=0.0, prefilter=self.order > 1)
        return out.reshape(shape)

    __call__ = evaluate

    def rasterize(self, n: int, R: float = 1.0) -> ImageGrid:
        return ImageGrid.sample(self.evaluate, n, R)

    def __add__(self, other: "Phantom") -> "Phantom":
        if self.kind == other.kind == "gaussian_sum":
            return Phantom("gaussian_sum", self.gaussians + other.gaussians)
        if self.kind == other.kind == "coherent_sum":
            return Phantom("coherent_sum", packets=self.packets + other.packets)
        return NotImplemented


# Deterministic Gaussian centres for the reference phantom f0: a ring, an inner
# triangle and an off-centre cluster, all well inside |x| < 0.75.
_F0_CENTERS = (
    [0.6 * np.exp(1j * (np.pi / 7 + k * TWO_PI / 7)) for k in range(7)]
    + [0.3 * np.exp(1j * (np.pi / 2 + k * TWO_PI / 3)) for k in range(3)]
    + [0.0, 0.12 + 0.4j, -0.42 - 0.1j, 0.25 - 0.2j]
)
_F0_WEIGHTS = [1.0] * 7 + [0.8] * 3 + [1.2, 0.7, 0.9, 0.6]


def phantom_f0(sigma: float = 0.03) -> Phantom:
    """Sum of fourteen Gaussians of width ``sigma`` (declared band limit ``3 / sigma``)."""
    return Phantom.gaussian_sum(_F0_CENTERS, _F0_WEIGHTS, sigma)


F1_PACKETS = ((5 / 6, 0.0, 0.3), (0.5, np.pi / 4, 0.3), (0.5, np.pi / 4, 0.6))


def phantom_f1(g: GeometryParams, h: float = 0.01) -> Phantom:
    """Three coherent states conormal to geodesics; entries of ``F1_PACKETS`` are ``(s/L, alpha, u)``."""
    return Phantom.coherent_sum(
        WavePacketSpec.conormal_to_geodesic(g, sf * g.L, a, u, h) for sf, a, u in F1_PACKETS)


def phantom_packet(g: GeometryParams, s, alpha, u, h: float = 0.01) -> Phantom:
    return Phantom.coherent_sum([WavePacketSpec.conormal_to_geodesic(g, s, alpha, u, h)])


# --------------------------------------------------------------------------
# sinograms


@dataclass
class SinogramGrid:
    """Samples of a function on a chart of the inward boundary.

    ``values[i, j]`` is taken at ``(axis1[i], axis2[j])``.
    """

    chart: str
    values: np.ndarray
    kappa: float = 0.0
    R: float = 1.0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.chart not in ("fan", "parallel"):
            raise DomainError(f"unknown chart {self.chart!r}")
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 2 or min(self.values.shape) < 2:
            raise DomainError("sinogram needs n1, n2 >= 2")

    @property
    def geometry(self) -> GeometryParams:
        return GeometryParams(self.R, self.kappa)

    @property
    def shape(self):
        return self.values.shape

    @staticmethod
    def chart_ranges(g: GeometryParams, chart: str):
        if chart == "fan":
            return (0.0, g.L), (-np.pi / 2, np.pi / 2)
        return (0.0, g.L), (0.0, g.L / 2)

    @property
    def ranges(self):
        return self.chart_ranges(self.geometry, self.chart)

    @property
    def steps(self):
        (a0, a1), (b0, b1) = self.ranges
        n1, n2 = self.shape
        return (a1 - a0) / n1, (b1 - b0) / n2

    @property
    def origin(self):
        (a0, _), (b0, _) = self.ranges
        return a0, b0 + 0.5 * self.steps[1]

    @property
    def axis1(self):
        return self.origin[0] + self.steps[0] * np.arange(self.shape[0])

    @property
    def axis2(self):
        return self.origin[1] + self.steps[1] * np.arange(self.shape[1])

    @classmethod
    def nodes(cls, g: GeometryParams, chart: str, n1: int, n2: int):
        proto = cls(chart, np.zeros((n1, n2)), g.kappa, g.R)
        return proto.axis1, proto.axis2

    def like(self, values, **meta) -> "SinogramGrid":
        return SinogramGrid(self.chart, values, self.kappa, self.R, {**self.meta, **meta})

    def interpolate(self, y1, y2):
        """Lanczos-3 evaluation at chart coordinates (periodic in ``y1``)."""
        return lanczos_interp2(self.values, self.origin, self.steps, (True, False), y1, y2)

    # ---- I/O

    def header(self) -> dict:
        n1, n2 = self.shape
        return {"chart": self.chart, "n1": n1, "n2": n2, "ranges": [list(r) for r in self.ranges],
                "kappa": self.kappa, "R": self.R}


def simpson_weights(n: int, h: float) -> np.ndarray:
    if n < 2 or n % 2:
        raise DomainError("Simpson rule needs an even number of intervals")
    w = np.full(n + 1, 2.0)
    w[1::2] = 4.0
    w[0] = w[-1] = 1.0
    return w * h / 3.0


def quadrature_nodes(tau: float, h_t: float):
    """Nodes and weights of the composite Simpson rule on ``[0, tau]``."""
    if tau < 4 * h_t:
        n = 8
    else:
        n = max(16, int(math.ceil(tau / h_t)))
        n += n % 2
    t = np.linspace(0.0, tau, n + 1)
    return t, simpson_weights(n, tau / n)


def default_step(band_limit: float) -> float:
    return np.pi / (4.0 * band_limit)


def xray_transform(g: GeometryParams, phantom: Phantom, chart: str, n1: int, n2: int,
                   h_t: float | None = None) -> SinogramGrid:
    """Geodesic X-ray transform ``I0 f`` sampled on an ``n1 x n2`` chart grid.

    Each row of constant ``alpha`` (or ``p``) shares its geodesic up to a
    rotation of the disk, so the base curve is computed once per row.
    """
    B = phantom.band_limit
    if h_t is None:
        h_t = default_step(B)
    elif h_t > default_step(B) * (1 + 1e-12):
        warnings.warn(f"quadrature step {h_t:.3g} exceeds pi/(4B) = {default_step(B):.3g}",
                      QuadratureWarning, stacklevel=2)
    y1, y2 = SinogramGrid.nodes(g, chart, n1, n2)
    out = np.zeros((n1, n2))
    for j, y in enumerate(y2):
        if chart == "fan":
            s, alpha = y1, float(y)
        else:
            s, alpha = parallel_to_fb(g, y1, np.full_like(y1, y))
            alpha = float(alpha[0])
        tau = float(exit_time(g, alpha))
        t, w = quadrature_nodes(tau, h_t)
        z0, _ = geodesic_point(g, 0.0, alpha, t, check=False)
        rot = np.exp(1j * TWO_PI * np.asarray(s) / g.L)
        vals = phantom.evaluate(rot[:, None] * z0[None, :])
        out[:, j] = vals @ w
    return SinogramGrid(chart, out, g.kappa, g.R, {"h_t": h_t, "band_limit": B})


def resample_chart(g: GeometryParams, sino: SinogramGrid, target: str, n1: int, n2: int) -> SinogramGrid:
    """Resample onto another chart grid: exact chart maps plus Lanczos-3 interpolation."""
    y1, y2 = SinogramGrid.nodes(g, target, n1, n2)
    Y1, Y2 = np.meshgrid(y1, y2, indexing="ij")
    if target == sino.chart:
        a, b = Y1, Y2
    elif target == "parallel":
        a, b = parallel_to_fb(g, Y1, Y2)
    else:
        a, b = fb_to_parallel(g, Y1, Y2)
    return SinogramGrid(target, sino.interpolate(a, b), g.kappa, g.R, dict(sino.meta))


# --------------------------------------------------------------------------
# file formats


def write_grid(path, sino: SinogramGrid) -> None:
    """JSON header line, then little-endian float64 values in row-major order."""
    with open(path, "wb") as fh:
        fh.write((json.dumps(sino.header(), sort_keys=True) + "\n").encode())
        fh.write(np.ascontiguousarray(sino.values, dtype="<f8").tobytes())


def read_grid(path) -> SinogramGrid:
    with open(path, "rb") as fh:
        hdr = json.loads(fh.readline().decode())
        data = np.frombuffer(fh.read(), dtype="<f8")
    values = data.reshape(hdr["n1"], hdr["n2"]).copy()
    return SinogramGrid(hdr["chart"], values, hdr["kappa"], hdr["R"])


def write_image_grid(path, img: ImageGrid) -> None:
    hdr = {"kind": "image", "n": img.n, "R": img.R}
    with open(path, "wb") as fh:
        fh.write((json.dumps(hdr, sort_keys=True) + "\n").encode())
        fh.write(np.ascontiguousarray(img.values, dtype="<f8").tobytes())


def read_image_grid(path) -> ImageGrid:
    with open(path, "rb") as fh:
        hdr = json.loads(fh.readline().decode())
        data = np.frombuffer(fh.read(), dtype="<f8")
    return ImageGrid(data.reshape(hdr["n"], hdr["n"]).copy(), hdr["R"])


def write_csv(path, values, header: dict | None = None) -> None:
    """Matrix CSV; an optional JSON header is written as a leading ``#`` comment."""
    np.savetxt(path, np.asarray(values, dtype=float), delimiter=",", fmt="%.12e",
               header=json.dumps(header, sort_keys=True) if header else "")


def write_pgm(path, values, flip: bool = True) -> tuple[float, float]:
    """8-bit binary PGM with linear min-max scaling recorded in a header comment.

    Rows of ``values`` become image rows, stacked bottom-up when ``flip``, which
    matches the ``ImageGrid`` layout. Returns the ``(min, max)`` used for scaling.
    """
    v = np.asarray(values, dtype=float)
    lo, hi = float(np.min(v)), float(np.max(v))
    scale = 255.0 / (hi - lo) if hi > lo else 0.0
    img = np.round((v - lo) * scale).astype(np.uint8)
    if flip:
        img = img[::-1]
    rows, cols = img.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n# linear min={lo:.9e} max={hi:.9e}\n{cols} {rows}\n255\n".encode())
        fh.write(img.tobytes())
    return lo, hi


def sinogram_pgm(path, sino: SinogramGrid):
    """Axis 1 horizontal, axis 2 vertical (increasing upwards)."""
    return write_pgm(path, sino.values.T, flip=True)


def read_pgm(path):
    with open(path, "rb") as fh:
        raw = fh.read()
    parts = []
    pos = 0
    while len(parts) < 4:
        line_end = raw.index(b"\n", pos)
        line = raw[pos:line_end]
        pos = line_end + 1
        if line.startswith(b"#"):
            continue
        parts.extend(line.split())
    cols, rows = int(parts[1]), int(parts[2])
    return np.frombuffer(raw[pos:pos + rows * cols], dtype=np.uint8).reshape(rows, cols)


def save_sinogram(outdir, stem: str, sino: SinogramGrid) -> list[Path]:
    outdir = Path(outdir)
    files = [outdir / f"{stem}.grid", outdir / f"{stem}.csv", outdir / f"{stem}.pgm"]
    write_grid(files[0], sino)
    write_csv(files[1], sino.values, sino.header())
    sinogram_pgm(files[2], sino)
    return files
