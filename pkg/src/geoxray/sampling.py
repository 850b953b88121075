"""Sampling plans, spectral folding and aliasing-artifact prediction.

Frequencies are in continuous-transform units throughout: a sample step ``h``
resolves the Nyquist interval ``(-pi/h, pi/h]``, and a data covector
``comp1 dy1 + comp2 dy2`` stands for local oscillations ``exp(i (comp1 y1 + comp2 y2))``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import shapely
import shapely.affinity
from scipy.optimize import brentq
from shapely.geometry import Polygon

from .canrel import (
    SIGMA1,
    CanonicalImage,
    DataCovector,
    SigmaSpec,
    SpaceCovector,
    b_numbers,
    canonical_graph,
    eta,
    interior_covector,
)
from .forward import SinogramGrid, WavePacketSpec
from .geometry import (
    DomainError,
    FanBeamPoint,
    GeometryParams,
    exit_time,
    fb_to_parallel,
    jacobi_a,
    jacobi_b,
    parallel_to_fb,
)
from .interp import lanczos3, lanczos_interp2, lanczos_resample_axis, schwartz_sinc

# --------------------------------------------------------------------------
# Shannon interpolation


KERNELS: dict[str, Callable] = {"sinc": np.sinc, "lanczos3": lanczos3, "schwartz": schwartz_sinc}


def shannon_interpolate(samples, steps, kernel: str = "sinc", origin=None):
    """Evaluator ``x -> sum_k f_k K((x - x_k) / h)`` for samples on a uniform grid.

    Works in any dimension with a separable kernel. ``x`` has shape ``(..., ndim)``
    (or ``(...)`` in 1-D). The sinc sum runs over every available sample.
    """
    f = np.asarray(samples, dtype=float)
    steps = np.atleast_1d(np.asarray(steps, dtype=float))
    if steps.size != f.ndim:
        raise DomainError("one step per sample axis")
    origin = np.zeros(f.ndim) if origin is None else np.atleast_1d(np.asarray(origin, dtype=float))
    K = KERNELS[kernel]

    def evaluate(x):
        x = np.asarray(x, dtype=float)
        if f.ndim == 1 and (x.ndim == 0 or x.shape[-1] != 1):
            x = x[..., None]
        shape = x.shape[:-1]
        pts = x.reshape(-1, f.ndim)
        out = f
        mats = []
        for d in range(f.ndim):
            nodes = origin[d] + steps[d] * np.arange(f.shape[d])
            mats.append(K((pts[:, d, None] - nodes[None, :]) / steps[d]))
        out = np.einsum("mi,i...->m...", mats[0], f)
        for d in range(1, f.ndim):
            out = np.einsum("mi,mi...->m...", mats[d], out)
        return out.reshape(shape)

    return evaluate


def parseval_norm2(samples, steps) -> float:
    """``h^n sum |f(hk)|^2``, equal to ``||f||^2`` for band-limited ``f`` sampled at Nyquist."""
    return float(np.prod(np.atleast_1d(steps)) * np.sum(np.abs(np.asarray(samples)) ** 2))


# --------------------------------------------------------------------------
# plans and folding


def _sig_round(x: float, digits: int | None) -> float:
    if digits is None or x == 0:
        return x
    return float(f"{x:.{digits}g}")


def _ceil(x: float) -> int:
    # guards against 200.00000000003 style round-off
    return int(math.ceil(x - 1e-9))


@dataclass(frozen=True)
class SamplingPlan:
    chart: str
    B: float
    b: tuple
    steps: tuple
    counts: tuple
    oversample: tuple
    kappa: float = 0.0
    R: float = 1.0
    sigma: str = "Sigma1"

    @property
    def nyquist(self):
        """Half-widths ``pi / h_j`` of the Nyquist box."""
        return tuple(np.pi / h for h in self.steps)

    @property
    def alias_free(self) -> bool:
        return all(h <= np.pi / (self.B * b) * (1 + 1e-12) for h, b in zip(self.steps, self.b))

    def row(self):
        return [self.chart, f"{self.kappa:g}", self.sigma, f"{self.B:g}", f"{self.oversample[0]:g}",
                f"{self.oversample[1]:g}", self.counts[0], self.counts[1]]


def plan_counts(g: GeometryParams, chart: str, B: float, b, C) -> tuple[int, int]:
    n1 = _ceil(C[0] * B * g.L * b[0] / np.pi)
    if chart == "fan":
        n2 = _ceil(C[1] * B * b[1])
    else:
        n2 = _ceil(C[1] * B * g.L * b[1] / (2 * np.pi))
    return max(n1, 2), max(n2, 2)


def make_plan(g: GeometryParams, chart: str = "fan", sigma: SigmaSpec = SIGMA1, B: float = 100.0,
              oversample=(1.0, 1.0), b=None, digits: int | None = 3, **bkw) -> SamplingPlan:
    """Cartesian sampling plan resolving a ``B sigma`` band limit.

    Parameters
    ----------
    b : (float, float), optional
        b-numbers to use; computed with :func:`b_numbers` otherwise.
    digits : int or None
        Significant digits kept in the b-numbers (3 matches the quoted box
        sizes, e.g. ``3.71``); ``None`` keeps full precision.
    """
    C = tuple(float(c) for c in np.broadcast_to(oversample, (2,)))
    if B <= 0:
        raise DomainError("band limit must be positive")
    if min(C) <= 0:
        raise DomainError("oversampling factors must be positive")
    if b is None:
        b = b_numbers(g, chart, sigma, **bkw)
    b = tuple(_sig_round(float(v), digits) for v in b)
    n1, n2 = plan_counts(g, chart, B, b, C)
    (a0, a1), (c0, c1) = SinogramGrid.chart_ranges(g, chart)
    steps = ((a1 - a0) / n1, (c1 - c0) / n2)
    return SamplingPlan(chart, float(B), b, steps, (n1, n2), C, g.kappa, g.R, sigma.label)


def plan_with_counts(g: GeometryParams, chart: str, B: float, b, counts, sigma: str = "Sigma1"):
    """Plan with explicit sample counts (oversampling factors inferred)."""
    base = plan_counts(g, chart, B, b, (1.0, 1.0))
    (a0, a1), (c0, c1) = SinogramGrid.chart_ranges(g, chart)
    steps = ((a1 - a0) / counts[0], (c1 - c0) / counts[1])
    C = (counts[0] / base[0], counts[1] / base[1])
    return SamplingPlan(chart, float(B), tuple(b), steps, tuple(counts), C, g.kappa, g.R, sigma)


def fold_component(x: float, h: float):
    """Unique ``(x', k)`` with ``x' = x + 2 pi k / h`` in ``(-pi/h, pi/h]``."""
    period = 2 * np.pi / h
    k = math.floor((np.pi / h - x) / period)
    xf = x + k * period
    if xf <= -np.pi / h:  # round-off at the lower edge
        xf += period
        k += 1
    return xf, k


def fold_covector(dc: DataCovector, plan: SamplingPlan):
    """Fold a data covector into the Nyquist box; returns ``(folded, (k1, k2))``."""
    c1, k1 = fold_component(float(dc.comp1), plan.steps[0])
    c2, k2 = fold_component(float(dc.comp2), plan.steps[1])
    return DataCovector(dc.chart, dc.base, c1, c2), (k1, k2)


# --------------------------------------------------------------------------
# backprojection of data covectors


@dataclass
class Backprojection:
    """Solution of ``dc = lam eta_{q, t}``; ``kernel`` if there is none."""

    kernel: bool
    u: float = float("nan")
    lam: float = float("nan")
    t: float = float("nan")
    covector: SpaceCovector | None = None


def _fan_base(g, chart, base):
    if chart == "fan":
        return float(base[0]), float(base[1])
    s, a = parallel_to_fb(g, base[0], base[1])
    return float(s), float(a)


def backproject_data_covector(g: GeometryParams, dc: DataCovector, base=None) -> Backprojection:
    """Interior singularity produced by the data covector ``dc`` under inversion.

    Fan-beam: ``comp1 / comp2 = II - mu a(t) / b(t)`` increases strictly from
    ``-inf`` to its value at ``t = tau``. Parallel: ``comp1 / comp2 =
    (b / a)(t - tau/2) a(tau/2) / b(tau/2)`` increases strictly from -1 to 1.
    Ratios outside these ranges lie in the microlocal kernel.
    """
    base = dc.base if base is None else base
    s, alpha = _fan_base(g, dc.chart, base)
    c1, c2 = float(dc.comp1), float(dc.comp2)
    if c1 == 0 and c2 == 0:
        raise DomainError("zero covector")
    mu = math.cos(alpha)
    tau = float(exit_time(g, alpha))
    if mu <= 0 or tau <= 0:
        return Backprojection(True)
    if dc.chart == "fan":
        if c2 == 0:
            t, lam = 0.0, -c1 / mu
        else:
            r = c1 / c2
            ratio = lambda t: g.II - mu * float(jacobi_a(g, t)) / float(jacobi_b(g, t))
            if r > ratio(tau):
                return Backprojection(True)
            lo = tau * 1e-15
            while ratio(lo) > r:
                lo *= 1e-3
                if lo < 1e-300:
                    return Backprojection(False, 0.0, -c1 / mu, 0.0,
                                          interior_covector(g, s, alpha, 0.0, -c1 / mu))
            t = tau if r == ratio(tau) else brentq(lambda t: ratio(t) - r, lo, tau, xtol=1e-15,
                                                   rtol=1e-15, maxiter=500)
            lam = c2 / float(jacobi_b(g, t))
    else:
        if c2 == 0:
            return Backprojection(True)
        h = tau / 2
        ah, bh = float(jacobi_a(g, h)), float(jacobi_b(g, h))
        ratio = lambda tp: float(jacobi_b(g, tp)) / float(jacobi_a(g, tp)) * ah / bh
        r = c1 / c2
        if abs(r) > 1:
            return Backprojection(True)
        if abs(r) == 1:
            tp = math.copysign(h, r)
        else:
            tp = brentq(lambda x: ratio(x) - r, -h, h, xtol=1e-15, rtol=1e-15, maxiter=500)
        t = tp + h
        lam = c2 / (mu * float(jacobi_a(g, tp)) / ah)
    return Backprojection(False, t / tau, lam, t, interior_covector(g, s, alpha, t, lam))


# --------------------------------------------------------------------------
# artifact prediction


@dataclass
class AliasPrediction:
    packet: int
    branch: str
    image: CanonicalImage
    folded: DataCovector
    k: tuple
    verdict: str
    backprojection: Backprojection | None = None
    source_frequency: float = float("nan")

    @property
    def location(self):
        bp = self.backprojection
        return None if bp is None or bp.kernel else bp.covector.z

    @property
    def frequency(self) -> float:
        bp = self.backprojection
        return float("nan") if bp is None or bp.kernel else bp.covector.norm

    @property
    def direction(self) -> float:
        bp = self.backprojection
        return float("nan") if bp is None or bp.kernel else float(np.arctan2(*bp.covector.xi[::-1]))

    @property
    def higher_frequency(self) -> bool:
        return self.verdict == "artifact" and self.frequency > self.source_frequency

    def row(self):
        bp = self.backprojection
        art = self.verdict == "artifact"
        z = self.location if art else complex("nan")
        return [self.packet, self.branch, f"{self.k[0]}", f"{self.k[1]}", self.verdict,
                f"{z.real:.9g}", f"{z.imag:.9g}", f"{self.direction:.9g}", f"{self.frequency:.9g}",
                f"{bp.u if art else float('nan'):.9g}", f"{bp.lam if art else float('nan'):.9g}"]


PREDICTION_COLUMNS = ["packet", "branch", "k1", "k2", "verdict", "x", "y", "dir", "freq", "u", "lambda"]
PLAN_COLUMNS = ["chart", "kappa", "sigma", "B", "C1", "C2", "N1", "N2"]


def predict_artifacts(g: GeometryParams, packets, plan: SamplingPlan) -> list[AliasPrediction]:
    """Fold ``C_+`` and ``C_-`` images of each packet's covector ``(x0, xi0 / h)``."""
    if isinstance(packets, WavePacketSpec):
        packets = [packets]
    out = []
    for i, pk in enumerate(packets):
        xi = np.array([pk.frequency.real, pk.frequency.imag])
        for branch, img in zip("+-", canonical_graph(g, pk.x0, xi, plan.chart)):
            folded, k = fold_covector(img.covector, plan)
            if k == (0, 0):
                out.append(AliasPrediction(i, branch, img, folded, k, "unaliased",
                                           source_frequency=pk.main_frequency))
                continue
            bp = backproject_data_covector(g, folded)
            out.append(AliasPrediction(i, branch, img, folded, k, "kernel" if bp.kernel else "artifact",
                                       bp, pk.main_frequency))
    return out


def iso_lines(g: GeometryParams, chart: str, base, us=None, lams=None, n: int = 201):
    """Iso-``u`` and iso-``lambda`` lines of the data-covector backprojection chart.

    Returns rows ``(family, value, comp1, comp2)``.
    """
    us = np.round(np.arange(0, 11) / 10, 10) if us is None else np.asarray(us)
    lams = np.geomspace(0.25, 4.0, 5) if lams is None else np.asarray(lams)
    s, a = _fan_base(g, chart, base)
    tau = float(exit_time(g, a))
    rows = []
    tt = np.linspace(0, tau, n)[1:]
    for u in us:
        cv = eta(g, chart, s, a, max(u, 1e-9) * tau)
        for lam in np.concatenate([-lams[::-1], lams]):
            rows.append(("u", float(u), float(lam * cv.comp1), float(lam * cv.comp2)))
    for lam in np.concatenate([-lams[::-1], lams]):
        cv = eta(g, chart, s, a, tt)
        for c1, c2 in zip(lam * cv.comp1, lam * cv.comp2):
            rows.append(("lambda", float(lam), float(c1), float(c2)))
    return rows


def write_plans_csv(plans: Sequence[SamplingPlan], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(PLAN_COLUMNS)
        for p in plans:
            w.writerow(p.row())


def write_predictions_csv(preds: Sequence[AliasPrediction], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(PREDICTION_COLUMNS)
        for p in preds:
            w.writerow(p.row())


# --------------------------------------------------------------------------
# windowed Fourier analysis


@dataclass
class SpectralPeak:
    freq: tuple
    magnitude: float


@dataclass
class WindowedSpectrum:
    freq1: np.ndarray
    freq2: np.ndarray
    magnitude: np.ndarray
    peaks: list = field(default_factory=list)
    clipped: bool = False

    @property
    def bin_width(self):
        return self.freq1[1] - self.freq1[0], self.freq2[1] - self.freq2[0]

    def value_at(self, xi) -> float:
        """Spectrum magnitude at the nearest bin to ``xi``."""
        i = int(np.argmin(np.abs(self.freq1 - xi[0])))
        j = int(np.argmin(np.abs(self.freq2 - xi[1])))
        return float(self.magnitude[i, j])

    def max_near(self, xi, radius) -> float:
        F1, F2 = np.meshgrid(self.freq1, self.freq2, indexing="ij")
        m = (F1 - xi[0]) ** 2 + (F2 - xi[1]) ** 2 <= radius**2
        return float(self.magnitude[m].max()) if m.any() else 0.0

    def nearest_peak(self, xi):
        return min(self.peaks, key=lambda p: math.hypot(p.freq[0] - xi[0], p.freq[1] - xi[1]))


def _refine(mag, i, j):
    """Quadratic sub-bin offsets around a local maximum."""
    out = []
    for d, (a, b, c) in enumerate(((mag[i - 1, j], mag[i, j], mag[(i + 1) % mag.shape[0], j]),
                                   (mag[i, j - 1], mag[i, j], mag[i, (j + 1) % mag.shape[1]]))):
        den = a - 2 * b + c
        out.append(0.5 * (a - c) / den if den < 0 else 0.0)
    return out


def windowed_ft(values, steps, center, sigma_w: float, origin=(0.0, 0.0), periodic=(True, False),
                pad: int = 4, n_peaks: int = 4, extent=None) -> WindowedSpectrum:
    """Gaussian-windowed, zero-padded FFT in continuous-transform units.

    The window ``exp(-|y - center|^2 / 2 sigma_w^2)`` is cropped at 4 sigma.
    Frequencies are ``2 pi k / (M h)``; magnitudes carry the ``h1 h2`` factor of a
    Riemann sum. ``extent`` (per-axis lengths) enables wrap-around on periodic axes.
    """
    v = np.asarray(values, dtype=float)
    h = np.asarray(steps, dtype=float)
    if sigma_w <= 2 * h.max():
        raise DomainError("window must span more than two grid steps")
    idx, wts = [], []
    clipped = False
    for d in range(2):
        n = v.shape[d]
        half = int(math.ceil(4 * sigma_w / h[d]))
        c = (center[d] - origin[d]) / h[d]
        ii = np.arange(int(math.floor(c)) - half, int(math.floor(c)) + half + 2)
        y = origin[d] + ii * h[d]
        if periodic[d]:
            ii = np.mod(ii, n)
        else:
            keep = (ii >= 0) & (ii < n)
            clipped |= not keep.all() and np.exp(-((y[~keep] - center[d]) ** 2) / (2 * sigma_w**2)).max() > 1e-3
            ii, y = ii[keep], y[keep]
        idx.append(ii)
        wts.append(np.exp(-((y - center[d]) ** 2) / (2 * sigma_w**2)))
    block = v[np.ix_(idx[0], idx[1])] * wts[0][:, None] * wts[1][None, :]
    M = [int(2 ** math.ceil(math.log2(pad * s))) for s in block.shape]
    F = np.fft.fftshift(np.fft.fft2(block, s=M)) * h[0] * h[1]
    mag = np.abs(F)
    f1 = np.fft.fftshift(np.fft.fftfreq(M[0], d=h[0])) * 2 * np.pi
    f2 = np.fft.fftshift(np.fft.fftfreq(M[1], d=h[1])) * 2 * np.pi
    # local maxima on the interior
    core = mag[1:-1, 1:-1]
    is_max = np.ones_like(core, dtype=bool)
    for di in (-1, 0, 1):
        for dj in (-1, 0, 1):
            if di or dj:
                is_max &= core >= mag[1 + di: mag.shape[0] - 1 + di, 1 + dj: mag.shape[1] - 1 + dj]
    ii, jj = np.nonzero(is_max)
    order = np.argsort(-core[ii, jj])[: 2 * n_peaks]
    peaks = []
    for o in order:
        i, j = ii[o] + 1, jj[o] + 1
        d1, d2 = _refine(mag, i, j)
        peaks.append(SpectralPeak((f1[i] + d1 * (f1[1] - f1[0]), f2[j] + d2 * (f2[1] - f2[0])),
                                  float(mag[i, j])))
    return WindowedSpectrum(f1, f2, mag, peaks, clipped)


def sinogram_wft(sino: SinogramGrid, center, sigma_w: float = 0.2, **kw) -> WindowedSpectrum:
    return windowed_ft(sino.values, sino.steps, center, sigma_w, origin=sino.origin,
                       periodic=(True, False), **kw)


def image_wft(img, center: complex, sigma_w: float, **kw) -> WindowedSpectrum:
    """Windowed FT of an ``ImageGrid`` around ``center``; axis 1 is ``x``."""
    h = img.step
    o = -img.R + h / 2
    return windowed_ft(img.values.T, (h, h), (center.real, center.imag), sigma_w, origin=(o, o),
                       periodic=(False, False), **kw)


# --------------------------------------------------------------------------
# lattices and upsampling


def parallelogram_cell(b1: float, b2: float, B: float = 1.0) -> np.ndarray:
    """Vertices ``(-b1,-b2), (b1,0), (b1,b2), (-b1,0)`` scaled by ``B``."""
    return B * np.array([[-b1, -b2], [b1, 0.0], [b1, b2], [-b1, 0.0]])


def box_cell(b1: float, b2: float, B: float = 1.0) -> np.ndarray:
    return B * np.array([[-b1, -b2], [b1, -b2], [b1, b2], [-b1, b2]])


@dataclass
class TilingLattice:
    """Sampling lattice ``W Z^2`` and a spectral cell polygon.

    Spectral copies sit at the dual lattice ``2 pi W^{-T} k``.
    """

    W: np.ndarray
    cell: np.ndarray

    def __post_init__(self):
        self.W = np.asarray(self.W, dtype=float)
        self.cell = np.asarray(self.cell, dtype=float)
        if self.W.shape != (2, 2) or abs(np.linalg.det(self.W)) < 1e-14 * max(1.0, np.abs(self.W).max() ** 2):
            raise DomainError("degenerate sampling matrix")

    @classmethod
    def rectangular(cls, h1: float, h2: float, cell):
        return cls(np.diag([h1, h2]), cell)

    @property
    def dual(self) -> np.ndarray:
        return 2 * np.pi * np.linalg.inv(self.W).T

    def translates(self):
        D = self.dual
        return [D @ np.array([i, j]) for i in (-1, 0, 1) for j in (-1, 0, 1) if i or j]


def tiling_check(lat: TilingLattice, rel_tol: float = 1e-9) -> bool:
    """True iff the cell and its 8 nearest translates overlap in (numerically) zero area."""
    P = Polygon(lat.cell)
    if not P.is_valid:
        P = P.buffer(0)
    area = P.area
    for d in lat.translates():
        Q = shapely.affinity.translate(P, float(d[0]), float(d[1]))
        if P.intersection(Q).area > rel_tol * area:
            return False
    return True


def resample_grid(sino: SinogramGrid, n1: int, n2: int) -> SinogramGrid:
    """Separable Lanczos-3 resampling onto another grid of the same chart."""
    y1, y2 = SinogramGrid.nodes(sino.geometry, sino.chart, n1, n2)
    v = lanczos_resample_axis(sino.values, 0, sino.origin[0], sino.steps[0], True, y1)
    v = lanczos_resample_axis(v, 1, sino.origin[1], sino.steps[1], False, y2)
    return sino.like(v)


def upsample_box_lanczos(sino: SinogramGrid, factor: int = 3) -> SinogramGrid:
    n1, n2 = sino.shape
    return resample_grid(sino, factor * n1, factor * n2)


def upsample_parallelogram(sino: SinogramGrid, factor: int, cell) -> SinogramGrid:
    """Zero-insertion upsampling followed by the indicator of ``cell``.

    Zero insertion periodizes the spectrum ``factor`` times per axis; keeping
    the copy inside ``cell`` (continuous frequency units) is exact for data
    whose spectrum lies in a cell that tiles under the coarse dual lattice.
    Axis 2 is treated as periodic; chart data vanish at its ends.
    """
    n1, n2 = sino.shape
    f = int(factor)
    m1, m2 = f * n1, f * n2
    up = np.zeros((m1, m2))
    up[::f, ::f] = sino.values
    h1, h2 = sino.steps[0] / f, sino.steps[1] / f
    k1 = np.fft.fftfreq(m1, d=h1) * 2 * np.pi
    k2 = np.fft.fftfreq(m2, d=h2) * 2 * np.pi
    K1, K2 = np.meshgrid(k1, k2, indexing="ij")
    P = Polygon(np.asarray(cell, dtype=float))
    inside = shapely.contains_xy(P, K1, K2) | shapely.intersects_xy(P.boundary, K1, K2)
    # fine cell-centred nodes sit (f - 1) / 2 fine steps after each coarse node on axis 2
    delta = 0.5 * (f - 1) * h2
    F = np.fft.fft2(up) * inside * (f * f) * np.exp(-1j * K2 * delta)
    return sino.like(np.fft.ifft2(F).real)
