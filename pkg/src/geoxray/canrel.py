"""Canonical relation of the geodesic X-ray transform on constant-curvature disks.

Data-space covectors are given in fan-beam ``(s, alpha)`` or parallel
``(w, p)`` coordinates; bowties, b-numbers and number-of-sample factors are
derived from them.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Iterable, Literal

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .geometry import (
    CONORMAL_SIGN,
    TWO_PI,
    DomainError,
    FanBeamPoint,
    GeometryParams,
    SingularConfiguration,
    antipodal_scattering,
    conormal,
    exit_time,
    fb_to_parallel,
    footpoint,
    frak_s,
    geodesic_point,
    jacobi_a,
    jacobi_b,
    parallel_to_fb,
    _chord_roots,
    t_of_x,
)

Chart = Literal["fan", "parallel"]
CHARTS = ("fan", "parallel")
# five reference directions used for the bowtie plots
PLOT_ALPHAS = tuple(j * np.pi / 9 for j in range(5))


@dataclass
class DataCovector:
    """Covector ``comp1 d(y1) + comp2 d(y2)`` at a chart point ``base = (y1, y2)``."""

    chart: str
    base: tuple
    comp1: np.ndarray
    comp2: np.ndarray

    def __post_init__(self):
        if self.chart not in CHARTS:
            raise ValueError(f"unknown chart {self.chart!r}")

    @property
    def vector(self) -> np.ndarray:
        return np.stack(np.broadcast_arrays(self.comp1, self.comp2), axis=-1)

    def __neg__(self):
        return DataCovector(self.chart, self.base, -self.comp1, -self.comp2)

    def scaled(self, lam):
        return DataCovector(self.chart, self.base, lam * self.comp1, lam * self.comp2)


@dataclass
class SpaceCovector:
    """Covector ``xi[0] dx + xi[1] dy`` at the interior point ``z``."""

    z: complex
    xi: np.ndarray

    @property
    def norm(self) -> float:
        return float(np.hypot(*self.xi))


# ---------------------------------------------------------------------------
# Elementary covectors
# ---------------------------------------------------------------------------


def eta_fanbeam(g: GeometryParams, s, alpha, t) -> DataCovector:
    """``eta_{s,alpha,t} = (II b(t) - cos(alpha) a(t)) ds + b(t) dalpha``."""
    alpha = np.asarray(alpha, dtype=float)
    t = np.asarray(t, dtype=float)
    b = jacobi_b(g, t)
    comp1 = g.II * b - np.cos(alpha) * jacobi_a(g, t)
    return DataCovector("fan", (s, alpha), comp1, b)


def eta_parallel(g: GeometryParams, w, p, t) -> DataCovector:
    """``eta_{w,p,t} = mu (b(t - tau/2)/b(tau/2) dw + a(t - tau/2)/a(tau/2) dp)``."""
    _, alpha = parallel_to_fb(g, w, p)
    mu = np.cos(alpha)
    tau = exit_time(g, alpha)
    ah = jacobi_a(g, tau / 2)
    bh = jacobi_b(g, tau / 2)
    if np.any(np.abs(ah) < 1e-14):
        raise SingularConfiguration("a(tau/2) = 0")
    tt = np.asarray(t, dtype=float) - tau / 2
    with np.errstate(divide="ignore", invalid="ignore"):
        # tangential limit: b(t - tau/2)/b(tau/2) -> (2t/tau - 1)
        ratio = np.where(np.abs(bh) > 1e-300, jacobi_b(g, tt) / np.where(bh == 0, 1, bh), 2 * tt / np.where(tau == 0, 1, tau))
    comp1 = mu * ratio
    comp2 = mu * jacobi_a(g, tt) / ah
    return DataCovector("parallel", (w, p), comp1, comp2)


def eta_general(g: GeometryParams, s, alpha, t, chart: Chart):
    """Chart components of the covector defined by ``eta(V) = b``, ``eta(H) = -mu a``.

    Uses the frame change of each chart and holds on general surfaces; used as
    an oracle for the closed forms above.
    """
    alpha = float(alpha)
    mu = math.cos(alpha)
    b = float(jacobi_b(g, t))
    a = float(jacobi_a(g, t))
    if chart == "fan":
        # ds(H) = 1, dalpha(H) = -II, ds(V) = 0, dalpha(V) = 1
        eta_alpha = b
        eta_s = -mu * a + g.II * eta_alpha
        return eta_s, eta_alpha
    tau = float(exit_time(g, alpha))
    a_t, b_t = float(jacobi_a(g, tau)), float(jacobi_b(g, tau))
    mu_s = -mu  # mu o S
    # rows: dw, dp evaluated on (V, H)
    M = np.array([[-b_t, -b_t], [mu * a_t + mu_s, mu * a_t - mu_s]])
    rhs = 2 * mu_s * np.array([b, -mu * a])
    ew, ep = np.linalg.solve(M, rhs)
    return float(ew), float(ep)


def eta(g: GeometryParams, chart: Chart, s, alpha, t) -> DataCovector:
    """Covector at fan-beam base ``(s, alpha)``, expressed in the requested chart."""
    if chart == "fan":
        return eta_fanbeam(g, s, alpha, t)
    w, p = fb_to_parallel(g, s, alpha)
    return eta_parallel(g, w, p, t)


def chart_point(g: GeometryParams, chart: Chart, s, alpha):
    if chart == "fan":
        return (s, alpha)
    return tuple(fb_to_parallel(g, s, alpha))


# ---------------------------------------------------------------------------
# Canonical graphs
# ---------------------------------------------------------------------------


@dataclass
class CanonicalImage:
    """One branch of the canonical relation applied to an interior covector."""

    fan_base: FanBeamPoint
    t: float
    lam: float
    tau: float
    covector: DataCovector

    @property
    def u(self) -> float:
        return self.t / self.tau


def canonical_graph(g: GeometryParams, z: complex, xi, chart: Chart = "fan"):
    """Images ``(C_+(omega), C_-(omega))`` of ``omega = xi[0] dx + xi[1] dy`` at ``z``."""
    xi = np.asarray(xi, dtype=float)
    nrm = float(np.hypot(xi[0], xi[1]))
    if nrm == 0:
        raise DomainError("omega must be nonzero")
    if abs(z) >= g.R:
        raise DomainError("base point must lie strictly inside the disk")
    psi = math.atan2(xi[1], xi[0])
    # direction w with w_perp^flat in R_+ omega
    theta = psi - math.pi / 2 * (1 if CONORMAL_SIGN > 0 else -1)
    lam = nrm * float(g.c(z))
    out = []
    for th, lm in ((theta, lam), (theta + math.pi, -lam)):
        s, a, t = footpoint(g, z, th)
        s, a, t = float(s), float(a), float(t)
        tau = float(exit_time(g, a))
        cov = eta(g, chart, s, a, t).scaled(lm)
        cov.base = chart_point(g, chart, s, a)
        out.append(CanonicalImage(FanBeamPoint(s, a), t, lm, tau, cov))
    return out[0], out[1]


def interior_covector(g: GeometryParams, s, alpha, t, lam) -> SpaceCovector:
    """``lam (gamma'(t))_perp^flat`` at ``gamma_{s,alpha}(t)``."""
    z, th = geodesic_point(g, s, alpha, t)
    w = lam * conormal(g, z, th)
    return SpaceCovector(complex(z), np.array([float(np.real(w)), float(np.imag(w))]))


# ---------------------------------------------------------------------------
# Band-limit sets and bowties
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SigmaSpec:
    """Band-limit set through its fiber scaling ``m``.

    ``kind`` is ``"euclidean"`` (unit Euclidean co-balls, ``m = c``),
    ``"metric"`` (unit metric co-balls, ``m = 1``) or ``"supported"``
    (Euclidean co-balls restricted to ``|x| < r0``).
    """

    kind: str = "euclidean"
    r0: float = 0.75

    def __post_init__(self):
        if self.kind not in ("euclidean", "metric", "supported"):
            raise ValueError(f"unknown Sigma kind {self.kind!r}")

    @property
    def label(self) -> str:
        return {"euclidean": "Sigma1", "metric": "Sigma2", "supported": "Sigma3"}[self.kind]

    def m(self, g: GeometryParams, z):
        z = np.asarray(z)
        if self.kind == "metric":
            return np.ones(z.shape)
        c = g.c(z)
        if self.kind == "supported":
            return np.where(np.abs(z) < self.r0, c, 0.0)
        return c


SIGMA1 = SigmaSpec("euclidean")
SIGMA2 = SigmaSpec("metric")
SIGMA3 = SigmaSpec("supported", 0.75)


def support_interval(g: GeometryParams, alpha: float, r0: float):
    """Times ``(t1, t2)`` during which ``gamma_{0,alpha}`` stays in ``{|z| <= r0}``.

    Returns ``None`` when the geodesic misses the disk of radius ``r0``.
    """
    tau = float(exit_time(g, alpha))
    zm, thm = geodesic_point(g, 0.0, alpha, tau / 2)
    if abs(zm) >= r0:
        return None
    inner = GeometryParams(r0, g.kappa)
    _, xp, _ = _chord_roots(inner, np.asarray(zm), np.asarray(thm))
    d = float(t_of_x(g, xp))
    return max(tau / 2 - d, 0.0), min(tau / 2 + d, tau)


def _t_range(g, alpha, sigma: SigmaSpec):
    tau = float(exit_time(g, alpha))
    if sigma.kind == "supported":
        return support_interval(g, alpha, sigma.r0)
    return (0.0, tau)


def _bowtie_components(g, chart, alpha, t, sigma):
    alpha = np.asarray(alpha, dtype=float)
    z, _ = geodesic_point(g, 0.0, alpha, t, check=False)
    m = sigma.m(g, z) if sigma.kind != "supported" else g.c(z)
    cov = eta(g, chart, 0.0, alpha, t)
    return m * cov.comp1, m * cov.comp2


@dataclass
class Bowtie:
    """Polyline ``m(gamma(t)) eta(t)`` for ``lambda = 1``; the set is its ``[-1, 1]`` dilation."""

    chart: str
    base: tuple
    t: np.ndarray
    comp1: np.ndarray
    comp2: np.ndarray
    symmetric: bool = True

    @property
    def extent(self):
        if self.comp1.size == 0:
            return 0.0, 0.0
        return float(np.max(np.abs(self.comp1))), float(np.max(np.abs(self.comp2)))

    def scaled(self, B: float) -> "Bowtie":
        return Bowtie(self.chart, self.base, self.t, B * self.comp1, B * self.comp2, self.symmetric)

    def closed_polygon(self) -> np.ndarray:
        """Vertices of the outline of the ``lambda in [-1, 1]`` set (two lobes through 0)."""
        pts = np.stack([self.comp1, self.comp2], axis=-1)
        return np.concatenate([[[0.0, 0.0]], pts, [[0.0, 0.0]], -pts], axis=0)


def bowtie(g: GeometryParams, chart: Chart, base, sigma: SigmaSpec = SIGMA1, n_t: int = 256) -> Bowtie:
    """Fiber of ``C_+(Sigma)`` over a chart point, sampled on ``n_t`` times in ``(0, tau)``."""
    if n_t < 64:
        raise ValueError("n_t must be >= 64")
    if chart == "fan":
        s, alpha = base
    else:
        s, alpha = parallel_to_fb(g, *base)
    s, alpha = float(s), float(alpha)
    tau = float(exit_time(g, alpha))
    t = (np.arange(n_t) + 0.5) / n_t * tau
    z, _ = geodesic_point(g, s, alpha, t)
    m = sigma.m(g, z)
    keep = m > 0 if sigma.kind == "supported" else np.ones(t.shape, bool)
    cov = eta(g, chart, s, alpha, t)
    return Bowtie(chart, tuple(base), t[keep], (m * cov.comp1)[keep], (m * cov.comp2)[keep])


# ---------------------------------------------------------------------------
# b-numbers and number-of-sample factors
# ---------------------------------------------------------------------------


def b_numbers(g: GeometryParams, chart: Chart, sigma: SigmaSpec = SIGMA1,
              n_alpha: int = 512, n_t: int = 1024, refine: bool = True, alphas=None):
    """Suprema ``(b1, b2)`` of the bowtie components over the inward boundary.

    The geometry and the band-limit sets are rotation invariant, so the sweep
    runs over ``alpha in [0, pi/2)`` only. A dense grid locates the maximum;
    a bounded scalar optimization in ``t`` nested in a golden-section search in
    ``alpha`` then refines it.

    Parameters
    ----------
    alphas : array_like, optional
        Restrict the supremum to these fan angles (e.g. ``PLOT_ALPHAS``, the
        five reference bowtie directions). Refinement is then done in ``t``
        only.
    """
    if alphas is not None:
        alphas = np.abs(np.atleast_1d(np.asarray(alphas, dtype=float)))
        if refine:
            return tuple(float(max(_max_over_t(g, chart, a, sigma, j) for a in alphas))
                         for j in range(2))
        n_alpha = None
    else:
        alphas = np.linspace(0.0, np.pi / 2, n_alpha, endpoint=False)
    best = np.zeros(2)
    arg = [0.0, 0.0]
    frac = np.linspace(0.0, 1.0, n_t)
    for a in alphas:
        rng = _t_range(g, a, sigma)
        if rng is None or rng[1] <= rng[0]:
            continue
        t = rng[0] + (rng[1] - rng[0]) * frac
        if sigma.kind != "supported":
            t = t[1:-1] if rng[0] == 0 else t
        c1, c2 = _bowtie_components(g, chart, a, t, sigma)
        for j, c in enumerate((c1, c2)):
            v = float(np.max(np.abs(c)))
            if v > best[j]:
                best[j], arg[j] = v, a
    if not refine or n_alpha is None:
        return float(best[0]), float(best[1])
    da = alphas[1] - alphas[0]
    out = []
    for j in range(2):
        lo, hi = max(arg[j] - da, 0.0), min(arg[j] + da, np.pi / 2 - 1e-9)
        res = minimize_scalar(lambda a: -_max_over_t(g, chart, a, sigma, j), bounds=(lo, hi),
                              method="bounded", options={"xatol": 1e-10})
        out.append(max(best[j], -float(res.fun), _max_over_t(g, chart, 0.0, sigma, j)))
    return float(out[0]), float(out[1])


def _max_over_t(g, chart, alpha, sigma, j):
    rng = _t_range(g, alpha, sigma)
    if rng is None or rng[1] <= rng[0]:
        return 0.0
    lo, hi = rng

    def f(t):
        return float(np.abs(_bowtie_components(g, chart, alpha, np.array(t), sigma)[j]))

    t = np.linspace(lo, hi, 257)
    vals = np.abs(_bowtie_components(g, chart, alpha, t, sigma)[j])
    i = int(np.argmax(vals))
    best = float(vals[i])
    if 0 < i < len(t) - 1:
        res = minimize_scalar(lambda x: -f(x), bounds=(t[i - 1], t[i + 1]), method="bounded",
                              options={"xatol": 1e-12})
        best = max(best, -float(res.fun))
    return best


def max_angle_hitting_support(g: GeometryParams, r0: float):
    """Largest ``alpha_m`` for which ``gamma_{0,alpha}`` meets ``{|z| <= r0}``, and its ``p_m``."""
    if not 0 < r0 < g.R:
        raise DomainError("need 0 < r0 < R")

    def gap(a):
        tau = float(exit_time(g, a))
        z, _ = geodesic_point(g, 0.0, a, tau / 2)
        return abs(complex(z)) - r0

    am = brentq(gap, 0.0, np.pi / 2 - 1e-12, xtol=1e-14)
    pm = g.L / TWO_PI * (np.pi / 2 + float(frak_s(g, am)))
    return float(am), float(pm)


def sample_factors(g: GeometryParams, sigma: SigmaSpec = SIGMA1, **kw):
    """Number-of-sample factors ``(N_fan, N_parallel)`` per unit band limit squared."""
    L = g.L
    bs, ba = b_numbers(g, "fan", sigma, **kw)
    bw, bp = b_numbers(g, "parallel", sigma, **kw)
    if sigma.kind == "supported":
        am, pm = max_angle_hitting_support(g, sigma.r0)
        n_fan = L * bs / np.pi * (2 * am * ba / np.pi)
        n_par = L * bw / np.pi * ((2 * pm - L / 2) * bp / np.pi)
    else:
        n_fan = L / np.pi * bs * ba
        n_par = L**2 / (2 * np.pi**2) * bw * bp
    return float(n_fan), float(n_par)


@dataclass
class TableRow:
    kappa: float
    chart: str
    sigma: str
    b1: float
    b2: float
    N: float


def table1(kappas: Iterable[float] = (-0.6, -0.3, 0.0, 0.3, 0.6), R: float = 1.0,
           sigmas=(SIGMA1, SIGMA2, SIGMA3), **kw) -> list[TableRow]:
    rows = []
    for sig in sigmas:
        for k in kappas:
            g = GeometryParams(R, k)
            n_fan, n_par = sample_factors(g, sig, **kw)
            for chart, n in (("fan", n_fan), ("parallel", n_par)):
                b1, b2 = b_numbers(g, chart, sig, **kw)
                rows.append(TableRow(k, chart, sig.label, b1, b2, n))
    return rows


def write_table_csv(rows: list[TableRow], path) -> None:
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["kappa", "chart", "sigma", "b1", "b2", "N"])
        for r in rows:
            wr.writerow([f"{r.kappa:g}", r.chart, r.sigma, f"{r.b1:.6f}", f"{r.b2:.6f}", f"{r.N:.6f}"])
