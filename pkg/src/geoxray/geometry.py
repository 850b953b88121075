"""Closed-form geometry of constant-curvature disks.

The disk ``D_R = {|z| <= R}`` carries the metric ``|dz|^2 / c(z)^2`` with
``c(z) = 1 + kappa |z|^2``, of Gauss curvature ``4 kappa``. It is simple
whenever ``|kappa R^2| < 1``.

Conventions
-----------
All modules share the following conventions, fixed here once.

* Points of the boundary are parameterized by metric arclength ``s`` through
  ``Gamma(s) = R exp(2 pi i s / L)``.
* The fan-beam angle ``alpha`` is measured from the inward normal, positive
  counterclockwise, so the unit vector at ``(s, alpha)`` is
  ``c(Gamma(s)) exp(i (2 pi s / L + pi + alpha))``. Inward directions have
  ``|alpha| <= pi/2``; the full fiber of the boundary circle bundle uses
  ``alpha`` in ``[-pi/2, 3pi/2)``.
* Interior unit vectors are written ``c(z) exp(i theta)``; ``theta`` is the
  Euclidean direction angle.
* ``X`` is the geodesic vector field, ``V = d/dtheta`` and ``X_perp = [X, V]``.
  For ``kappa = 0`` this gives ``X_perp = (sin theta, -cos theta, 0)``.
* The conormal covector of a unit vector ``v`` is
  ``v_perp^flat = sqrt(det g) (-v_y dx + v_x dy)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np

TWO_PI = 2.0 * np.pi

#: Orientation of the conormal covector ``v_perp^flat`` (+1: rotate ``v`` by +pi/2).
CONORMAL_SIGN = 1.0


class DomainError(ValueError):
    """Input outside the domain of a geometric map."""


class SingularConfiguration(ArithmeticError):
    """The requested quantity is singular (tangential exit, degenerate disk)."""


@dataclass(frozen=True)
class GeometryParams:
    """Radius and metric parameter of a constant-curvature disk."""

    R: float = 1.0
    kappa: float = 0.0

    def __post_init__(self):
        if not self.R > 0:
            raise ValueError(f"R must be positive, got {self.R}")
        if not abs(self.kappa * self.R**2) < 1:
            raise ValueError(
                f"|kappa R^2| = {abs(self.kappa * self.R ** 2):g} >= 1: disk is not simple"
            )

    @property
    def L(self) -> float:
        """Metric length of the boundary circle."""
        return TWO_PI * self.R / (1.0 + self.kappa * self.R**2)

    @property
    def II(self) -> float:
        """Second fundamental form of the boundary (constant)."""
        return (1.0 - self.kappa * self.R**2) / self.R

    @property
    def curvature(self) -> float:
        return 4.0 * self.kappa

    def c(self, z):
        """Conformal factor ``1 + kappa |z|^2``."""
        return 1.0 + self.kappa * np.abs(z) ** 2


class FanBeamPoint(NamedTuple):
    s: np.ndarray
    alpha: np.ndarray


class ParallelPoint(NamedTuple):
    w: np.ndarray
    p: np.ndarray


class InteriorPoint(NamedTuple):
    z: np.ndarray
    theta: np.ndarray


def wrap_angle(a, lo=-np.pi):
    """Reduce an angle into ``[lo, lo + 2 pi)``."""
    return np.mod(np.asarray(a, dtype=float) - lo, TWO_PI) + lo


# ---------------------------------------------------------------------------
# Radial geodesic parameter and Jacobi functions
# ---------------------------------------------------------------------------


def x_of_t(g: GeometryParams, t):
    """Euclidean distance from 0 after time ``t`` along a diameter."""
    t = np.asarray(t, dtype=float)
    k = g.kappa
    if k > 0:
        r = math.sqrt(k)
        return np.tan(r * t) / r
    if k < 0:
        r = math.sqrt(-k)
        return np.tanh(r * t) / r
    return t.copy()


def t_of_x(g: GeometryParams, x):
    """Inverse of :func:`x_of_t`."""
    x = np.asarray(x, dtype=float)
    k = g.kappa
    if k > 0:
        r = math.sqrt(k)
        return np.arctan(r * x) / r
    if k < 0:
        r = math.sqrt(-k)
        return np.arctanh(r * x) / r
    return x.copy()


def jacobi_a(g: GeometryParams, t):
    t = np.asarray(t, dtype=float)
    k = g.kappa
    if k > 0:
        return np.cos(2.0 * math.sqrt(k) * t)
    if k < 0:
        return np.cosh(2.0 * math.sqrt(-k) * t)
    return np.ones_like(t)


def jacobi_b(g: GeometryParams, t):
    t = np.asarray(t, dtype=float)
    k = g.kappa
    if k > 0:
        r = 2.0 * math.sqrt(k)
        return np.sin(r * t) / r
    if k < 0:
        r = 2.0 * math.sqrt(-k)
        return np.sinh(r * t) / r
    return t.copy()


def jacobi_adot(g: GeometryParams, t):
    return -g.curvature * jacobi_b(g, t)


def jacobi_bdot(g: GeometryParams, t):
    return jacobi_a(g, t)


def jacobi_ode_oracle(curvature: float | Callable[[float], float], t: float,
                      init=(1.0, 0.0), step: float = 1e-3):
    """Integrate ``c'' + K(t) c = 0`` with classical RK4.

    Parameters
    ----------
    curvature : float or callable
        Gauss curvature ``K`` along the geodesic, constant or a function of time.
    t : float
        Final time (may be negative).
    init : (float, float)
        Initial value and derivative ``(c(0), c'(0))``.
    step : float
        Maximal step size.

    Returns
    -------
    (c(t), c'(t))
    """
    K = curvature if callable(curvature) else (lambda _t, _k=float(curvature): _k)
    n = max(1, int(math.ceil(abs(t) / step)))
    h = t / n
    y = np.array(init, dtype=float)

    def rhs(tt, yy):
        return np.array([yy[1], -K(tt) * yy[0]])

    tt = 0.0
    for _ in range(n):
        k1 = rhs(tt, y)
        k2 = rhs(tt + h / 2, y + h / 2 * k1)
        k3 = rhs(tt + h / 2, y + h / 2 * k2)
        k4 = rhs(tt + h, y + h * k3)
        y = y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        tt += h
    return float(y[0]), float(y[1])


def trig_identity_residual(g: GeometryParams, t, tp, sign: int = +1):
    """Residual of the addition formulas for ``a`` and ``b``."""
    sg = 1.0 if sign >= 0 else -1.0
    a, b = jacobi_a, jacobi_b
    ra = np.abs(a(g, t + sg * tp) - (a(g, t) * a(g, tp) - sg * g.curvature * b(g, t) * b(g, tp)))
    rb = np.abs(b(g, t + sg * tp) - (b(g, t) * a(g, tp) + sg * a(g, t) * b(g, tp)))
    return float(np.max(np.maximum(ra, rb)))


# ---------------------------------------------------------------------------
# Fan-beam geodesics, exit times, endpoint and charts
# ---------------------------------------------------------------------------


def exit_time(g: GeometryParams, alpha):
    """Length ``tau(alpha)`` of the geodesic entering at fan-beam angle ``alpha``."""
    alpha = np.asarray(alpha, dtype=float)
    if np.any(np.abs(alpha) > np.pi / 2 + 1e-12):
        raise DomainError("exit_time requires |alpha| <= pi/2")
    ca = np.clip(np.cos(alpha), 0.0, None)
    k, R = g.kappa, g.R
    if k > 0:
        r = math.sqrt(k)
        tau = np.arctan(2 * r * R / (1 - k * R**2) * ca) / r
    elif k < 0:
        r = math.sqrt(-k)
        tau = np.arctanh(2 * r * R / (1 - k * R**2) * ca) / r
    else:
        tau = 2 * R * ca
    return np.where(np.abs(alpha) >= np.pi / 2, 0.0, tau)


def geodesic_point(g: GeometryParams, s, alpha, t, check: bool = True) -> InteriorPoint:
    """Point and direction angle of the unit-speed geodesic from ``(s, alpha)``."""
    s, alpha, t = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (s, alpha, t)))
    if check:
        tau = exit_time(g, alpha)
        eps = 1e-12 * g.R
        if np.any(t < -eps) or np.any(t > tau + eps):
            raise DomainError("t outside [0, exit_time]")
    R, k = g.R, g.kappa
    x = x_of_t(g, t)
    rot = np.exp(1j * TWO_PI * s / g.L)
    ea = np.exp(1j * alpha)
    den = 1.0 + k * R * ea * x
    z = rot * (R - x * ea) / den
    zdot = -rot * ea * (1.0 + k * R**2) * (1.0 + k * x**2) / den**2
    return InteriorPoint(z, np.angle(zdot))


def frak_s(g: GeometryParams, alpha):
    """Angle map ``atan(((1 - kR^2)/(1 + kR^2)) tan alpha)``, continuous up to ``+-pi/2``."""
    alpha = np.asarray(alpha, dtype=float)
    q = (1 - g.kappa * g.R**2) / (1 + g.kappa * g.R**2)
    # atan2 form: exact at alpha = +-pi/2, no tan overflow
    return np.arctan2(q * np.sin(alpha), np.cos(alpha))


def frak_s_inv(g: GeometryParams, beta):
    beta = np.asarray(beta, dtype=float)
    q = (1 + g.kappa * g.R**2) / (1 - g.kappa * g.R**2)
    return np.arctan2(q * np.sin(beta), np.cos(beta))


def frak_s_prime(g: GeometryParams, alpha):
    q = (1 - g.kappa * g.R**2) / (1 + g.kappa * g.R**2)
    alpha = np.asarray(alpha, dtype=float)
    return q / (np.cos(alpha) ** 2 + q**2 * np.sin(alpha) ** 2)


def endpoint(g: GeometryParams, s, alpha):
    """Boundary arclength (mod L) of the exit point of the geodesic from ``(s, alpha)``."""
    alpha = np.asarray(alpha, dtype=float)
    if np.any(np.abs(alpha) > np.pi / 2 + 1e-12):
        raise DomainError("endpoint requires |alpha| <= pi/2")
    return np.mod(np.asarray(s, dtype=float) + g.L / TWO_PI * (np.pi + 2 * frak_s(g, alpha)), g.L)


def fb_to_parallel(g: GeometryParams, s, alpha) -> ParallelPoint:
    p = g.L / TWO_PI * (np.pi / 2 + frak_s(g, alpha))
    w = np.mod(np.asarray(s, dtype=float) + p, g.L)
    return ParallelPoint(w, p)


def parallel_to_fb(g: GeometryParams, w, p) -> FanBeamPoint:
    p = np.asarray(p, dtype=float)
    if np.any(p < -1e-12) or np.any(p > g.L / 2 + 1e-12):
        raise DomainError("p must lie in [0, L/2]")
    s = np.mod(np.asarray(w, dtype=float) - p, g.L)
    alpha = frak_s_inv(g, TWO_PI * p / g.L - np.pi / 2)
    return FanBeamPoint(s, alpha)


def scattering(g: GeometryParams, s, theta) -> FanBeamPoint:
    """Scattering relation on the whole boundary circle bundle.

    ``theta`` is the full-fiber angle in ``[-pi/2, 3pi/2)``. Inward points are
    sent to their exit configuration, outward points to their entry one; the
    map is an involution.
    """
    theta = np.asarray(theta, dtype=float)
    s2 = np.mod(np.asarray(s, dtype=float) + scattering_shift(g, theta), g.L)
    th2 = wrap_angle(np.pi - theta, -np.pi / 2)
    return FanBeamPoint(s2, th2)


def scattering_shift(g: GeometryParams, theta):
    """Arclength shift ``s(S(s, theta)) - s`` (defined mod L) at full-fiber angle ``theta``."""
    th = wrap_angle(theta, -np.pi / 2)
    th = np.where(th > np.pi / 2, th - np.pi, th)
    return g.L / TWO_PI * (np.pi + 2 * frak_s(g, th))


def scattering_shift_prime(g: GeometryParams, theta):
    return g.L / np.pi * frak_s_prime(g, theta)


def antipodal_scattering(g: GeometryParams, s, alpha) -> FanBeamPoint:
    """``S_A(s, alpha) = (s'(s, alpha), -alpha)`` on the inward boundary."""
    return FanBeamPoint(endpoint(g, s, alpha), -np.asarray(alpha, dtype=float))


@dataclass(frozen=True)
class ScatteringJacobian:
    """Matrix of ``dS`` in the ``(H, V)`` frames: rows are ``dS(H)``, ``dS(V)``."""

    m11: float
    m12: float
    m21: float
    m22: float

    @property
    def matrix(self) -> np.ndarray:
        return np.array([[self.m11, self.m12], [self.m21, self.m22]])

    @property
    def det(self) -> float:
        return self.m11 * self.m22 - self.m12 * self.m21


def signed_exit_time(g: GeometryParams, theta):
    """Fiberwise odd extension of the exit time to the full fiber."""
    th = wrap_angle(theta, -np.pi / 2)
    outward = th > np.pi / 2
    return np.where(outward, -exit_time(g, np.where(outward, th - np.pi, th)), exit_time(g, np.where(outward, 0.0, th)))


def scattering_differential(g: GeometryParams, s, theta) -> ScatteringJacobian:
    """Differential of :func:`scattering` at a full-fiber point ``(s, theta)``."""
    th = float(wrap_angle(theta, -np.pi / 2))
    mu = math.cos(th)
    mu_out = math.cos(float(scattering(g, s, th).alpha))
    if abs(mu_out) < 1e-12 or abs(mu) < 1e-12:
        raise SingularConfiguration("tangential configuration: mu o S = 0")
    tt = float(signed_exit_time(g, th))
    a, ad = float(jacobi_a(g, tt)), float(jacobi_adot(g, tt))
    b, bd = float(jacobi_b(g, tt)), float(jacobi_bdot(g, tt))
    return ScatteringJacobian(mu * a / mu_out, -mu * ad, -b / mu_out, bd)


# ---------------------------------------------------------------------------
# Frame on the unit circle bundle and interior tracing
# ---------------------------------------------------------------------------


def vector_fields(g: GeometryParams, z, theta):
    """Components of ``X``, ``X_perp`` and ``V`` in the coordinates ``(x, y, theta)``.

    Returns three arrays of shape ``(..., 3)``.
    """
    z = np.asarray(z, dtype=complex)
    theta = np.asarray(theta, dtype=float)
    x, y = z.real, z.imag
    k = g.kappa
    c = 1.0 + k * (x**2 + y**2)
    ct, st = np.cos(theta), np.sin(theta)
    X = np.stack([c * ct, c * st, 2 * k * (x * st - y * ct)], axis=-1)
    Xp = np.stack([c * st, -c * ct, -2 * k * (x * ct + y * st)], axis=-1)
    V = np.stack(np.broadcast_arrays(np.zeros_like(c), np.zeros_like(c), np.ones_like(c)), axis=-1)
    return X, Xp, V


def conormal(g: GeometryParams, z, theta):
    """Euclidean components of ``(c e^{i theta})_perp^flat`` at ``z``, as a complex number."""
    c = g.c(z)
    return CONORMAL_SIGN * 1j * np.exp(1j * np.asarray(theta, dtype=float)) / c


def _chord_roots(g: GeometryParams, z, theta):
    """Signed Euclidean parameters where the geodesic through ``(z, theta)`` meets the circle.

    The geodesic is ``gamma(x) = (z + e x) / (1 - kappa conj(z) e x)`` with
    ``e = exp(i theta)`` and ``x = x_of_t(t)``.
    """
    R, k = g.R, g.kappa
    e = np.exp(1j * theta)
    zr = z * np.conj(e)
    p = zr.real
    r2 = np.abs(z) ** 2
    A = 1.0 - R**2 * k**2 * r2
    B = 2.0 * p * (1.0 + k * R**2)
    C = r2 - R**2
    disc = np.sqrt(np.maximum(B * B - 4 * A * C, 0.0))
    # stable quadratic roots, xp >= 0 >= xm
    q = -0.5 * (B + np.where(B >= 0, disc, -disc))
    with np.errstate(divide="ignore", invalid="ignore"):
        r1 = q / A
        r2_ = np.where(q != 0, C / q, 0.0)
    xp = np.maximum(r1, r2_)
    xm = np.minimum(r1, r2_)
    return e, xp, xm


def _along(g, z, e, x):
    den = 1.0 - g.kappa * np.conj(z) * e * x
    pt = (z + e * x) / den
    vel = e * (1.0 + g.kappa * np.abs(z) ** 2) / den**2
    return pt, np.angle(vel)


def footpoint(g: GeometryParams, z, theta):
    """Entry configuration of the geodesic through ``(z, theta)``.

    Returns ``(s, alpha, t)`` with ``t`` the time from the boundary to ``z``.
    """
    z = np.asarray(z, dtype=complex)
    theta = np.asarray(theta, dtype=float)
    z, theta = np.broadcast_arrays(z, theta)
    e, _, xm = _chord_roots(g, z, theta)
    pt, ang = _along(g, z, e, xm)
    phi = np.angle(pt)
    s = np.mod(phi, TWO_PI) * g.L / TWO_PI
    alpha = wrap_angle(ang - phi - np.pi)
    alpha = np.clip(alpha, -np.pi / 2, np.pi / 2)
    t = -t_of_x(g, xm)
    return s, alpha, t


def exit_configuration(g: GeometryParams, z, theta):
    """Exit point of the geodesic through ``(z, theta)``: ``(s, full-fiber angle, t)``."""
    z = np.asarray(z, dtype=complex)
    theta = np.asarray(theta, dtype=float)
    z, theta = np.broadcast_arrays(z, theta)
    e, xp, _ = _chord_roots(g, z, theta)
    pt, ang = _along(g, z, e, xp)
    phi = np.angle(pt)
    s = np.mod(phi, TWO_PI) * g.L / TWO_PI
    th = wrap_angle(ang - phi - np.pi, -np.pi / 2)
    return s, th, t_of_x(g, xp)


def geodesic_rhs(g: GeometryParams, state):
    """Right-hand side of the geodesic flow ``X`` for states ``(x, y, theta)``."""
    x, y, th = state[..., 0], state[..., 1], state[..., 2]
    k = g.kappa
    c = 1.0 + k * (x * x + y * y)
    return np.stack([c * np.cos(th), c * np.sin(th), 2 * k * (x * np.sin(th) - y * np.cos(th))], axis=-1)


def rk4_flow(g: GeometryParams, state, t, step=1e-3):
    """Flow ``state = (x, y, theta)`` for time ``t`` (either sign) with RK4."""
    state = np.asarray(state, dtype=float)
    n = max(1, int(math.ceil(abs(t) / step)))
    h = t / n
    for _ in range(n):
        k1 = geodesic_rhs(g, state)
        k2 = geodesic_rhs(g, state + h / 2 * k1)
        k3 = geodesic_rhs(g, state + h / 2 * k2)
        k4 = geodesic_rhs(g, state + h * k3)
        state = state + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    return state


def trace_to_boundary_rk4(g: GeometryParams, z, theta, direction: int = +1,
                          step: float | None = None, tol: float = 1e-12):
    """Trace from an interior point to the boundary by RK4, locating the crossing by bisection.

    Returns ``(t, state)`` with ``t >= 0`` the elapsed time and ``state`` the
    ``(x, y, theta)`` at the crossing, flowing forward (``direction=+1``) or
    backward (``direction=-1``).
    """
    if step is None:
        step = min(1e-2, exit_time(g, 0.0) / 64)
    st = np.array([complex(z).real, complex(z).imag, float(theta)])
    R2 = g.R**2
    t = 0.0
    sgn = 1.0 if direction >= 0 else -1.0
    while True:
        nxt = rk4_flow(g, st, sgn * step, step)
        if nxt[0] ** 2 + nxt[1] ** 2 >= R2:
            break
        st, t = nxt, t + step
        if t > 100 * g.L:
            raise RuntimeError("geodesic did not exit")
    lo, hi = 0.0, step
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        m = rk4_flow(g, st, sgn * mid, mid / 4 + 1e-300)
        if m[0] ** 2 + m[1] ** 2 >= R2:
            hi = mid
        else:
            lo = mid
    return t + hi, rk4_flow(g, st, sgn * hi, hi / 4 + 1e-300)
