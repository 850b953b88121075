"""Independent reference computations used by the tests.

Nothing here calls into the closed forms under test: geodesics are integrated
from the Christoffel symbols of the conformal metric with an adaptive
high-order solver, chord integrals use adaptive quadrature, and the odd
Hilbert transform is a dense circular convolution.
"""

import math

import numpy as np
from scipy.integrate import quad, solve_ivp


def _grad_phi(kappa, x, y):
    # metric exp(2 phi)|dz|^2 with exp(-phi) = 1 + kappa |z|^2
    c = 1.0 + kappa * (x * x + y * y)
    return -2 * kappa * x / c, -2 * kappa * y / c, c


def geodesic_ode(kappa):
    def rhs(_t, u):
        x, y, vx, vy = u
        px, py, _ = _grad_phi(kappa, x, y)
        dot = px * vx + py * vy
        sp = vx * vx + vy * vy
        return [vx, vy, -2 * vx * dot + sp * px, -2 * vy * dot + sp * py]

    return rhs


def trace_geodesic(kappa, z0, theta0, t_end=None, R=1.0, rtol=1e-12, atol=1e-13):
    """Unit-speed geodesic from ``z0`` in Euclidean direction ``theta0``.

    Integrates until ``t_end`` or until the boundary ``|z| = R`` is crossed.
    Returns ``(t, z(t), theta(t))`` at the stopping time.
    """
    c = 1.0 + kappa * abs(z0) ** 2
    u0 = [z0.real, z0.imag, c * math.cos(theta0), c * math.sin(theta0)]

    def leave(_t, u):
        return u[0] ** 2 + u[1] ** 2 - R * R

    leave.terminal = True
    leave.direction = 1
    T = t_end if t_end is not None else 50.0 * R
    sol = solve_ivp(geodesic_ode(kappa), (0.0, T), u0, method="DOP853", rtol=rtol, atol=atol,
                    events=None if t_end is not None else leave)
    if t_end is None:
        t = float(sol.t_events[0][0])
        u = sol.y_events[0][0]
    else:
        t, u = float(sol.t[-1]), sol.y[:, -1]
    return t, complex(u[0], u[1]), math.atan2(u[3], u[2])


def fan_entry(kappa, s, alpha, R=1.0):
    """Boundary point and inward Euclidean direction of the fan-beam configuration."""
    L = 2 * math.pi * R / (1 + kappa * R * R)
    phi = 2 * math.pi * s / L
    return R * complex(math.cos(phi), math.sin(phi)), phi + math.pi + alpha


def arclength_of(z, kappa, R=1.0):
    L = 2 * math.pi * R / (1 + kappa * R * R)
    return (math.atan2(z.imag, z.real) % (2 * math.pi)) * L / (2 * math.pi)


def jacobi_dense(kappa, t):
    """``(a, b)`` by adaptive integration of ``c'' + 4 kappa c = 0``."""
    def rhs(_t, u):
        return [u[1], -4 * kappa * u[0], u[3], -4 * kappa * u[2]]

    sol = solve_ivp(rhs, (0.0, t), [1.0, 0.0, 0.0, 1.0], method="DOP853", rtol=1e-13, atol=1e-14)
    return sol.y[0, -1], sol.y[2, -1]


def chord_integral(f, kappa, s, alpha, R=1.0):
    """Integral of ``f`` along the fan-beam geodesic by adaptive quadrature of the traced path."""
    z0, th0 = fan_entry(kappa, s, alpha, R)
    tau, _, _ = trace_geodesic(kappa, z0, th0, R=R)
    rhs = geodesic_ode(kappa)
    c = 1.0 + kappa * R * R
    sol = solve_ivp(rhs, (0.0, tau), [z0.real, z0.imag, c * math.cos(th0), c * math.sin(th0)],
                    method="DOP853", rtol=1e-12, atol=1e-13, dense_output=True)

    def integrand(t):
        u = sol.sol(t)
        return f(complex(u[0], u[1]))

    val, _ = quad(integrand, 0.0, tau, epsabs=1e-13, epsrel=1e-12, limit=400)
    return val


def dense_odd_hilbert(u):
    """Odd-harmonic Hilbert transform by direct circular convolution (``O(N^2)``).

    ``cot(pi m / N)`` on odd ``m`` alone is the full discrete Hilbert kernel;
    composing it with the odd projection ``(u - u(. + pi)) / 2`` gives
    ``2 / (N sin(2 pi m / N))`` on odd ``m`` (``N`` divisible by 4), whose
    symbol is ``-i sgn(k)`` on odd ``k`` and zero on even ``k``.
    """
    u = np.asarray(u, dtype=float)
    N = u.shape[-1]
    assert N % 4 == 0
    m = np.arange(N)
    ker = np.zeros(N)
    odd = m % 2 == 1
    ker[odd] = 2.0 / N / np.sin(2 * np.pi * m[odd] / N)
    idx = (m[:, None] - m[None, :]) % N
    return u @ ker[idx].T


def fd_scattering_jacobian(scatter, II, s, theta, eps=1e-5):
    """Central-difference ``dS`` in the frame ``H = d_s - II d_theta``, ``V = d_theta``."""
    def S(ds, dth):
        s2, th2 = scatter(s + ds, theta + dth)
        return np.array([float(s2), float(th2)])

    def d(vec):
        hs, hv = vec
        diff = S(eps * hs, eps * hv) - S(-eps * hs, -eps * hv)
        return diff / (2 * eps)

    rows = []
    for vec in ((1.0, -II), (0.0, 1.0)):
        ds, dth = d(vec)
        rows.append([ds, dth + II * ds])
    return np.array(rows)
