import math

import numpy as np
import pytest

from geoxray.canrel import (
    PLOT_ALPHAS,
    SIGMA1,
    SIGMA2,
    SIGMA3,
    SigmaSpec,
    b_numbers,
    bowtie,
    canonical_graph,
    eta_fanbeam,
    eta_general,
    eta_parallel,
    interior_covector,
    max_angle_hitting_support,
    sample_factors,
    support_interval,
    table1,
    write_table_csv,
)
from geoxray.geometry import (
    DomainError,
    GeometryParams,
    antipodal_scattering,
    exit_time,
    fb_to_parallel,
    geodesic_point,
    jacobi_a,
    jacobi_b,
)

KAPPAS = (-0.6, -0.3, 0.0, 0.3, 0.6)


def test_eta_fanbeam_examples():
    g = GeometryParams(1.0, 0.3)
    e = eta_fanbeam(g, 0.0, 0.4, 0.0)
    assert (float(e.comp1), float(e.comp2)) == pytest.approx((-math.cos(0.4), 0.0))
    e = eta_fanbeam(GeometryParams(1.0, 0.0), 0.0, 0.0, 1.0)
    assert (float(e.comp1), float(e.comp2)) == pytest.approx((0.0, 1.0))


def test_eta_fanbeam_frame_change():
    g = GeometryParams(1.0, -0.3)
    t = 0.5 * float(exit_time(g, 0.4))
    e = eta_fanbeam(g, 0.0, 0.4, t)
    assert np.allclose((e.comp1, e.comp2), eta_general(g, 0.0, 0.4, t, "fan"), atol=1e-10)


def _chart_jacobian(g, s, a, h=1e-6):
    cols = []
    for ds, da in ((h, 0.0), (0.0, h)):
        wp = np.array(fb_to_parallel(g, s + ds, a + da)) - np.array(fb_to_parallel(g, s - ds, a - da))
        cols.append(wp / (2 * h))
    return np.array(cols).T  # d(w, p) / d(s, alpha)


@pytest.mark.parametrize("kappa,alpha,frac", [(0.3, 0.0, 0.2), (0.3, 0.7, 0.6), (-0.6, -0.5, 0.9)])
def test_eta_parallel_is_pushforward_of_fanbeam(kappa, alpha, frac):
    """Same covector in two charts: eta_fan = J^T eta_par with J the chart Jacobian."""
    g = GeometryParams(1.0, kappa)
    t = frac * float(exit_time(g, alpha))
    ef = eta_fanbeam(g, 1.0, alpha, t)
    w, p = fb_to_parallel(g, 1.0, alpha)
    ep = eta_parallel(g, w, p, t)
    J = _chart_jacobian(g, 1.0, alpha)
    pulled = J.T @ np.array([float(ep.comp1), float(ep.comp2)])
    assert np.allclose(pulled, [float(ef.comp1), float(ef.comp2)], atol=1e-7)


def test_eta_parallel_examples():
    g = GeometryParams(1.0, 0.3)
    p = g.L / 3
    from geoxray.geometry import parallel_to_fb

    _, a = parallel_to_fb(g, 0.5, p)
    tau = float(exit_time(g, a))
    mu = math.cos(float(a))
    e = eta_parallel(g, 0.5, p, tau / 2)
    assert (float(e.comp1), float(e.comp2)) == pytest.approx((0.0, mu / float(jacobi_a(g, tau / 2))))
    e = eta_parallel(g, 0.5, p, 0.2 * tau)
    assert np.allclose((e.comp1, e.comp2), eta_general(g, 0.0, float(a), 0.2 * tau, "parallel"), atol=1e-10)
    g0 = GeometryParams(1.0, 0.0)
    t = np.linspace(0, 1.6, 9)
    a0 = 0.5
    w, p = fb_to_parallel(g0, 0.0, a0)
    tau0 = 2 * math.cos(a0)
    e = eta_parallel(g0, w, p, t)
    assert np.allclose(e.comp1, math.cos(a0) * (t - tau0 / 2) / (tau0 / 2))
    assert np.allclose(e.comp2, math.cos(a0))


def test_eta_parallel_symmetry_about_midpoint():
    g = GeometryParams(1.0, -0.3)
    w, p = fb_to_parallel(g, 0.0, 0.3)
    tau = float(exit_time(g, 0.3))
    t = np.linspace(0, tau, 33)
    e, er = eta_parallel(g, w, p, t), eta_parallel(g, w, p, tau - t)
    assert np.allclose(e.comp1, -er.comp1) and np.allclose(e.comp2, er.comp2)


# canonical graph ------------------------------------------------------------


def test_canonical_graph_flat_center():
    g = GeometryParams(1.0, 0.0)
    cp, cm = canonical_graph(g, 0.0, np.array([0.0, 100.0]))
    assert cp.t == pytest.approx(1.0) and cm.t == pytest.approx(1.0)
    assert cp.lam == pytest.approx(100.0) and cm.lam == pytest.approx(-100.0)


@pytest.mark.parametrize("kappa", [-0.3, 0.3, 0.6])
@pytest.mark.parametrize("chart", ["fan", "parallel"])
def test_canonical_graph_projection_and_symmetry(kappa, chart):
    g = GeometryParams(1.0, kappa)
    z, xi = 0.3 - 0.4j, np.array([-37.0, 55.0])
    cp, cm = canonical_graph(g, z, xi, chart)
    assert cp.lam > 0 > cm.lam and cp.lam == pytest.approx(-cm.lam)
    assert cp.t + cm.t == pytest.approx(cp.tau)
    for img in (cp, cm):
        s, a = img.fan_base
        w = interior_covector(g, s, a, img.t, img.lam)
        assert abs(w.z - z) < 1e-10
        assert np.allclose(w.xi, xi, atol=1e-8)
    # from the definition C(w) = lam eta with +-lam > 0: C_+(-w) = -C_-(w) on the same
    # base, so the two branches agree as subsets of any fiberwise-even set
    mp, mm = canonical_graph(g, z, -xi, chart)
    assert np.allclose(mp.covector.vector, -cm.covector.vector, atol=1e-10)
    assert np.allclose(mp.covector.base, cm.covector.base, atol=1e-12)
    assert np.allclose(mm.covector.vector, -cp.covector.vector, atol=1e-10)


def test_canonical_graph_rejects_zero_and_boundary():
    g = GeometryParams(1.0, 0.3)
    with pytest.raises(DomainError):
        canonical_graph(g, 0.1, [0.0, 0.0])
    with pytest.raises(DomainError):
        canonical_graph(g, 1.0, [1.0, 0.0])


def test_canonical_graph_recovers_packet_geodesic():
    # packet conormal to the geodesic (5L/6, 0) at u = 0.3
    g = GeometryParams(1.0, 0.3)
    s, a = 5 * g.L / 6, 0.0
    tau = float(exit_time(g, a))
    w = interior_covector(g, s, a, 0.3 * tau, 50.0)
    cp, _ = canonical_graph(g, w.z, w.xi)
    assert float(cp.fan_base.s) == pytest.approx(s, abs=1e-10)
    assert float(cp.fan_base.alpha) == pytest.approx(a, abs=1e-10)
    assert cp.u == pytest.approx(0.3) and cp.lam == pytest.approx(50.0)


# bowties and b-numbers ---------------------------------------------------------


def test_bowtie_flat_boxes():
    g = GeometryParams(1.0, 0.0)
    for sig in (SIGMA1, SIGMA2):
        assert b_numbers(g, "fan", sig) == pytest.approx((1.0, 2.0), rel=1e-6)


def test_bowtie_supported_flat_is_exact_chord():
    g = GeometryParams(1.0, 0.0)
    b = b_numbers(g, "fan", SIGMA3)
    assert b == pytest.approx((0.75, 1.75), rel=1e-6)
    # reference box (0.74, 1.74) within 2%
    assert b == pytest.approx((0.74, 1.74), rel=0.02)


def test_bowtie_basics():
    g = GeometryParams(1.0, -0.3)
    bt = bowtie(g, "fan", (0.0, 0.3), SIGMA1, n_t=128)
    assert bt.t.size == 128 and bt.symmetric
    poly = bt.closed_polygon()
    assert np.allclose(poly[0], 0.0)
    with pytest.raises(ValueError):
        bowtie(g, "fan", (0.0, 0.3), SIGMA1, n_t=32)
    e3 = bowtie(g, "fan", (0.0, 0.3), SIGMA3, n_t=128)
    z, _ = geodesic_point(g, 0.0, 0.3, e3.t)
    assert np.all(np.abs(z) < 0.75)


@pytest.mark.parametrize("kappa,chart,sig,ref", [
    (-0.3, "fan", SIGMA1, (0.7, 3.71)),
    (-0.6, "fan", SIGMA2, (1.0, 20.0)),
    (0.6, "parallel", SIGMA1, (1.6, 4.0)),
])
def test_b_numbers_examples(kappa, chart, sig, ref):
    b = b_numbers(GeometryParams(1.0, kappa), chart, sig)
    assert b == pytest.approx(ref, rel=0.02)


def test_b_numbers_fig4_open_question():
    # reference pair (0.4, 8) at kappa = -0.6 reproduces N = 16 = (L/pi) b_s b_alpha
    g = GeometryParams(1.0, -0.6)
    b = b_numbers(g, "fan", SIGMA1)
    assert b == pytest.approx((0.4, 8.0), rel=0.02)
    assert g.L / np.pi * b[0] * b[1] == pytest.approx(16.0, rel=0.02)


@pytest.mark.parametrize("kappa,sig,ref", [
    (0.0, SIGMA1, (4.0, 2.0)),
    (-0.6, SIGMA2, (100.0, 12.5)),
    (0.3, SIGMA3, (1.0, 0.93)),
])
def test_sample_factors_examples(kappa, sig, ref):
    n = sample_factors(GeometryParams(1.0, kappa), sig, alphas=PLOT_ALPHAS)
    assert n == pytest.approx(ref, rel=0.02)


def test_max_angle_hitting_support_flat():
    am, pm = max_angle_hitting_support(GeometryParams(1.0, 0.0), 0.75)
    assert am == pytest.approx(math.asin(0.75), abs=1e-12)
    assert pm == pytest.approx(np.pi / 2 + am, abs=1e-12)


def test_max_angle_hitting_support_dense_scan():
    g = GeometryParams(1.0, 0.3)
    am, _ = max_angle_hitting_support(g, 0.75)
    tau = float(exit_time(g, am))
    t = np.linspace(0, tau, 20001)
    assert np.min(np.abs(geodesic_point(g, 0.0, am, t).z)) == pytest.approx(0.75, abs=1e-8)
    alphas = np.linspace(am - 1e-3, am + 1e-3, 2001)
    hit = [np.min(np.abs(geodesic_point(g, 0.0, a, np.linspace(0, float(exit_time(g, a)), 4001)).z)) < 0.75
           for a in alphas]
    last = alphas[np.nonzero(hit)[0][-1]]
    assert last == pytest.approx(am, abs=2e-6)
    with pytest.raises(DomainError):
        max_angle_hitting_support(g, 1.2)


def test_support_interval_misses():
    g = GeometryParams(1.0, 0.0)
    assert support_interval(g, 1.2, 0.75) is None
    t1, t2 = support_interval(g, 0.0, 0.75)
    assert (t1, t2) == pytest.approx((0.25, 1.75))


# properties ------------------------------------------------------------------


@pytest.mark.parametrize("kappa", KAPPAS)
def test_fiber_cone_property(kappa):
    g = GeometryParams(1.0, kappa)
    alphas = np.linspace(-np.pi / 2 + 1e-3, np.pi / 2 - 1e-3, 512)
    for a in alphas[::8]:
        tau = float(exit_time(g, a))
        t = np.linspace(0, tau, 65)
        ef = eta_fanbeam(g, 0.0, a, t)
        assert np.all(ef.comp2 >= 0)
        w, p = fb_to_parallel(g, 0.0, a)
        ep = eta_parallel(g, w, p, t)
        assert np.all(ep.comp2 >= -1e-15)
        assert np.all(np.abs(ep.comp1) <= ep.comp2 + 1e-12)


@pytest.mark.parametrize("kappa", [-0.6, 0.3])
def test_parallel_bowtie_antipodal_invariance(kappa):
    g = GeometryParams(1.0, kappa)
    for s, a in ((0.3, 0.2), (2.0, -0.9)):
        q = tuple(map(float, fb_to_parallel(g, s, a)))
        qa = tuple(map(float, fb_to_parallel(g, *antipodal_scattering(g, s, a))))
        e1 = bowtie(g, "parallel", q, SIGMA2).extent
        e2 = bowtie(g, "parallel", qa, SIGMA2).extent
        assert e1 == pytest.approx(e2, abs=1e-10)


def test_monotone_ratio_on_random_geodesics():
    rng = np.random.default_rng(7)
    for _ in range(100):
        g = GeometryParams(1.0, rng.uniform(-0.8, 0.8))
        a = rng.uniform(-1.5, 1.5)
        tau = float(exit_time(g, a))
        t = np.linspace(tau * 1e-3, tau, 200)
        e = eta_fanbeam(g, 0.0, a, t)
        assert np.all(np.diff(e.comp1 / e.comp2) > 0)
        assert np.all(np.diff(jacobi_a(g, t) / jacobi_b(g, t)) < 0)


def test_bowtie_scaling_equivariance():
    g = GeometryParams(1.0, 0.3)
    bt = bowtie(g, "fan", (0.0, 0.4), SIGMA1)
    sc = bt.scaled(100.0)
    assert np.allclose(sc.comp1, 100 * bt.comp1) and np.allclose(sc.comp2, 100 * bt.comp2)
    assert sc.extent == pytest.approx(tuple(100 * e for e in bt.extent))


def test_sigma_spec_validation():
    with pytest.raises(ValueError):
        SigmaSpec("hexagonal")
    g = GeometryParams(1.0, 0.3)
    assert SIGMA3.m(g, np.array([0.8]))[0] == 0.0
    assert SIGMA1.m(g, np.array([0.5]))[0] == pytest.approx(1.075)
    assert SIGMA2.m(g, np.array([0.5]))[0] == 1.0


def test_table_csv(tmp_path):
    rows = table1([0.0], alphas=PLOT_ALPHAS)
    assert len(rows) == 6
    p = tmp_path / "t.csv"
    write_table_csv(rows, p)
    lines = p.read_text().splitlines()
    assert lines[0] == "kappa,chart,sigma,b1,b2,N"
    assert lines[1].startswith("0,fan,Sigma1,1.000000,2.000000,4.000000")
