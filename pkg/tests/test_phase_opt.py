import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qcgeo.errors import DomainError
from qcgeo.metric import christoffel_numeric, trajectory_length
from qcgeo.phase_opt import (
    PrescribedPath,
    induced_metric,
    optimal_phase,
    optimal_trajectory,
    perturbation_scan,
    submanifold_geodesic,
    surface_oracle,
    sweep_submanifold,
)
from qcgeo.metric import metric_components


def su2_closed_form(t0=0.2, t1=1.2):
    F = lambda th: math.cos(th) + th * math.sin(th)
    return -(F(t1) - F(t0))


def test_su2_example_optimal_phase():
    eta = optimal_phase(PrescribedPath.paper_example("su2"))
    assert eta[0] == 0.0
    assert eta[-1] == pytest.approx(su2_closed_form(), abs=1e-9)
    assert eta[-1] == pytest.approx(-0.461, abs=1e-3)


def test_su11_example_optimal_phase_quadrature():
    from scipy.integrate import quad

    # independent adaptive quadrature in theta-like variable rho: dphi = 2 rho drho
    ref = -quad(lambda r: r * math.cosh(r) / math.cosh(2 * r), 0.2, 1.2, epsabs=1e-13)[0]
    eta = optimal_phase(PrescribedPath.paper_example("su11"))
    assert eta[-1] == pytest.approx(ref, abs=1e-9)
    assert eta[-1] == pytest.approx(-0.369451, abs=1e-6)


def test_equator_path_has_zero_phase():
    p = PrescribedPath("su2", lambda t: np.full_like(t, math.pi / 2), lambda t: 3 * t ** 2,
                       lambda t: np.zeros_like(t), lambda t: 6 * t, n=400)
    assert np.abs(optimal_phase(p)).max() < 1e-15


def test_constant_phi_su11_zero_phase():
    p = PrescribedPath("su11", lambda t: 0.5 + t, lambda t: np.full_like(t, 0.7),
                       lambda t: np.ones_like(t), lambda t: np.zeros_like(t), n=400)
    assert np.abs(optimal_phase(p)).max() == 0.0


def test_path_validation():
    with pytest.raises(DomainError):
        PrescribedPath.paper_example("su2", n=100)
    with pytest.raises(DomainError, match="singular boundary"):
        PrescribedPath("su2", lambda t: t, lambda t: t, lambda t: np.ones_like(t), lambda t: np.ones_like(t))


def test_from_samples_matches_functions():
    t = np.linspace(0, 1, 301)
    p = PrescribedPath.from_samples("su2", t, t + 0.2, (t + 0.2) ** 2)
    assert optimal_phase(p)[-1] == pytest.approx(su2_closed_form(), abs=1e-8)


@pytest.mark.parametrize("tag", ["su2", "su11"])
def test_cross_term_cancels(tag):
    path = PrescribedPath.paper_example(tag)
    tr = optimal_trajectory(path)
    m = induced_metric(path)
    assert np.abs(m.A * tr.velocities[:, 2] + m.B).max() < 1e-9


def test_induced_metric_su2_example():
    m = induced_metric(PrescribedPath.paper_example("su2"))
    assert m.A[0] == pytest.approx(1.0, abs=1e-14)
    assert m.B[0] == pytest.approx(0.2 * math.cos(0.2), abs=1e-12)
    assert m.C[0] == pytest.approx(0.25 * (1 + 4 * 0.04), abs=1e-12)
    th = m.tau + 0.2
    assert np.abs(m.B - th * np.cos(th)).max() < 1e-10
    assert np.abs(m.C - 0.25 * (1 + 4 * th ** 2)).max() < 1e-10


def test_induced_metric_su11_example():
    m = induced_metric(PrescribedPath.paper_example("su11"))
    r = m.tau + 0.2
    assert np.abs(m.A - np.cosh(2 * r)).max() < 1e-10
    assert np.abs(m.B - r * np.cosh(r)).max() < 1e-10
    assert np.abs(m.C - (0.25 + r ** 2)).max() < 1e-10


def test_constant_path_degenerate():
    p = PrescribedPath("su2", lambda t: np.full_like(t, 1.0), lambda t: np.full_like(t, 0.4),
                       lambda t: np.zeros_like(t), lambda t: np.zeros_like(t), n=300)
    with pytest.raises(DomainError, match="degenerate"):
        induced_metric(p)


def test_su11_submanifold_symbols_closed_form():
    """The six induced-metric symbols of the SU(1,1) example, with theta = tau + 0.2."""
    m = induced_metric(PrescribedPath.paper_example("su11"))
    for r in (0.3, 0.7, 1.1):
        G = m.christoffel(np.array(r - 0.2))
        D = math.cosh(2 * r) * (1 + 2 * r * r) - 2 * r * r
        ch, sh, c2, s2 = math.cosh(r), math.sinh(r), math.cosh(2 * r), math.sinh(2 * r)
        # metric in (rho, eta): [[1/4 + r^2, r ch], [r ch, c2]]
        g = np.array([[0.25 + r * r, r * ch], [r * ch, c2]])
        dg = np.array([[2 * r, ch + r * sh], [ch + r * sh, 2 * s2]])
        ginv = np.linalg.inv(g)
        low = np.zeros((2, 2, 2))
        low[:, 0, 0] = [0.5 * dg[0, 0], dg[1, 0] - 0.0]
        low[0, 0, 0] = 0.5 * dg[0, 0]
        low[1, 0, 0] = dg[0, 1]
        low[0, 0, 1] = low[0, 1, 0] = 0.0
        low[1, 0, 1] = low[1, 1, 0] = 0.5 * dg[1, 1]
        low[0, 1, 1] = -0.5 * dg[1, 1]
        low[1, 1, 1] = 0.0
        expect = np.einsum("km,mij->kij", ginv, low)
        assert np.abs(G - expect).max() < 1e-7
        assert D > 0


@pytest.mark.parametrize("tag", ["su2", "su11"])
def test_geodesic_at_optimum_matches_phase(tag):
    path = PrescribedPath.paper_example(tag)
    eta = optimal_phase(path)
    tr = submanifold_geodesic(induced_metric(path), float(eta[-1]))
    assert np.abs(tr.points[:, 2] - eta).max() < 1e-3
    assert tr.info["length"] == pytest.approx(trajectory_length(optimal_trajectory(path)), abs=1e-7)


def test_far_endpoint_longer():
    path = PrescribedPath.paper_example("su2")
    m = induced_metric(path)
    best = submanifold_geodesic(m, -0.461).info["length"]
    assert submanifold_geodesic(m, 0.3).info["length"] > best
    assert submanifold_geodesic(m, -1.2).info["length"] > best


def test_decoupled_fiber_is_linear():
    # on the equator B = 0, so the geodesic phase is linear in the tau arc length
    p = PrescribedPath("su2", lambda t: np.full_like(t, math.pi / 2), lambda t: 2 * t,
                       lambda t: np.zeros_like(t), lambda t: np.full_like(t, 2.0), n=501)
    m = induced_metric(p)
    assert np.abs(m.B).max() < 1e-15
    tr = submanifold_geodesic(m, 0.8)
    assert np.abs(tr.points[:, 2] - 0.8 * tr.times).max() < 1e-9


def test_sweep_argmin_le_grid():
    m = induced_metric(PrescribedPath.paper_example("su2", n=501))
    res = sweep_submanifold(m, np.linspace(-1, 0.2, 13))
    assert all(res.argmin_length <= L + 1e-12 for _, L in res.grid)
    assert res.argmin_eta == pytest.approx(-0.461, abs=5e-3)


def test_surface_oracle_su2():
    length, eta_f = surface_oracle(induced_metric(PrescribedPath.paper_example("su2")), n_knots=20)
    assert eta_f == pytest.approx(su2_closed_form(), abs=5e-3)


def test_perturbation_scan_shape():
    path = PrescribedPath.paper_example("su11")
    scan = perturbation_scan(path, [-0.2, 0.0, 0.2])
    assert scan[1][1] < scan[0][1] and scan[1][1] < scan[2][1]
    assert scan[1][1] == pytest.approx(trajectory_length(optimal_trajectory(path)))


@settings(max_examples=25)
@given(
    tag=st.sampled_from(["su2", "su11"]),
    amp=st.floats(-1.0, 1.0),
    freq=st.floats(0.2, 5.0),
    a=st.floats(0.3, 1.2),
    b=st.floats(-2.0, 2.0),
    w=st.tuples(*[st.floats(0.5, 2.0)] * 3),
)
def test_pointwise_optimality(tag, amp, freq, a, b, w):
    path = PrescribedPath(tag, lambda t: a + 0.5 * t, lambda t: b * t ** 2, lambda t: np.full_like(t, 0.5),
                          lambda t: 2 * b * t, weights=w, n=401)
    base = trajectory_length(optimal_trajectory(path))
    tr = optimal_trajectory(path)
    tr.points[:, 2] += amp * np.sin(freq * path.times)
    tr.velocities[:, 2] += amp * freq * np.cos(freq * path.times)
    assert trajectory_length(tr) >= base - 1e-9


def test_anisotropic_phase_from_components():
    w = (1.0, 1.7, 0.6)
    path = PrescribedPath.paper_example("su2", weights=w)
    tr = optimal_trajectory(path)
    g_cc, g_pp, g_ee, g_ec, g_ep = metric_components("su2", w, tr.points[:, 0], tr.points[:, 1])
    assert np.allclose(tr.velocities[:, 2], -(g_ec * tr.velocities[:, 0] + g_ep * tr.velocities[:, 1]) / g_ee)
