import numpy as np
import pytest

from lpr.dynamics import ReducedState, integrate_reduced, lp_rhs
from lpr.errors import GridMismatchError, MembershipError
from lpr.lie_core import adjoint_matrix, affine_coords, affine_element, group_exp
from lpr.reconstruction import (
    MECH,
    PRINCIPAL,
    FullState,
    adjoint_rate_term,
    compose_full,
    direct_integrate,
    horizontal_lift_mech,
    horizontal_lift_principal,
    mech_b,
    reconstruct,
    reconstruct_route,
    route_distance,
    vertical_lift_coefficient,
    vertical_part,
)
from lpr.scenarios import AFFINE_DEFAULT_ICS, REGISTRY, affine_reference, get_scenario


def routes(sys, s0, t_end=1.0, dt=1e-3):
    rt = integrate_reduced(sys, s0.reduced(), t_end, dt)
    return rt, {
        "direct": direct_integrate(sys, s0, t_end, dt),
        MECH: reconstruct_route(sys, rt, s0.g, MECH),
        PRINCIPAL: reconstruct_route(sys, rt, s0.g, PRINCIPAL),
    }


@pytest.mark.parametrize("name", sorted(REGISTRY))
def test_triple_route_agreement(name):
    sys = get_scenario(name)
    _, tr = routes(sys, sys.initial_state())
    for a, b in (("direct", MECH), ("direct", PRINCIPAL), (MECH, PRINCIPAL)):
        d = route_distance(tr[a], tr[b])
        assert d["reduced"] <= 1e-6 and d["group"] <= 1e-6, (a, b, d)


def test_direct_reduced_part_equals_reduced_integration():
    sys = get_scenario("wong-demo")
    s0 = sys.initial_state()
    rt, tr = routes(sys, s0, 0.5, 1e-2)
    assert np.array_equal(tr["direct"].states, rt.states)


def test_affine_direct_closed_form():
    sys = get_scenario("affine")
    tr = direct_integrate(sys, sys.initial_state(), 1.0, 1e-3)
    theta, phi = affine_coords(tr.group[-1])
    assert tr.x[-1, 0] == pytest.approx(2 / 3, abs=1e-12)
    assert theta == pytest.approx(1 / 6, abs=1e-12)
    assert phi == pytest.approx(2.0, abs=1e-12)


def test_larmor_closed_form_full_state():
    sys = get_scenario("kaluza-klein", B=1.3)
    s0 = sys.initial_state({"x2": 0.4, "theta0": 0.25})
    tr = direct_integrate(sys, s0, 2.0, 1e-3)
    exact = sys.closed_form(2.0, {"x2": 0.4, "theta0": 0.25})
    assert np.allclose(tr.group[-1], exact.g, atol=1e-10)
    assert np.allclose(tr.states[-1], exact.reduced().as_vector(), atol=1e-10)


@pytest.mark.parametrize("t", [0.25, 0.5, 1.0])
def test_affine_reconstruction_intermediates(t):
    sys = get_scenario("affine")
    s0 = sys.initial_state()
    rt = integrate_reduced(sys, s0.reduced(), 1.0, 1e-3)
    n = int(round(t / 1e-3))
    ref = affine_reference(2.0, AFFINE_DEFAULT_ICS, t)
    for mode, lift in ((MECH, horizontal_lift_mech), (PRINCIPAL, horizontal_lift_principal)):
        h = lift(sys, rt, s0.g)
        g = reconstruct(sys, rt, h, mode)
        th_h, ph_h = affine_coords(h.matrices[n])
        th_1, ph_1 = affine_coords(g.matrices[n])
        assert th_h == pytest.approx(ref[f"{mode}_theta_h"], abs=1e-9)
        assert ph_h == pytest.approx(ref[f"{mode}_phi_h"], abs=1e-9)
        assert th_1 == pytest.approx(ref[f"{mode}_theta_1"], abs=1e-9)
        assert ph_1 == pytest.approx(ref[f"{mode}_phi_1"], abs=1e-9)


@pytest.mark.parametrize("ics", [{}, {"x0": 0.5, "dtheta0": 0.3, "phi0": -1.0, "dphi0": 2.0, "theta0": 0.2}])
def test_affine_reference_consistent_with_closed_form(ics):
    # composition g h of either route reproduces the full closed form
    sys = get_scenario("affine")
    full = sys.ics(ics)
    for t in (0.3, 0.9):
        exact = sys.closed_form(t, ics)
        ref = affine_reference(2.0, full, t)
        for mode in (MECH, PRINCIPAL):
            g = affine_element(ref[f"{mode}_theta_1"], ref[f"{mode}_phi_1"]).matrix
            h = affine_element(ref[f"{mode}_theta_h"], ref[f"{mode}_phi_h"]).matrix
            assert np.allclose(g @ h, exact.g, atol=1e-12)


@pytest.mark.parametrize("name", ["affine", "wong-demo"])
def test_lifts_are_horizontal(name):
    sys = get_scenario(name)
    s0 = sys.initial_state()
    rt = integrate_reduced(sys, s0.reduced(), 1.0, 1e-2)
    hm = horizontal_lift_mech(sys, rt, s0.g)
    hp = horizontal_lift_principal(sys, rt, s0.g)
    eps = 1e-4
    for t in (0.2, 0.55, 0.8):
        s = rt.state_at(t)
        gam = sys.chart.coefficients(s.x)
        for curve, fiber in ((hm, mech_b(sys, s) @ s.v), (hp, np.zeros(sys.alg.dim))):
            dh = (curve.at(t + eps) - curve.at(t - eps)) / (2 * eps)
            lam = sys.rep.coords(np.linalg.solve(curve.at(t), dh), check=False)
            # fiber quasi-velocity of the lift is lambda + gamma v
            assert np.allclose(lam + gam @ s.v, fiber, atol=1e-6)


def test_group_curve_dense_output():
    sys = get_scenario("wong-demo")
    s0 = sys.initial_state()
    coarse = integrate_reduced(sys, s0.reduced(), 1.0, 1e-2)
    fine = integrate_reduced(sys, s0.reduced(), 1.0, 1e-3)
    hc = horizontal_lift_mech(sys, coarse, s0.g)
    hf = horizontal_lift_mech(sys, fine, s0.g)
    assert np.array_equal(hc.at(coarse.times[7]), hc.matrices[7])
    assert np.allclose(hc.at(0.555), hf.matrices[555], atol=1e-7)
    with pytest.raises(ValueError):
        hc.at(-0.1)


@pytest.mark.parametrize("name", ["affine", "wong-demo", "rigid-body"])
def test_left_translation_equivariance(name):
    sys = get_scenario(name)
    s0 = sys.initial_state()
    k = group_exp(sys.rep, np.linspace(0.3, -0.6, sys.alg.dim)).matrix
    moved = FullState(s0.x, k @ s0.g, s0.v, s0.w)
    _, a = routes(sys, s0, 0.5, 1e-3)
    _, b = routes(sys, moved, 0.5, 1e-3)
    for mode in a:
        assert np.max(np.abs(np.einsum("ij,njk->nik", k, a[mode].group) - b[mode].group)) <= 1e-9
        assert np.array_equal(a[mode].states, b[mode].states)


def test_vertical_part_vanishes_on_horizontal_states():
    sys = get_scenario("affine", q=1.7)
    rng = np.random.default_rng(21)
    for _ in range(10):
        s = sys.sample_state(rng)
        b = mech_b(sys, s)
        hs = ReducedState(s.x, s.v, b @ s.v + np.array([0.0, s.w[1]]))
        # b has no second component, so the w2 part survives untouched
        h = affine_element(*rng.normal(size=2))
        vp = vertical_part(sys, hs, h)
        A = adjoint_matrix(sys.rep, sys.alg, h)
        assert np.allclose(vp, A @ np.array([0.0, s.w[1]]), atol=1e-14)
    sys = get_scenario("wong-demo")
    s = ReducedState([0.1, 0.2], [0.3, 0.4], mech_b(sys, ReducedState([0.1, 0.2], [0.3, 0.4], [0, 0, 0])) @ [0.3, 0.4])
    assert np.allclose(vertical_part(sys, s, np.eye(3)), 0.0)


def test_adjoint_rate_term_along_direct_trajectory():
    sys = get_scenario("wong-demo")
    dt = 1e-3
    tr = direct_integrate(sys, sys.initial_state(), 0.6, dt)
    for n in (100, 300, 550):
        Ap = adjoint_matrix(sys.rep, sys.alg, tr.group[n + 1])
        Am = adjoint_matrix(sys.rep, sys.alg, tr.group[n - 1])
        A = adjoint_matrix(sys.rep, sys.alg, tr.group[n])
        s = tr.state(n).reduced()
        fd = np.linalg.solve(A, (Ap - Am) / (2 * dt)) @ s.w
        assert np.allclose(fd, adjoint_rate_term(sys, s), atol=1e-5)


def test_vertical_lift_coefficient():
    sys = get_scenario("affine")
    s = ReducedState([0.0], [1.0], [0.2, 0.7])
    assert np.allclose(vertical_lift_coefficient(sys, s), lp_rhs(sys, s)[2])
    sys = get_scenario("wong-demo")
    s = ReducedState([0.3, -0.2], [0.5, 0.1], [1.0, 0.0, -1.0])
    assert np.allclose(vertical_lift_coefficient(sys, s), lp_rhs(sys, s)[2] + adjoint_rate_term(sys, s))


def test_grid_mismatch_and_bad_inputs():
    sys = get_scenario("affine")
    s0 = sys.initial_state()
    a = integrate_reduced(sys, s0.reduced(), 1.0, 0.1)
    b = integrate_reduced(sys, s0.reduced(), 1.0, 0.05)
    h = horizontal_lift_mech(sys, a, s0.g)
    with pytest.raises(GridMismatchError):
        reconstruct(sys, b, h, MECH)
    with pytest.raises(GridMismatchError):
        compose_full(b, h, h)
    with pytest.raises(ValueError):
        reconstruct_route(sys, a, s0.g, "sideways")
    with pytest.raises(MembershipError):
        horizontal_lift_mech(sys, a, np.array([[1.0, 0.0], [1.0, 1.0]]))
    with pytest.raises(MembershipError):
        direct_integrate(sys, FullState(s0.x, -np.eye(2), s0.v, s0.w), 1.0, 0.1)


def test_full_trajectory_accessors():
    sys = get_scenario("kaluza-klein")
    tr = direct_integrate(sys, sys.initial_state(), 0.1, 0.01)
    assert len(tr) == 11
    assert tr.x.shape == (11, 3) and tr.v.shape == (11, 3) and tr.w.shape == (11, 1)
    st = tr.state(4)
    assert np.array_equal(st.g, tr.group[4])
    assert tr.provenance == "direct-oracle"
