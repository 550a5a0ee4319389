import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lpr.dynamics import ReducedState
from lpr.errors import DimensionError, DomainError, SingularHessianError
from lpr.lagrangian import (
    HessianBlocks,
    ReducedLagrangian,
    gradient,
    hessian_blocks,
    mech_connection_coeffs,
    solve_checked,
    tilde_basis_hessian,
    velocity_hessian,
)
from lpr.lie_core import adjoint_matrix, affine_element, affine_group
from lpr.scenarios import REGISTRY, affine_lagrangian, get_scenario

finite = st.floats(-3.0, 3.0, allow_nan=False)


def affine_state(x=0.2, v=0.5, w1=-0.3, w2=1.4):
    return ReducedState([x], [v], [w1, w2])


def test_affine_gradient_values():
    g = gradient(affine_lagrangian(2.0), affine_state())
    assert np.allclose(g.dl_dx, [0.0])
    assert np.allclose(g.dl_dv, [2 * -0.3 + 0.5])
    assert np.allclose(g.dl_dw, [-0.3 + 2 * 0.5, 1 / 1.4])


@pytest.mark.parametrize("name", sorted(REGISTRY))
def test_fd_agrees_with_analytic(name):
    sys = get_scenario(name)
    fd = sys.lag.fd_only()
    rng = np.random.default_rng(11)
    for _ in range(30):
        s = sys.sample_state(rng)
        for a, b in zip(gradient(sys.lag, s), gradient(fd, s)):
            assert np.allclose(a, b, rtol=1e-7, atol=1e-7)
        Ha, Xa = velocity_hessian(sys.lag, s)
        Hf, Xf = velocity_hessian(fd, s)
        assert np.allclose(Ha, Hf, rtol=1e-5, atol=1e-5)
        assert np.allclose(Xa, Xf, rtol=1e-5, atol=1e-5)


def test_mixed_derivative_from_analytic_gradient():
    # hess missing but grad present: X comes from differentiating grad once
    sys = get_scenario("wong-demo")
    lag = ReducedLagrangian(sys.lag.value, 2, 3, grad=sys.lag.grad)
    s = ReducedState([0.4, -0.7], [1.2, 0.3], [0.1, 0.2, 0.3])
    _, X = velocity_hessian(lag, s)
    assert np.allclose(X, velocity_hessian(sys.lag, s)[1], atol=1e-8)


def test_method_selection():
    lag = affine_lagrangian(2.0).fd_only()
    with pytest.raises(ValueError):
        gradient(lag, affine_state(), method="analytic")
    g = gradient(affine_lagrangian(2.0), affine_state(), method="fd")
    assert np.allclose(g.dl_dw, [0.7, 1 / 1.4], atol=1e-9)


@settings(max_examples=50, deadline=None)
@given(x=finite, v=finite, w1=finite, logw2=st.floats(-2, 2))
def test_hessian_symmetric_and_fd_consistent(x, v, w1, logw2):
    lag = affine_lagrangian(3.0)
    s = affine_state(x, v, w1, np.exp(logw2))
    H, _ = velocity_hessian(lag.fd_only(), s)
    assert np.array_equal(H, H.T)
    assert np.allclose(H, velocity_hessian(lag, s)[0], rtol=1e-5, atol=1e-5 * np.exp(-2 * logw2))


def test_domain_guard():
    with pytest.raises(DomainError, match="w2 > 0"):
        gradient(affine_lagrangian(2.0), affine_state(w2=-0.1))
    with pytest.raises(DomainError):
        affine_lagrangian(2.0)(np.zeros(1), np.zeros(1), np.array([0.0, 0.0]))


def test_shape_guard():
    with pytest.raises(DimensionError):
        gradient(affine_lagrangian(2.0), ReducedState([0.0], [1.0], [1.0, 1.0, 1.0]))


def test_zero_base_dimension():
    sys = get_scenario("rigid-body")
    s = ReducedState([], [], [0.1, 0.2, 0.3])
    H, X = velocity_hessian(sys.lag.fd_only(), s)
    assert H.shape == (3, 3) and X.shape == (0, 3)
    assert np.allclose(H, np.diag([1.0, 2.0, 3.0]), atol=1e-6)


def test_block_layout():
    blocks = hessian_blocks(affine_lagrangian(2.0), affine_state(w2=2.0))
    assert np.allclose(blocks.g_ww, [[1.0, 0.0], [0.0, -0.25]])
    assert np.allclose(blocks.g_wv, [[2.0], [0.0]])
    assert np.allclose(blocks.g_vv, [[1.0]])
    assert np.allclose(blocks.matrix, [[1, 0, 2], [0, -0.25, 0], [2, 0, 1]])
    assert np.allclose(blocks.uu, [[1, 2, 0], [2, 1, 0], [0, 0, -0.25]])


def test_tilde_basis_hessian_printed_matrix():
    # affine example: entries in the basis {Etilde_1, Etilde_2, X}
    q, theta, phi, dphi = 2.0, 0.6, -1.3, 0.8
    rep = affine_group(closed_forms=False)
    g = affine_element(theta, phi)
    s = affine_state(w2=dphi * np.exp(-theta))
    T = tilde_basis_hessian(hessian_blocks(affine_lagrangian(q), s), adjoint_matrix(rep, rep.alg, g))
    printed = np.array([
        [1 - phi**2 / dphi**2, -phi / dphi**2, q],
        [-phi / dphi**2, -1 / dphi**2, 0.0],
        [q, 0.0, 1.0],
    ])
    assert np.allclose(T, printed, atol=1e-12)
    assert np.linalg.det(T) == pytest.approx((q * q - 1) / dphi**2, abs=1e-12)
    assert np.linalg.det(T[:2, :2]) == pytest.approx(-1 / dphi**2, abs=1e-12)
    assert np.allclose(np.linalg.inv(T[:2, :2]), [[1, -phi], [-phi, phi**2 - dphi**2]], atol=1e-12)


def test_mech_connection_affine():
    q, theta, phi = 2.0, 0.4, 1.7
    rep = affine_group()
    g = affine_element(theta, phi)
    mc = mech_connection_coeffs(hessian_blocks(affine_lagrangian(q), affine_state()))
    assert np.allclose(mc.b, [[-q], [0.0]])
    assert np.allclose(mc.tilde(adjoint_matrix(rep, rep.alg, g)), [[-q], [q * phi]])


def test_mech_connection_kaluza_klein_is_zero():
    # the chart is built from the mechanical connection, so b vanishes
    sys = get_scenario("kaluza-klein")
    s = ReducedState([1.0, 2.0, 3.0], [0.1, 0.2, 0.3], [2.0])
    assert np.allclose(mech_connection_coeffs(hessian_blocks(sys.lag, s)).b, 0.0)


def test_singular_hessian_detected():
    with pytest.raises(SingularHessianError) as info:
        hessian_blocks(affine_lagrangian(1.0), affine_state())
    assert info.value.block == "full"


def test_solve_checked_thresholds():
    x, c = solve_checked(np.diag([2.0, 4.0]), [2.0, 2.0])
    assert np.allclose(x, [1.0, 0.5]) and c == pytest.approx(2.0)
    with pytest.warns(RuntimeWarning, match="ill-conditioned"):
        solve_checked(np.diag([1.0, 1e-10]), [1.0, 1.0])
    with pytest.raises(SingularHessianError) as info:
        solve_checked(np.diag([1.0, 1e-16]), [1.0, 1.0], block="fiber")
    assert info.value.block == "fiber" and info.value.cond > 1e14
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        solve_checked(np.diag([1.0, 1e-7]), [1.0, 1.0])


def test_fiber_singular_connection():
    blocks = HessianBlocks(np.zeros((1, 1)), np.ones((1, 1)), np.ones((1, 1)))
    with pytest.raises(SingularHessianError):
        mech_connection_coeffs(blocks)
