import numpy as np
import pytest

from lpr import bundle
from lpr.acceptance import check_structure
from lpr.bundle import (
    BundleChart,
    curvature,
    curvature_bracket_oracle,
    fd_connection_derivative,
    trivial_chart,
    upsilon,
    upsilon_bracket_oracle,
)
from lpr.errors import DimensionError
from lpr.lie_core import group_exp, so3_group
from lpr.scenarios import demo_dgamma, demo_gamma, get_scenario

CURVED = ("kaluza-klein", "wong-demo")


def test_trivial_chart_is_flat():
    sys = get_scenario("affine")
    assert not np.any(curvature(sys.chart, sys.alg, np.array([0.3])))
    assert not np.any(upsilon(sys.chart, sys.alg, np.array([0.3])))


def test_uniform_field_curvature_is_minus_B():
    sys = get_scenario("kaluza-klein", B=1.7)
    K = curvature(sys.chart, sys.alg, np.array([0.4, -2.0, 1.0]))
    expected = np.zeros((1, 3, 3))
    expected[0, 0, 1], expected[0, 1, 0] = -1.7, 1.7
    assert np.allclose(K, expected, atol=1e-15)


@pytest.mark.parametrize("name", CURVED)
def test_curvature_antisymmetric(name):
    sys = get_scenario(name)
    rng = np.random.default_rng(1)
    for _ in range(20):
        K = curvature(sys.chart, sys.alg, rng.normal(size=sys.lag.base_dim))
        assert np.allclose(K, -K.transpose(0, 2, 1), atol=0)


@pytest.mark.parametrize("name", CURVED)
def test_curvature_matches_bracket_oracle(name):
    sys = get_scenario(name)
    rng = np.random.default_rng(2)
    for _ in range(25):
        x = rng.normal(size=sys.lag.base_dim)
        g = group_exp(sys.rep, rng.normal(size=sys.alg.dim))
        oracle = curvature_bracket_oracle(sys.chart, sys.rep, x, g)
        assert np.max(np.abs(curvature(sys.chart, sys.alg, x) - oracle)) <= 1e-5


def test_bracket_oracle_independent_of_group_point():
    # curvature is invariant: the bracket of the invariant fields does not depend on g
    sys = get_scenario("wong-demo")
    x = np.array([0.3, -0.8])
    K0 = curvature_bracket_oracle(sys.chart, sys.rep, x)
    Kg = curvature_bracket_oracle(sys.chart, sys.rep, x, group_exp(sys.rep, [1.0, 0.5, -2.0]))
    assert np.allclose(K0, Kg, atol=1e-7)


@pytest.mark.parametrize("name", CURVED)
def test_upsilon_matches_bracket_oracle(name):
    sys = get_scenario(name)
    rng = np.random.default_rng(4)
    for _ in range(10):
        x = rng.normal(size=sys.lag.base_dim)
        g = group_exp(sys.rep, rng.normal(size=sys.alg.dim))
        oracle = upsilon_bracket_oracle(sys.chart, sys.rep, x, g)
        assert np.max(np.abs(upsilon(sys.chart, sys.alg, x) - oracle)) <= 1e-6


def test_upsilon_vanishes_for_abelian_fiber():
    sys = get_scenario("kaluza-klein")
    assert not np.any(upsilon(sys.chart, sys.alg, np.ones(3)))


def test_fd_connection_derivative_matches_analytic():
    chart = BundleChart(2, 3, demo_gamma, demo_dgamma)
    rng = np.random.default_rng(5)
    for _ in range(20):
        x = rng.normal(size=2)
        assert np.allclose(fd_connection_derivative(chart, x), demo_dgamma(x), atol=1e-8)


def test_curvature_without_derivative_uses_fd():
    sys = get_scenario("wong-demo")
    x = np.array([0.7, -0.2])
    K_fd = curvature(sys.chart.without_derivative(), sys.alg, x)
    assert np.allclose(K_fd, curvature(sys.chart, sys.alg, x), atol=1e-8)


def test_chart_dimension_checks():
    chart = trivial_chart(2, 1)
    with pytest.raises(DimensionError):
        chart.coefficients(np.zeros(3))


def test_sign_flip_mutation_is_caught():
    def flipped(chart, alg, x):
        return -bundle.curvature(chart, alg, x)

    results = [r for r in check_structure(curvature_fn=flipped) if "curvature" in r.name]
    by_name = {r.name.split(":")[0]: r.passed for r in results}
    assert by_name == {"affine": True, "kaluza-klein": False, "wong-demo": False}


def test_transposed_structure_constants_mutation_is_caught():
    # the quadratic term is what distinguishes the non-Abelian formula
    def wrong_order(chart, alg, x):
        G = chart.coefficients(x)
        D = chart.derivative(x)
        return D - D.transpose(0, 2, 1) - np.einsum("abc,bi,cj->aij", alg.structure_constants, G, G)

    sys = get_scenario("wong-demo")
    x = np.array([0.5, 1.0])
    oracle = curvature_bracket_oracle(sys.chart, so3_group(), x)
    assert np.max(np.abs(wrong_order(sys.chart, sys.alg, x) - oracle)) > 1e-2
