import math

import numpy as np
import pytest

from ddcrp.models import (GammaMarginalShapeModel, PoissonGammaModel, gamma_marginal_shape_log_lik,
                          moment_estimate_gamma_shape, moment_estimate_poisson,
                          poisson_cluster_log_lik, poisson_marginal_cluster_log_lik)

from oracles import gamma_shape_log_lik_quad, poisson_gamma_log_marginal, poisson_gamma_log_marginal_quad


def test_poisson_marginal_single_zero():
    assert poisson_marginal_cluster_log_lik([0], 1.0, 1.0) == pytest.approx(-math.log(2))


def test_poisson_marginal_matches_formula_oracle():
    y = [3, 0, 7, 2]
    assert poisson_marginal_cluster_log_lik(y, 2.0, 0.3) == pytest.approx(poisson_gamma_log_marginal(y, 2.0, 0.3))


@pytest.mark.parametrize("y,lam,expected", [([0], 1.0, -1.0), ([1], 1.0, -1.0),
                                            ([2, 3], 4.0, 5 * math.log(4) - 8 - math.log(2) - math.log(6))])
def test_poisson_explicit_likelihood(y, lam, expected):
    assert poisson_cluster_log_lik(y, lam) == pytest.approx(expected, abs=1e-12)


def test_poisson_explicit_rejects_bad_rate():
    with pytest.raises(ValueError):
        poisson_cluster_log_lik([1], 0.0)


def test_gamma_shape_examples():
    assert math.exp(gamma_marginal_shape_log_lik([1.0], 1.0, 1.0, 1.0)) == pytest.approx(0.25, rel=1e-12)
    assert math.exp(gamma_marginal_shape_log_lik([2.0], 2.0, 2.0, 1.0)) == pytest.approx(2 * 6 / 81, rel=1e-12)
    assert gamma_marginal_shape_log_lik([1.0], 1.0, 1.0, 1.0) == pytest.approx(
        gamma_shape_log_lik_quad([1.0], 1.0, 1.0, 1.0), rel=1e-8)


def test_gamma_shape_rejects_bad_input():
    with pytest.raises(ValueError):
        gamma_marginal_shape_log_lik([1.0, -1.0], 1.0, 1.0, 1.0)
    with pytest.raises(ValueError):
        gamma_marginal_shape_log_lik([1.0], 0.0, 1.0, 1.0)
    with pytest.raises(ValueError):
        PoissonGammaModel().validate([1.5])


def test_empty_cluster_likelihood_is_zero():
    assert PoissonGammaModel().log_lik_stats((0.0, 0.0, 0.0, 0.0), (3.0,)) == 0.0
    assert PoissonGammaModel().marginal_stats((0.0, 0.0, 0.0, 0.0)) == 0.0
    assert GammaMarginalShapeModel().log_lik_stats((0.0, 0.0, 0.0, 0.0), (3.0,)) == 0.0


def test_moment_estimates():
    assert moment_estimate_gamma_shape([1.0, 3.0]) == pytest.approx((2.0,))
    y = np.array([2.0, 4.0, 3.0, 3.0, 2.0, 4.0])
    assert y.mean() ** 2 / y.var(ddof=1) == pytest.approx(moment_estimate_gamma_shape(y)[0])
    assert moment_estimate_gamma_shape([2.0, 2.0]) is None
    assert moment_estimate_gamma_shape([2.0]) is None
    assert moment_estimate_poisson([1, 3]) == pytest.approx((2.0,))
    assert moment_estimate_poisson([0, 0]) is None
    assert moment_estimate_poisson([4]) is None


def test_stats_are_additive():
    m = PoissonGammaModel()
    a, b = m.stats_of([1, 2]), m.stats_of([5])
    whole = m.stats_of([1, 2, 5])
    assert np.allclose([x + y for x, y in zip(a, b)], whole)


def test_conjugacy_flag():
    assert PoissonGammaModel().conjugate
    assert not GammaMarginalShapeModel().conjugate


def test_quadrature_cross_check_small():
    rng = np.random.default_rng(0)
    for _ in range(5):
        y = rng.poisson(4, size=rng.integers(1, 6))
        assert poisson_marginal_cluster_log_lik(y, 1.0, 0.1) == pytest.approx(
            poisson_gamma_log_marginal_quad(y, 1.0, 0.1), rel=1e-6)
