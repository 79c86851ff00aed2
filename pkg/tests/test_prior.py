import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ddcrp.prior import DdcrpPrior, DecaySpec, distances_from_covariate, n_self_links, validate_distances

from oracles import decay_matrix, link_log_prior


def _prior(n, form="exponential", s=0.5, alpha=1.0, seed=0):
    x = np.random.default_rng(seed).normal(size=n) * 3
    return DdcrpPrior.from_covariate(x, DecaySpec(form, s), alpha)


def test_two_point_identity_is_symmetric():
    p = _prior(2, "identity")
    assert np.allclose(np.exp(p.link_log_probs(0)), [0.5, 0.5])


def test_two_point_exponential_substitution():
    d = np.array([[0.0, 1.0], [1.0, 0.0]])
    p = DdcrpPrior(d, DecaySpec("exponential", math.log(2)), 2.0)
    assert p.row_weights[0] == pytest.approx(0.5)
    assert math.exp(p.link_log_prob(0, 0)) == pytest.approx(0.8)


@given(st.integers(1, 12), st.floats(0.01, 5), st.floats(0.01, 10), st.integers(0, 10 ** 6))
def test_link_probabilities_normalise(n, s, alpha, seed):
    p = _prior(n, s=s, alpha=alpha, seed=seed)
    for i in range(n):
        assert abs(np.exp(p.link_log_probs(i)).sum() - 1) < 1e-12


def test_window_decay_gives_zero_probability_links():
    p = DdcrpPrior.from_covariate([0.0, 0.5, 3.0], DecaySpec("window", 1.0, (1.0,)), 1.0)
    assert p.link_log_prob(0, 2) == -math.inf
    assert p.assignment_log_prior([2, 1, 2]) == -math.inf


def test_single_point_prior_is_zero():
    assert DdcrpPrior(np.zeros((1, 1)), DecaySpec("identity"), 3.0).assignment_log_prior([0]) == 0.0


def test_identity_prior_is_uniform():
    p = _prior(3, "identity")
    for c in ([0, 1, 2], [1, 2, 0], [2, 2, 2]):
        assert p.assignment_log_prior(c) == pytest.approx(-3 * math.log(3))


@settings(max_examples=200)
@given(st.integers(1, 10), st.data())
def test_assignment_prior_is_sum_of_link_terms(n, data):
    seed = data.draw(st.integers(0, 10 ** 6))
    alpha = data.draw(st.floats(0.05, 20))
    c = data.draw(st.lists(st.integers(0, n - 1), min_size=n, max_size=n))
    p = _prior(n, alpha=alpha, seed=seed)
    assert p.assignment_log_prior(c) == pytest.approx(sum(p.link_log_prob(i, j) for i, j in enumerate(c)),
                                                      abs=1e-12)
    f = decay_matrix(p.distances, "exponential", 0.5)
    assert p.assignment_log_prior(c) == pytest.approx(link_log_prior(c, f, alpha), abs=1e-10)


def test_identity_prior_permutation_invariant():
    p = _prior(5, "identity", alpha=0.7)
    c = np.array([1, 1, 4, 2, 4])
    perm = np.array([3, 0, 4, 1, 2])
    inv = np.argsort(perm)
    c_perm = inv[c[perm]]
    assert p.assignment_log_prior(c) == pytest.approx(p.assignment_log_prior(c_perm))


def test_alpha_derivative_identity():
    p = _prior(6, alpha=1.3)
    c = [0, 0, 2, 2, 3, 5]
    h = 1e-6
    fd = (p.with_alpha(1.3 + h).assignment_log_prior(c) - p.with_alpha(1.3 - h).assignment_log_prior(c)) / (2 * h)
    exact = n_self_links(c) / 1.3 - np.sum(1 / (1.3 + p.row_weights))
    assert fd == pytest.approx(exact, rel=1e-6)


def test_huge_alpha_gives_all_self_links():
    p = _prior(6, alpha=1e12)
    rng = np.random.default_rng(1)
    assert all(n_self_links(p.sample_assignments(rng)) == 6 for _ in range(100))


def test_identity_sampling_is_uniform():
    p = _prior(3, "identity")
    rng = np.random.default_rng(2)
    draws = np.array([p.sample_link(0, rng) for _ in range(100_000)])
    freq = np.bincount(draws, minlength=3) / draws.size
    sd = math.sqrt(1 / 3 * 2 / 3 / draws.size)
    assert np.all(np.abs(freq - 1 / 3) < 3 * sd)


def test_expected_self_links():
    p = _prior(8, s=0.8, alpha=0.9, seed=3)
    rng = np.random.default_rng(4)
    counts = np.array([n_self_links(p.sample_assignments(rng)) for _ in range(20_000)])
    q = p.alpha / (p.alpha + p.row_weights)
    mean, var = q.sum(), (q * (1 - q)).sum()
    assert abs(counts.mean() - mean) < 3 * math.sqrt(var / counts.size)


def test_sampling_is_reproducible():
    p = _prior(10)
    a = p.sample_assignments(np.random.default_rng(7))
    b = p.sample_assignments(np.random.default_rng(7))
    assert np.array_equal(a, b)


def test_with_scale_rebuilds_row_weights_without_touching_original():
    p = _prior(5, s=0.5)
    before = p.row_weights.copy()
    q = p.with_scale(2.0)
    assert np.array_equal(p.row_weights, before)
    assert np.allclose(q.row_weights, p.row_weights_at(2.0))


@pytest.mark.parametrize("d", [np.array([[0, 1], [2, 0]]), np.array([[1, 0], [0, 0]]),
                               np.array([[0, -1], [-1, 0]]), np.array([[0, np.nan], [np.nan, 0]]),
                               np.zeros((2, 3))])
def test_invalid_distances_rejected(d):
    with pytest.raises(ValueError):
        validate_distances(d)


def test_invalid_decay_and_alpha_rejected():
    with pytest.raises(ValueError):
        DecaySpec("exponential", 0.0)
    with pytest.raises(ValueError):
        DecaySpec("window", 1.0)
    with pytest.raises(ValueError):
        DdcrpPrior(distances_from_covariate([0, 1]), DecaySpec(), 0.0)
