import math

import numpy as np
import pytest
from scipy import integrate, stats

from ddcrp.diagnostics import ess
from ddcrp.hyper import HyperConfig
from ddcrp.models import GammaMarginalShapeModel, PoissonGammaModel
from ddcrp.partition import MoveClass
from ddcrp.prior import DdcrpPrior, DecaySpec
from ddcrp.proposals import BirthProposalConfig, ResampleConfig
from ddcrp.rjmcmc import (LinkStrategy, RjChainState, RjConfig, _commit, propose_link, rj_log_acceptance,
                          rj_step, run_rjmcmc, update_cluster_params_mh)
from ddcrp.trace import ChainSettings

from oracles import empirical_tv, enumerate_posterior, gamma_shape_log_lik_quad

X = np.array([0.0, 0.5, 1.0, 4.0, 4.5])
Y = [3, 5, 8, 30, 34]


def _state(c=(1, 2, 2, 4, 4), seed=0, model=None):
    p = DdcrpPrior.from_covariate(X, DecaySpec("exponential", 0.5), 1.0)
    return RjChainState(Y, p, model or PoissonGammaModel(1.0, 0.1), list(c), rng=np.random.default_rng(seed))


def test_uniform_link_proposal_is_uniform():
    st = _state()
    rng = np.random.default_rng(1)
    draws = np.array([propose_link(st, 0, LinkStrategy.UNIFORM, rng)[0] for _ in range(100_000)])
    freq = np.bincount(draws, minlength=5) / draws.size
    assert np.all(np.abs(freq - 0.2) < 3 * math.sqrt(0.2 * 0.8 / draws.size))


def test_prior_link_ratio_identity():
    st = _state()
    rng = np.random.default_rng(2)
    for i in range(5):
        for _ in range(20):
            j, lr = propose_link(st, i, LinkStrategy.PRIOR, rng)
            p = st.prior
            assert math.exp(-lr) * math.exp(p.link_log_prob(i, st.links.c[i]) - p.link_log_prob(i, j)) == \
                pytest.approx(1.0)
            if j == st.links.c[i]:
                assert lr == 0.0


def test_fixed_same_identity_proposal_accepts():
    st = _state()
    rng = np.random.default_rng(0)
    before = st.snapshot()
    prop = rj_log_acceptance(st, 0, 1, 0.0, RjConfig(), rng)
    assert prop.move.kind is MoveClass.FIXED_SAME and prop.log_r == 0.0
    assert st.snapshot() == before


@pytest.mark.parametrize("family,sigma", [("prior", 0.5), ("nmm", 0.7), ("lnmm", 0.4), ("igmm", 0.5)])
def test_birth_and_matching_death_are_exact_negatives(family, sigma):
    cfg = RjConfig(birth=BirthProposalConfig(family, sigma))
    st = _state(c=(1, 2, 2, 4, 4))
    rng = np.random.default_rng(3)
    # birth: split {0, 1} off {0, 1, 2} by making 1 a self-link
    birth = rj_log_acceptance(st, 1, 1, 0.0, cfg, rng)
    assert birth.move.kind is MoveClass.BIRTH
    _commit(st, 1, 1, birth)
    death = rj_log_acceptance(st, 1, 2, 0.0, cfg, rng)
    assert death.move.kind is MoveClass.DEATH
    assert death.log_r == pytest.approx(-birth.log_r, abs=1e-10)


def test_rejection_leaves_state_identical_and_birth_adds_one_cluster():
    st = _state(seed=4)
    cfg = RjConfig(birth=BirthProposalConfig("lnmm", 0.3))
    rng = np.random.default_rng(5)
    seen_reject = seen_birth = False
    for _ in range(3000):
        i = int(rng.integers(5))
        before = st.snapshot()
        k0, keys0 = st.K, set(st.params)
        out = rj_step(st, i, cfg, rng)
        if not out.accepted:
            assert st.snapshot() == before
            seen_reject = True
        elif out.move_class == MoveClass.BIRTH.value:
            assert st.K == k0 + 1 and len(st.params) == len(keys0) + 1
            seen_birth = True
        assert set(st.params) == set(st.links.members)
    assert seen_reject and seen_birth


def test_birth_death_conservation_and_drift():
    p = DdcrpPrior.from_covariate(X, DecaySpec("exponential", 0.5), 1.0)
    drift, ks = [], []

    def check(state, it, gen):
        drift.append(abs(state.log_post - state.recompute_log_post()))
        ks.append(state.K)

    cfg = RjConfig(birth=BirthProposalConfig("nmm", 1.0), resample=ResampleConfig(True, "nmm", 1.0))
    tr = run_rjmcmc(Y, p, PoissonGammaModel(1.0, 0.1), ChainSettings(3000), cfg, np.random.default_rng(6),
                    HyperConfig(infer_alpha=True), on_iteration=check)
    assert max(drift) < 1e-8
    births, deaths = tr.moves["birth"][1], tr.moves["death"][1]
    assert births - deaths == ks[-1] - 5  # chain starts from all self-links


def test_zero_step_param_update_keeps_state():
    st = _state()
    before = st.snapshot()
    for k in list(st.params):
        proposed, accepted = update_cluster_params_mh(st, k, 0.0, np.random.default_rng(7))
        assert proposed == accepted == 1
    assert st.snapshot() == before


def test_single_cluster_shape_posterior_mean():
    y = np.array([1.8, 2.2, 3.1, 2.5, 1.6, 2.9, 2.0, 2.4])
    model = GammaMarginalShapeModel(2.0, 0.5, 2.0, 0.5)
    p = DdcrpPrior.from_covariate(np.zeros(8), DecaySpec(), 1.0)
    st = RjChainState(y, p, model, [1, 2, 3, 4, 5, 6, 7, 7], params={0: (5.0,)})
    rng = np.random.default_rng(8)
    draws = []
    for _ in range(60_000):
        update_cluster_params_mh(st, 0, 0.6, rng)
        assert st.params[0][0] > 0
        draws.append(st.params[0][0])
    draws = np.asarray(draws[1000:])

    def logpost(a):
        return gamma_shape_log_lik_quad(y, a, 2.0, 0.5) + stats.gamma.logpdf(a, 2.0, scale=2.0)

    grid = np.linspace(0.05, 60, 300)
    lp = np.array([logpost(a) for a in grid])
    w = np.exp(lp - lp.max())
    mean = integrate.trapezoid(w * grid, grid) / integrate.trapezoid(w, grid)
    se = draws.std() / math.sqrt(ess(draws))
    assert abs(draws.mean() - mean) < 2 * se


def test_determinism():
    p = DdcrpPrior.from_covariate(X, DecaySpec("exponential", 0.5), 1.0)
    cfg = RjConfig(birth=BirthProposalConfig("lnmm", 0.5))
    a = run_rjmcmc(Y, p, PoissonGammaModel(), ChainSettings(200, 50), cfg, np.random.default_rng(9))
    b = run_rjmcmc(Y, p, PoissonGammaModel(), ChainSettings(200, 50), cfg, np.random.default_rng(9))
    assert np.array_equal(a.assignments, b.assignments) and np.array_equal(a.log_post, b.log_post)
    assert all(np.array_equal(u, v) for u, v in zip(a.cluster_params, b.cluster_params))


@pytest.mark.parametrize("strategy", ["uniform", "prior"])
def test_short_enumeration_check(strategy):
    x = np.array([0.0, 0.7, 2.0, 2.4])
    y = [1, 2, 9, 11]
    p = DdcrpPrior.from_covariate(x, DecaySpec("exponential", 0.5), 1.0)
    exact = enumerate_posterior(y, p.distances, "exponential", 0.5, 1.0, 1.0, 0.1)
    cfg = RjConfig(link=strategy, birth=BirthProposalConfig("nmm", 1.0), param_step=0.5)
    tr = run_rjmcmc(y, p, PoissonGammaModel(1.0, 0.1), ChainSettings(40_500, 500), cfg,
                    np.random.default_rng(10))
    assert empirical_tv(tr.assignments, exact) < 0.03
