import numpy as np
import pytest

from ddcrp.gibbs import run_gibbs
from ddcrp.models import PoissonGammaModel
from ddcrp.predictive import PredictiveTask, new_point_link_weights, predict_joint, predict_sequential
from ddcrp.prior import DdcrpPrior, DecaySpec
from ddcrp.proposals import BirthProposalConfig
from ddcrp.rjmcmc import LinkStrategy, RjChainState, RjConfig, rj_log_acceptance, rj_step, run_rjmcmc
from ddcrp.trace import ChainSettings, TraceStore

X = np.array([0.0, 0.4, 3.0])
Y = [2, 3, 9]


def _single_sample_trace(c, alpha, params=None):
    c = np.asarray([c])
    K = np.array([len(set(range(3)))]) if params is None else np.array([len(params)])
    return TraceStore(np.array([1]), K, np.array([alpha]), np.array([0.5]), np.zeros(1), c,
                      None if params is None else [np.asarray(params, float)], {"n": 3}, {})


def test_zero_decay_weights_force_new_cluster():
    p = DdcrpPrior.from_covariate(X, DecaySpec("window", 1.0, (1.0,)), 1.0)
    tr = _single_sample_trace([1, 1, 2], 1.0, [(2.5,), (9.0,)])
    task = PredictiveTask([[50.0, 50.0, 50.0]], draws_per_sample=200)
    out = predict_sequential(tr, Y, task, PoissonGammaModel(), p, np.random.default_rng(0))
    assert np.all(out.source == -1)


def test_tiny_alpha_single_cluster_uses_that_cluster():
    p = DdcrpPrior.from_covariate(X, DecaySpec(), 1.0)
    tr = _single_sample_trace([1, 2, 2], 1e-12, [(5.0,)])
    task = PredictiveTask([[1.0, 1.0, 1.0]], draws_per_sample=20_000)
    out = predict_sequential(tr, Y, task, PoissonGammaModel(), p, np.random.default_rng(1))
    assert np.all(out.source == 0)
    assert abs(out.values.mean() - 5.0) < 3 * np.sqrt(5.0 / 20_000)


def test_draw_count_and_tags():
    p = DdcrpPrior.from_covariate(X, DecaySpec(), 1.0)
    tr = run_rjmcmc(Y, p, PoissonGammaModel(), ChainSettings(60, 10), RjConfig(), np.random.default_rng(2))
    task = PredictiveTask([[0.2, 0.6, 2.8], [5.0, 5.0, 2.0]], draws_per_sample=3)
    out = predict_sequential(tr, Y, task, PoissonGammaModel(), p, np.random.default_rng(3))
    assert out.values.shape == (len(tr) * 3, 2) and out.sample.size == len(tr) * 3
    assert np.all((out.source >= -1) & (out.source < 3))
    assert out.metadata["rho_from_conditional"] is False


def test_collapsed_trace_draws_conditional_rates():
    p = DdcrpPrior.from_covariate(X, DecaySpec(), 1.0)
    tr = run_gibbs(Y, p, PoissonGammaModel(), ChainSettings(30), np.random.default_rng(4))
    out = predict_sequential(tr, Y, PredictiveTask([[0.1, 0.2, 3.0]]), PoissonGammaModel(), p,
                             np.random.default_rng(5))
    assert out.metadata["rho_from_conditional"] is True


def test_augmented_trace_refused():
    p = DdcrpPrior.from_covariate(X, DecaySpec(), 1.0)
    tr = _single_sample_trace([0, 1, 2], 1.0, [(1.0,), (2.0,), (3.0,)])
    tr.metadata["augmented"] = True
    with pytest.raises(ValueError, match="augmented"):
        predict_sequential(tr, Y, PredictiveTask([[1.0, 1.0, 1.0]]), PoissonGammaModel(), p,
                           np.random.default_rng(0))


def test_new_point_weights():
    w = new_point_link_weights([0.0, 2.0], 0.5, DecaySpec("exponential", 1.0))
    assert np.allclose(w, [1.0, np.exp(-2.0), 0.5])


def test_augmented_matrix_assembly():
    d = np.abs(X[:, None] - X[None, :])
    task = PredictiveTask([[1.0, 0.6, 2.0, 0.0, 0.3], [0.5, 0.1, 2.5, 0.3, 0.0]], mode="joint")
    full = task.augmented(d)
    assert full.shape == (5, 5) and np.allclose(full, full.T) and np.all(np.diag(full) == 0)
    with pytest.raises(ValueError):
        PredictiveTask([[1.0, 1.0, 1.0]], mode="joint").augmented(d)
    with pytest.raises(ValueError):
        PredictiveTask([[-1.0, 1.0, 1.0]])


def test_joint_collapsed_link_is_prior_categorical():
    # with nothing linking into the unobserved point it carries no likelihood, so every
    # prior-drawn target is accepted and its link follows the augmented prior exactly
    task = PredictiveTask([[0.3, 0.8, 2.5, 0.0]], mode="joint")
    full = task.augmented(np.abs(X[:, None] - X[None, :]))
    p_aug = DdcrpPrior(full, DecaySpec("exponential", 0.5), 1.0)
    cfg = RjConfig(birth=BirthProposalConfig("prior"))
    for c in ([1, 1, 2, 3], [1, 1, 2, 0], [0, 0, 2, 2]):
        st = RjChainState(Y + [0], p_aug, PoissonGammaModel(), c, rng=np.random.default_rng(0),
                          observed=[True, True, True, False])
        for j in range(4):
            if j != c[3]:
                link_ratio = p_aug.link_log_prob(3, c[3]) - p_aug.link_log_prob(3, j)
                prop = rj_log_acceptance(st, 3, j, link_ratio, cfg, np.random.default_rng(1))
                assert prop.log_r == pytest.approx(0.0, abs=1e-12)
    st = RjChainState(Y + [0], p_aug, PoissonGammaModel(), [1, 1, 2, 3], rng=np.random.default_rng(0),
                      observed=[True, True, True, False])
    rng = np.random.default_rng(2)
    counts = np.zeros(4)
    for _ in range(20_000):
        out = rj_step(st, 3, cfg, rng, LinkStrategy.PRIOR)
        assert out.accepted
        counts[st.links.c[3]] += 1
    expected = np.exp(p_aug.link_log_probs(3))
    freq = counts / counts.sum()
    assert np.all(np.abs(freq - expected) < 3 * np.sqrt(expected * (1 - expected) / counts.sum()))


def test_joint_m0_bit_identical():
    p = DdcrpPrior.from_covariate(X, DecaySpec(), 1.0)
    cfg = RjConfig(birth=BirthProposalConfig("lnmm", 0.5))
    settings = ChainSettings(300, 100)
    _, tr = predict_joint(Y, p.distances, PredictiveTask(np.empty((0, 3)), mode="joint"), PoissonGammaModel(), p,
                          settings, cfg, np.random.default_rng(7))
    ref = run_rjmcmc(Y, p, PoissonGammaModel(), settings, cfg, np.random.default_rng(7))
    assert np.array_equal(tr.assignments, ref.assignments) and np.array_equal(tr.log_post, ref.log_post)
