import numpy as np
import pytest

from ddcrp.models import PoissonGammaModel
from ddcrp.prior import DdcrpPrior, DecaySpec
from ddcrp.proposals import BirthProposalConfig
from ddcrp.rjmcmc import RjConfig, run_rjmcmc
from ddcrp.gibbs import run_gibbs
from ddcrp.trace import ChainSettings, TraceStore, is_recorded


def _fit(kind, tmp_path):
    x = np.array([0.0, 0.3, 1.0, 4.0, 4.2, 5.0])
    y = [1, 2, 1, 9, 8, 10]
    p = DdcrpPrior.from_covariate(x, DecaySpec(), 1.0)
    rng = np.random.default_rng(0)
    if kind == "gibbs":
        return run_gibbs(y, p, PoissonGammaModel(), ChainSettings(300, 100, 2), rng, metadata={"seed": 0})
    return run_rjmcmc(y, p, PoissonGammaModel(), ChainSettings(300, 100, 2),
                      RjConfig(birth=BirthProposalConfig("nmm", 1.0)), rng, metadata={"seed": 0})


@pytest.mark.parametrize("kind", ["gibbs", "rjmcmc"])
def test_round_trip(kind, tmp_path):
    tr = _fit(kind, tmp_path)
    tr.write(tmp_path / "t")
    back = TraceStore.read(tmp_path / "t")
    for name in ("iterations", "K", "alpha", "s", "log_post", "assignments"):
        assert np.array_equal(getattr(tr, name), getattr(back, name)), name
    assert back.metadata == tr.metadata and back.moves == {k: list(v) for k, v in tr.moves.items()}
    assert (tmp_path / "t" / "params.csv").exists() == (kind == "rjmcmc")
    if kind == "rjmcmc":
        assert all(np.array_equal(np.asarray(a), b) for a, b in zip(tr.cluster_params, back.cluster_params))
        assert all(len(p) == k for p, k in zip(back.cluster_params, back.K))


def test_rle_compresses_repeats(tmp_path):
    a = np.array([[0, 0], [0, 0], [1, 1], [0, 0]])
    tr = TraceStore(np.arange(1, 5), np.array([1, 1, 1, 1]), np.ones(4), np.ones(4), np.zeros(4), a)
    tr.write(tmp_path)
    assert (tmp_path / "assignments.rle").read_text().splitlines() == ["2 0 0", "1 1 1", "1 0 0"]
    assert np.array_equal(TraceStore.read(tmp_path).assignments, a)


def test_iterations_strictly_increase(tmp_path):
    tr = _fit("gibbs", tmp_path)
    assert np.all(np.diff(tr.iterations) > 0)
    assert tr.iterations[0] == 102 and len(tr) == 100


def test_recording_rule():
    kept = [it for it in range(1, 11) if is_recorded(it, 4, 3)]
    assert kept == [7, 10]
    assert ChainSettings(10, 4, 3).kept == 2
    with pytest.raises(ValueError):
        ChainSettings(10, 10)
