"""Posterior predictive draws at unobserved covariate locations.

Two schemes:

* sequential - reuse a fitted trace and treat the new points as arriving
  after all observed ones. They may link to observed points or to
  themselves, never to each other.
* joint imputation - run a fresh chain on the augmented distance matrix.
  Unobserved links are updated from the prior link distribution (their
  outcome is integrated out), and outcomes are drawn from their clusters
  after every iteration.

The ddCRP is not marginally invariant, so a trace fit on an augmented
matrix cannot be reused sequentially; that combination is refused.
"""

from dataclasses import dataclass
from enum import Enum
from typing import NamedTuple

import numpy as np

from .models import EMPTY_STATS, sum_stats
from .partition import partition_from_assignments
from .prior import DdcrpPrior
from .rjmcmc import run_rjmcmc

NEW_CLUSTER = -1


class PredictiveMode(str, Enum):
    SEQUENTIAL = "sequential"
    JOINT = "joint"


@dataclass(frozen=True)
class PredictiveTask:
    """``d_new`` holds the m rows ``[d(new_l, obs_1..n), d(new_l, new_1..m)]``.

    Rows of width n (no new-to-new block) are accepted in sequential mode.
    """

    d_new: np.ndarray
    mode: PredictiveMode = PredictiveMode.SEQUENTIAL
    draws_per_sample: int = 1

    def __post_init__(self):
        d = np.atleast_2d(np.asarray(self.d_new, dtype=float))
        if d.size and (not np.all(np.isfinite(d)) or np.any(d < 0)):
            raise ValueError("new-point distances must be finite and non-negative")
        if self.draws_per_sample < 1:
            raise ValueError("draws_per_sample must be at least 1")
        object.__setattr__(self, "d_new", d)
        object.__setattr__(self, "mode", PredictiveMode(self.mode))

    @property
    def m(self):
        return self.d_new.shape[0] if self.d_new.size else 0

    def augmented(self, distances):
        """Assemble the symmetric ``(n+m) x (n+m)`` matrix."""
        n, m = distances.shape[0], self.m
        if m == 0:
            return np.array(distances, dtype=float)
        if self.d_new.shape[1] != n + m:
            raise ValueError(f"joint prediction needs rows of width n+m = {n + m}")
        new_new = self.d_new[:, n:]
        if not np.allclose(new_new, new_new.T) or np.any(np.diag(new_new) != 0):
            raise ValueError("new-to-new distance block must be symmetric with zero diagonal")
        full = np.zeros((n + m, n + m))
        full[:n, :n] = distances
        full[n:, :] = self.d_new
        full[:n, n:] = self.d_new[:, :n].T
        return full


class PredictiveDraws(NamedTuple):
    values: np.ndarray    # (draws, m)
    # (draws, m) cluster of each draw, -1 for a new cluster. Sequential draws use
    # the canonical label of the source sample, joint draws the cluster's smallest member.
    source: np.ndarray
    sample: np.ndarray    # (draws,) index of the posterior sample used
    metadata: dict

    def summary(self, q=(0.025, 0.5, 0.975)):
        return {"mean": self.values.mean(axis=0).tolist(),
                "quantiles": {str(p): np.quantile(self.values, p, axis=0).tolist() for p in q}}


def new_point_link_weights(d_row, alpha, decay):
    """Unnormalised link weights of one new point: observed targets then self."""
    return np.append(decay(np.asarray(d_row, dtype=float)), alpha)


def predict_sequential(trace, y, task, model, prior, rng):
    """Predictive draws for the new points of ``task`` from a fitted ``trace``.

    ``prior`` supplies the observed distance matrix and decay form; the
    concentration and decay scale come from each stored sample. Traces
    without cluster parameters (collapsed Gibbs) get each linked cluster's
    parameter drawn from its conjugate conditional; this is recorded in the
    output metadata.
    """
    if trace.metadata.get("augmented"):
        raise ValueError("trace was fit on an augmented distance matrix; sequential reuse would be biased")
    n = prior.n
    if trace.n != n:
        raise ValueError("trace and prior disagree on the number of observations")
    d = task.d_new[:, :n]
    if d.shape[1] != n:
        raise ValueError(f"new-point distance rows need at least n = {n} columns")
    obs = model.observation_stats(model.validate(y))
    conditional = not trace.has_params
    if conditional and not hasattr(model, "conditional_sample"):
        raise ValueError(f"model {model.name!r} has no conjugate conditional for parameter-free traces")
    m, reps = task.m, task.draws_per_sample
    total = len(trace) * reps
    values = np.empty((total, m))
    source = np.empty((total, m), dtype=np.int64)
    sample = np.repeat(np.arange(len(trace)), reps)
    row = 0
    for t in range(len(trace)):
        part = partition_from_assignments(trace.assignments[t])
        decay = prior.decay.with_scale(float(trace.s[t]))
        stats = [sum_stats(obs, mem) for mem in part.members]
        weights = [new_point_link_weights(d[l], float(trace.alpha[t]), decay) for l in range(m)]
        for _ in range(reps):
            for l in range(m):
                w = weights[l]
                j = int(np.searchsorted(np.cumsum(w), rng.random() * w.sum(), side="right"))
                j = min(j, n)
                if j == n:
                    rho, st, k = model.prior_sample(rng), EMPTY_STATS, NEW_CLUSTER
                else:
                    k = int(part.labels[j])
                    st = stats[k]
                    rho = model.conditional_sample(st, rng) if conditional else trace.cluster_params[t][k]
                values[row, l] = model.predictive_sample(tuple(rho), st, rng)
                source[row, l] = k
            row += 1
    meta = {"mode": "sequential", "m": m, "draws_per_sample": reps, "rho_from_conditional": conditional}
    return PredictiveDraws(values, source, sample, meta)


def predict_joint(y, distances, task, model, prior, settings, config, rng, hyper=None, metadata=None):
    """Fit a chain on the augmented matrix and impute the new outcomes.

    Returns ``(PredictiveDraws, trace)``. With ``m = 0`` this is exactly a
    standard reversible-jump fit under the same generator.
    """
    y = np.asarray(y, dtype=float).ravel()
    n, m = y.size, task.m
    full = task.augmented(np.asarray(distances, dtype=float))
    if m == 0:
        aug_prior = prior
        observed = None
        meta = dict(metadata or {})
    else:
        aug_prior = DdcrpPrior(full, prior.decay, prior.alpha)
        observed = np.r_[np.ones(n, bool), np.zeros(m, bool)]
        meta = dict(metadata or {}, augmented=True, n_observed=n, m=m)
    # placeholders; unobserved points carry no likelihood
    y_aug = np.r_[y, np.zeros(m)] if m else y
    imputed = []

    def impute(state, it, gen):
        if m == 0:
            return
        row = np.empty(m)
        src = np.empty(m, dtype=np.int64)
        for l in range(m):
            k = state.links.label[n + l]
            row[l] = model.predictive_sample(state.params[k], state.stats[k], gen)
            src[l] = min(state.links.members[k])
        imputed.append((it, row, src))

    trace = run_rjmcmc(y_aug, aug_prior, model, settings, config, rng, hyper=hyper, metadata=meta,
                       observed=observed, on_iteration=impute)
    kept = {it for it in trace.iterations.tolist()}
    rows = [(r, s) for it, r, s in imputed if it in kept]
    values = np.array([r for r, _ in rows]).reshape(len(rows), m)
    source = np.array([s for _, s in rows], dtype=np.int64).reshape(len(rows), m)
    out = PredictiveDraws(values, source, np.arange(len(rows)), {"mode": "joint", "m": m})
    return out, trace
