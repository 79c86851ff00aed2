"""Reversible-jump sampler for cluster models without a usable marginal likelihood.

Cluster parameters stay in the state. Every link update is classified by the
change it makes to the partition:

* birth - the moving set splits off and gets freshly proposed parameters;
  the remaining set keeps the old cluster's parameters
* death - the moving set (a whole cluster) merges into another cluster,
  which keeps its parameters; the destroyed parameters are the reverse
  auxiliaries
* fixed transfer - the moving set changes cluster; parameters are kept or
  resampled from moment-matched proposals
* fixed same - the partition does not change

The move type is implied entirely by the proposed link, so the only
proposal-kind ratio is the link proposal ratio.
"""

from dataclasses import dataclass, field
from enum import Enum
import math
from typing import NamedTuple

import numpy as np

from .hyper import HyperConfig, update_hyperparameters
from .models import EMPTY_STATS, add_stats, sub_stats, sum_stats
from .partition import LinkGraph, MoveClass
from .proposals import (BirthProposalConfig, ResampleConfig, birth_density_stats, birth_draw_stats,
                        resample_density_stats, resample_draw_stats)
from .trace import ChainSettings, TraceRecorder, initial_links, is_recorded, scan_order

PARAM_MH = "param_mh"


class LinkStrategy(str, Enum):
    UNIFORM = "uniform"
    PRIOR = "prior"


@dataclass(frozen=True)
class RjConfig:
    link: LinkStrategy = LinkStrategy.PRIOR
    birth: BirthProposalConfig = field(default_factory=BirthProposalConfig)
    resample: ResampleConfig = field(default_factory=ResampleConfig)
    param_step: float = 0.3
    # Test hook: dropping the log-Jacobian makes the sampler target the wrong
    # distribution, which the enumeration oracle must detect.
    include_jacobian: bool = True

    def __post_init__(self):
        object.__setattr__(self, "link", LinkStrategy(self.link))
        if self.param_step < 0:
            raise ValueError("param_step must be non-negative")


class MoveOutcome(NamedTuple):
    move_class: str
    accepted: bool
    log_r: float


class RjChainState:
    def __init__(self, y, prior, model, c=None, params=None, rng=None, observed=None):
        self.model = model
        self.prior = prior
        n = prior.n
        y = np.asarray(y, dtype=float).ravel()
        if y.size != n:
            raise ValueError("observation count does not match the distance matrix")
        self.observed = np.ones(n, bool) if observed is None else np.asarray(observed, bool)
        self.y = y
        it = iter(model.observation_stats(model.validate(y[self.observed])))
        self.obs = [next(it) if o else EMPTY_STATS for o in self.observed]
        self.links = LinkGraph(np.arange(n) if c is None else c)
        self.stats = {k: sum_stats(self.obs, m) for k, m in self.links.members.items()}
        if params is None:
            rng = rng if rng is not None else np.random.default_rng(0)
            params = {k: tuple(model.prior_sample(rng)) for k in self.links.members}
        if set(params) != set(self.links.members):
            raise ValueError("need exactly one parameter block per cluster")
        self.params = {k: tuple(float(v) for v in p) for k, p in params.items()}
        self.clp = {k: self.cluster_term(self.stats[k], self.params[k]) for k in self.links.members}
        self.log_prior = prior.assignment_log_prior(self.links.c)
        self.log_post = self.log_prior + sum(self.clp.values())
        if not math.isfinite(self.log_post):
            raise ValueError("initial state has zero posterior density")

    def cluster_term(self, stats, rho):
        lp = self.model.prior_log_density(rho)
        if lp == -math.inf:
            return lp
        return self.model.log_lik_stats(stats, rho) + lp

    @property
    def K(self):
        return self.links.K

    def recompute_log_post(self):
        total = self.prior.assignment_log_prior(self.links.c)
        for k, m in self.links.members.items():
            total += self.cluster_term(sum_stats(self.obs, m), self.params[k])
        return total

    def set_prior(self, prior):
        self.prior = prior
        self.log_prior = prior.assignment_log_prior(self.links.c)
        self.log_post = self.log_prior + sum(self.clp.values())

    def canonical_params(self):
        """Cluster parameters ordered by each cluster's smallest member."""
        order = sorted(self.links.members, key=lambda k: min(self.links.members[k]))
        return [self.params[k] for k in order]

    def snapshot(self):
        return (tuple(self.links.c), tuple(sorted(self.params.items())),
                tuple(sorted(self.stats.items())), self.log_post, self.prior.alpha)


def propose_link(state, i, strategy, rng):
    """Returns ``(c_star, log r(M'->M) - log r(M->M'))``."""
    prior = state.prior
    if strategy is LinkStrategy.UNIFORM:
        return min(int(rng.random() * prior.n), prior.n - 1), 0.0
    j = prior.sample_link(i, rng)
    return j, prior.link_log_prob(i, state.links.c[i]) - prior.link_log_prob(i, j)


class _Proposal(NamedTuple):
    move: object
    log_r: float
    updates: dict  # slot -> (stats, params, cluster term); slot -1 is the newborn
    removed: int


def rj_log_acceptance(state, i, c_star, link_log_ratio, config, rng, move=None):
    """Build the parameter action for ``c[i] -> c_star`` and its log acceptance ratio.

    Returns a :class:`_Proposal`. ``rng`` is only used for parameter draws.
    """
    links, model = state.links, state.model
    c_old = links.c[i]
    if move is None:
        move = links.decompose(i, c_star)
    base = state.prior.link_log_prob(i, c_star) - state.prior.link_log_prob(i, c_old) + link_log_ratio
    kind, origin = move.kind, move.origin
    if kind is MoveClass.FIXED_SAME:
        return _Proposal(move, base, {}, -1)

    if kind is MoveClass.DEATH:
        t = move.target
        st_m, rho_m = state.stats[origin], state.params[origin]
        st_t = add_stats(state.stats[t], st_m)
        new_t = state.cluster_term(st_t, state.params[t])
        log_q, log_jac = birth_density_stats(model, st_m, config.birth, rho_m)
        log_r = base + new_t - state.clp[t] - state.clp[origin] + log_q
        if config.include_jacobian:
            log_r -= log_jac
        return _Proposal(move, log_r, {t: (st_t, state.params[t], new_t)}, origin)

    st_m = sum_stats(state.obs, move.moving)
    st_r = sub_stats(state.stats[origin], st_m)
    if kind is MoveClass.BIRTH:
        draw = birth_draw_stats(model, st_m, config.birth, rng)
        new_m = state.cluster_term(st_m, draw.rho)
        new_r = state.cluster_term(st_r, state.params[origin])
        log_r = base + new_m + new_r - state.clp[origin] - draw.log_q
        if config.include_jacobian:
            log_r += draw.log_jac
        updates = {origin: (st_r, state.params[origin], new_r), -1: (st_m, draw.rho, new_m)}
        return _Proposal(move, log_r, updates, -1)

    t = move.target
    st_t = add_stats(state.stats[t], st_m)
    if config.resample.enabled:
        rho_r, rho_t, lq_fwd = resample_draw_stats(model, st_r, st_t, config.resample, rng)
        lq_rev = resample_density_stats(model, state.stats[origin], state.stats[t],
                                        state.params[origin], state.params[t], config.resample)
        hastings = lq_rev - lq_fwd
    else:
        rho_r, rho_t, hastings = state.params[origin], state.params[t], 0.0
    new_r = state.cluster_term(st_r, rho_r)
    new_t = state.cluster_term(st_t, rho_t)
    log_r = base + new_r + new_t - state.clp[origin] - state.clp[t] + hastings
    return _Proposal(move, log_r, {origin: (st_r, rho_r, new_r), t: (st_t, rho_t, new_t)}, -1)


def _commit(state, i, c_star, prop):
    links = state.links
    d_prior = state.prior.link_log_prob(i, c_star) - state.prior.link_log_prob(i, links.c[i])
    slot = links.relink(i, c_star, prop.move)
    delta = d_prior
    if prop.removed >= 0:
        k = prop.removed
        delta -= state.clp.pop(k)
        del state.stats[k], state.params[k]
    for k, (st, rho, term) in prop.updates.items():
        if k == -1:
            k = slot
        else:
            delta -= state.clp[k]
        state.stats[k], state.params[k], state.clp[k] = st, rho, term
        delta += term
    state.log_prior += d_prior
    state.log_post += delta


def rj_step(state, i, config, rng, strategy=None):
    """One reversible-jump update of link ``i``; returns a :class:`MoveOutcome`."""
    c_star, link_lr = propose_link(state, i, strategy or config.link, rng)
    if c_star == state.links.c[i]:
        rng.random()
        return MoveOutcome(MoveClass.FIXED_SAME.value, True, 0.0)
    prop = rj_log_acceptance(state, i, c_star, link_lr, config, rng)
    log_u = math.log(rng.random() or 1e-300)
    accepted = prop.log_r >= log_u
    if accepted:
        _commit(state, i, c_star, prop)
    return MoveOutcome(prop.move.kind.value, bool(accepted), prop.log_r)


def update_cluster_params_mh(state, k, step, rng):
    """Component-wise random-walk MH on cluster ``k``; log scale for positive components.

    Returns ``(proposed, accepted)`` counts.
    """
    model = state.model
    rho = list(state.params[k])
    stats = state.stats[k]
    term = state.clp[k]
    accepted = 0
    for p, positive in enumerate(model.positivity_mask):
        cand = list(rho)
        if positive:
            eps = rng.normal(0.0, step) if step > 0 else 0.0
            cand[p] = rho[p] * math.exp(eps)
            log_jac = eps
        else:
            cand[p] = rho[p] + (rng.normal(0.0, step) if step > 0 else 0.0)
            log_jac = 0.0
        cand = tuple(cand)
        new_term = state.cluster_term(stats, cand)
        log_r = new_term - term + log_jac
        if log_r >= math.log(rng.random() or 1e-300):
            rho, term = list(cand), new_term
            accepted += 1
    state.log_post += term - state.clp[k]
    state.params[k], state.clp[k] = tuple(rho), term
    return len(model.positivity_mask), accepted


def rj_iteration(state, config, rng, scan="fixed", counts=None, strategy_for=None):
    """Link sweep, then parameter MH over every cluster."""
    counts = {} if counts is None else counts
    for i in scan_order(state.links.n, scan, rng):
        strategy = strategy_for(i) if strategy_for is not None else None
        out = rj_step(state, i, config, rng, strategy)
        slot = counts.setdefault(out.move_class, [0, 0])
        slot[0] += 1
        slot[1] += out.accepted
    slot = counts.setdefault(PARAM_MH, [0, 0])
    for k in list(state.params):
        proposed, acc = update_cluster_params_mh(state, k, config.param_step, rng)
        slot[0] += proposed
        slot[1] += acc
    return counts


def run_rjmcmc(y, prior, model, settings, config, rng, hyper=None, init=None, metadata=None,
               observed=None, on_iteration=None):
    """Run a reversible-jump chain and return its :class:`~ddcrp.trace.TraceStore`.

    Unobserved points (``observed[i]`` false) contribute no likelihood and
    have their links drawn with the prior link proposal, which collapses
    their outcome out of the update.
    """
    settings = settings if isinstance(settings, ChainSettings) else ChainSettings(**settings)
    hyper = hyper or HyperConfig(infer_alpha=False)
    c0 = initial_links(prior.n, settings.init, prior, rng) if init is None else init
    state = RjChainState(y, prior, model, c0, rng=rng, observed=observed)
    strategy_for = None
    if observed is not None and not np.all(observed):
        mask = np.asarray(observed, bool)
        strategy_for = lambda i: None if mask[i] else LinkStrategy.PRIOR  # noqa: E731
    meta = {"sampler": "rjmcmc", "model": model.name, "burn_in": settings.burn_in,
            "thinning": settings.thinning, "iterations": settings.iterations}
    meta.update(metadata or {})
    rec = TraceRecorder(prior.n, meta, with_params=True)
    counts = {}
    for it in range(1, settings.iterations + 1):
        rj_iteration(state, config, rng, settings.scan, counts, strategy_for)
        if hyper.infer_alpha or hyper.infer_s:
            state.set_prior(update_hyperparameters(state.links.c, state.prior, hyper, rng))
        if on_iteration is not None:
            on_iteration(state, it, rng)
        if is_recorded(it, settings.burn_in, settings.thinning):
            rec.record(it, state.K, state.prior.alpha, state.prior.decay.scale, state.log_post,
                       state.links.c, state.canonical_params())
    return rec.finish(counts)
