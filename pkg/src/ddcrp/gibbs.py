"""Collapsed Gibbs sampler for conjugate cluster models.

Cluster parameters are integrated out, so the state is just the link vector.
Each link is redrawn from its full conditional, computed relative to the
partition with the link removed: a self-link keeps the moving set apart, a
link inside the moving set changes nothing, and a link to any other
component merges the two and picks up the marginal-likelihood ratio.
"""

import math

import numpy as np

from .hyper import HyperConfig, update_hyperparameters
from .models import EMPTY_STATS, add_stats, sub_stats, sum_stats
from .partition import LinkGraph, MoveClass
from .trace import ChainSettings, TraceRecorder, initial_links, is_recorded, scan_order


class GibbsChainState:
    def __init__(self, y, prior, model, c=None, observed=None):
        if not model.conjugate:
            raise ValueError(f"model {model.name!r} has no closed-form marginal likelihood")
        self.model = model
        self.prior = prior
        n = prior.n
        y = np.asarray(y, dtype=float).ravel()
        if y.size != n:
            raise ValueError("observation count does not match the distance matrix")
        self.observed = np.ones(n, bool) if observed is None else np.asarray(observed, bool)
        self.y = y
        table = model.observation_stats(model.validate(y[self.observed]))
        it = iter(table)
        self.obs = [next(it) if o else EMPTY_STATS for o in self.observed]
        self.links = LinkGraph(np.arange(n) if c is None else c)
        self._refresh()

    def _refresh(self):
        self.stats = {k: sum_stats(self.obs, m) for k, m in self.links.members.items()}
        self.ml = {k: self.model.marginal_stats(st) for k, st in self.stats.items()}
        self.log_prior = self.prior.assignment_log_prior(self.links.c)
        self.log_post = self.log_prior + sum(self.ml.values())

    def recompute_log_post(self):
        stats = {k: sum_stats(self.obs, m) for k, m in self.links.members.items()}
        ml = sum(self.model.marginal_stats(st) for st in stats.values())
        return self.prior.assignment_log_prior(self.links.c) + ml

    def set_prior(self, prior):
        self.prior = prior
        self.log_prior = prior.assignment_log_prior(self.links.c)
        self.log_post = self.log_prior + sum(self.ml.values())

    @property
    def K(self):
        return self.links.K


def link_log_weights(state, i):
    """Unnormalised full-conditional log weights over every target of link ``i``.

    Returns ``(log_w, cache)`` where ``cache`` carries the quantities needed to
    apply whichever link is drawn.
    """
    links, model, prior = state.links, state.model, state.prior
    n = links.n
    moving = links.moving_set(i)
    origin = links.label[i]
    st_m = sum_stats(state.obs, moving)
    remaining_empty = len(moving) == len(links.members[origin])
    if remaining_empty:
        ml_m, st_r, ml_r = state.ml[origin], None, None
    else:
        ml_m = model.marginal_stats(st_m)
        st_r = sub_stats(state.stats[origin], st_m)
        ml_r = model.marginal_stats(st_r)

    merged = {}
    gain = np.zeros(n)
    for k, st in state.stats.items():
        if k == origin:
            continue
        merged[k] = model.marginal_stats(add_stats(st, st_m))
        gain[k] = merged[k] - ml_m - state.ml[k]
    if not remaining_empty:
        gain[origin] = state.ml[origin] - ml_m - ml_r

    log_w = prior.log_weights[i] + gain[links.label]
    idx = list(moving)
    log_w[idx] = prior.log_weights[i, idx]
    log_w[i] = math.log(prior.alpha)
    return log_w, (moving, origin, remaining_empty, st_m, ml_m, st_r, ml_r, merged)


def _draw_index(log_w, rng):
    w = np.exp(log_w - log_w.max())
    cw = np.cumsum(w)
    j = int(np.searchsorted(cw, rng.random() * cw[-1], side="right"))
    return min(j, len(cw) - 1)


def gibbs_update_link(state, i, rng):
    """Redraw link ``i`` from its full conditional; returns the realised move class."""
    log_w, cache = link_log_weights(state, i)
    j = _draw_index(log_w, rng)
    return _apply(state, i, j, cache)


def _apply(state, i, j, cache):
    moving, origin, remaining_empty, st_m, ml_m, st_r, ml_r, merged = cache
    links = state.links
    old = links.c[i]
    if j == old:
        return MoveClass.FIXED_SAME
    move = links.decompose(i, j, moving)
    d_prior = state.prior.link_log_prob(i, j) - state.prior.link_log_prob(i, old)
    state.log_prior += d_prior
    delta = d_prior
    kind = move.kind
    if kind is MoveClass.BIRTH:
        slot = links.relink(i, j, move)
        delta += ml_m + ml_r - state.ml[origin]
        state.stats[origin], state.ml[origin] = st_r, ml_r
        state.stats[slot], state.ml[slot] = st_m, ml_m
    elif kind is MoveClass.FIXED_SAME:
        links.relink(i, j, move)
    else:
        t = move.target
        links.relink(i, j, move)
        delta += merged[t] - state.ml[t]
        state.stats[t], state.ml[t] = add_stats(state.stats[t], st_m), merged[t]
        if kind is MoveClass.DEATH:
            delta -= state.ml.pop(origin)
            del state.stats[origin]
        else:
            delta += ml_r - state.ml[origin]
            state.stats[origin], state.ml[origin] = st_r, ml_r
    state.log_post += delta
    return kind


def gibbs_sweep(state, rng, scan="fixed"):
    counts = {}
    for i in scan_order(state.links.n, scan, rng):
        kind = gibbs_update_link(state, i, rng)
        counts[kind] = counts.get(kind, 0) + 1
    return counts


def run_gibbs(y, prior, model, settings, rng, hyper=None, init=None, metadata=None, observed=None,
              on_iteration=None):
    """Run a collapsed Gibbs chain and return its :class:`~ddcrp.trace.TraceStore`.

    ``hyper`` (a :class:`HyperConfig`) interleaves alpha/s updates after every
    sweep. ``on_iteration(state, it, rng)`` is called after each sweep.
    """
    settings = settings if isinstance(settings, ChainSettings) else ChainSettings(**settings)
    hyper = hyper or HyperConfig(infer_alpha=False)
    c0 = initial_links(prior.n, settings.init, prior, rng) if init is None else init
    state = GibbsChainState(y, prior, model, c0, observed)
    meta = {"sampler": "gibbs", "model": model.name, "burn_in": settings.burn_in,
            "thinning": settings.thinning, "iterations": settings.iterations}
    meta.update(metadata or {})
    rec = TraceRecorder(prior.n, meta, with_params=False)
    moves = {}
    for it in range(1, settings.iterations + 1):
        for kind, cnt in gibbs_sweep(state, rng, settings.scan).items():
            slot = moves.setdefault(kind.value, [0, 0])
            slot[0] += cnt
            slot[1] += cnt
        if hyper.infer_alpha or hyper.infer_s:
            state.set_prior(update_hyperparameters(state.links.c, state.prior, hyper, rng))
        if on_iteration is not None:
            on_iteration(state, it, rng)
        if is_recorded(it, settings.burn_in, settings.thinning):
            rec.record(it, state.K, state.prior.alpha, state.prior.decay.scale, state.log_post,
                       state.links.c)
    return rec.finish(moves)
