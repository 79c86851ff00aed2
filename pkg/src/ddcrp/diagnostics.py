"""Chain-quality statistics and posterior summaries computed from a trace.

Everything here is a pure function of its inputs; traces are never mutated.
"""

from collections import Counter
import math
from typing import NamedTuple

import numpy as np
from scipy import stats as sps


class UndefinedStatistic(ValueError):
    pass


def esjd_k(trace_or_k):
    """Mean squared jump of K over consecutive stored samples."""
    k = np.asarray(getattr(trace_or_k, "K", trace_or_k), dtype=float)
    if k.size < 2:
        raise UndefinedStatistic("ESJD needs at least two samples")
    return float(np.mean(np.diff(k) ** 2))


class EssResult(NamedTuple):
    value: float
    constant: bool


def _autocorr(x):
    n = x.size
    x = x - x.mean()
    size = 1 << (2 * n - 1).bit_length()
    f = np.fft.rfft(x, size)
    acov = np.fft.irfft(f * np.conj(f), size)[:n]
    return acov / acov[0] if acov[0] > 0 else None


def ess(series, return_flag=False):
    """Effective sample size with Geyer's initial monotone sequence truncation.

    Autocorrelations are summed in adjacent pairs; the sum stops at the first
    non-positive pair and the pairs are forced non-increasing. The result is
    clamped to ``(0, N]``. A constant series is treated as independent and
    gets ``N``, with the flag set.
    """
    x = np.asarray(series, dtype=float).ravel()
    n = x.size
    if n < 10:
        raise UndefinedStatistic("ESS needs at least 10 samples")
    # spreads below float resolution centre to zero and count as constant
    rho = _autocorr(x) if np.ptp(x) > 0 else None
    if rho is None:
        out = EssResult(float(n), True)
        return out if return_flag else out.value
    m = (n - 1) // 2
    pairs = rho[0:2 * m:2] + rho[1:2 * m:2]
    stop = np.flatnonzero(pairs <= 0)
    pairs = pairs[:stop[0]] if stop.size else pairs
    pairs = np.minimum.accumulate(pairs)
    tau = -1.0 + 2.0 * pairs.sum()
    value = float(min(n, n / tau)) if tau > 0 else float(n)
    out = EssResult(value, False)
    return out if return_flag else out.value


def k_posterior(trace_or_k):
    """Normalised histogram of K as an ordered ``{K: probability}`` dict."""
    k = np.asarray(getattr(trace_or_k, "K", trace_or_k), dtype=int)
    if k.size == 0:
        raise UndefinedStatistic("empty trace")
    counts = Counter(k.tolist())
    return {int(v): counts[v] / k.size for v in sorted(counts)}


def k_mode(trace_or_k):
    """Posterior mode of K; ties go to the smaller K."""
    post = k_posterior(trace_or_k)
    best = max(post.values())
    return min(k for k, p in post.items() if p == best)


def tv_distance(p, q):
    """Total variation between two ``{K: prob}`` dicts (or aligned arrays)."""
    if isinstance(p, dict):
        keys = set(p) | set(q)
        return 0.5 * sum(abs(p.get(k, 0.0) - q.get(k, 0.0)) for k in keys)
    return 0.5 * float(np.abs(np.asarray(p, float) - np.asarray(q, float)).sum())


class MapPartition(NamedTuple):
    assignments: np.ndarray
    K: int
    log_post: float
    iteration: int


def map_partition(trace):
    """Highest log-posterior stored sample among those with the modal K."""
    if len(trace) == 0:
        raise UndefinedStatistic("empty trace")
    k_star = k_mode(trace.K)
    idx = np.flatnonzero(trace.K == k_star)
    best = idx[int(np.argmax(trace.log_post[idx]))]  # argmax keeps the earliest tie
    return MapPartition(trace.assignments[best].copy(), k_star, float(trace.log_post[best]),
                        int(trace.iterations[best]))


def link_probabilities(trace, condition_on_K=None):
    """Empirical ``P(c_i = j)`` matrix, optionally restricted to samples with ``K = condition_on_K``."""
    c = trace.assignments
    if condition_on_K is not None:
        c = c[trace.K == condition_on_K]
        if c.shape[0] == 0:
            raise UndefinedStatistic(f"no samples with K = {condition_on_K}")
    elif c.shape[0] == 0:
        raise UndefinedStatistic("empty trace")
    n = trace.n
    out = np.zeros((n, n))
    rows = np.broadcast_to(np.arange(n), c.shape)
    np.add.at(out, (rows.ravel(), c.ravel()), 1.0)
    return out / c.shape[0]


def acceptance_report(moves):
    """Per-class ``{proposed, accepted, rate}`` from ``{class: [proposed, accepted]}`` counts.

    Also accepts an iterable of move outcomes with ``move_class`` and
    ``accepted`` fields. A ``birth_death`` entry pools the two
    dimension-changing classes.
    """
    if not isinstance(moves, dict):
        counts = {}
        for out in moves:
            slot = counts.setdefault(str(getattr(out.move_class, "value", out.move_class)), [0, 0])
            slot[0] += 1
            slot[1] += bool(out.accepted)
        moves = counts
    report = {}
    for name, (proposed, accepted) in sorted(moves.items()):
        report[name] = {"proposed": int(proposed), "accepted": int(accepted),
                        "rate": accepted / proposed if proposed else float("nan")}
    if "birth" in moves or "death" in moves:
        p = sum(moves.get(k, (0, 0))[0] for k in ("birth", "death"))
        a = sum(moves.get(k, (0, 0))[1] for k in ("birth", "death"))
        report["birth_death"] = {"proposed": p, "accepted": a, "rate": a / p if p else float("nan")}
    return report


def s_prior_overlap(s_samples, s_prior, grid_size=512):
    """Total variation between the Gamma prior on s and a KDE of its posterior draws.

    Small values mean the data barely moved s away from its prior.
    """
    s = np.asarray(s_samples, dtype=float)
    if s.size < 2 or np.ptp(s) == 0:
        raise UndefinedStatistic("need a non-degenerate sample of s")
    a, b = s_prior
    hi = max(s.max() * 1.5, sps.gamma.ppf(0.999, a, scale=1.0 / b))
    grid = np.linspace(0.0, hi, grid_size)
    post = sps.gaussian_kde(s)(grid)
    pri = sps.gamma.pdf(grid, a, scale=1.0 / b)
    step = grid[1] - grid[0]
    post /= post.sum() * step
    pri /= pri.sum() * step
    return 0.5 * float(np.abs(post - pri).sum() * step)


def weak_identifiability(s_samples, s_prior, threshold=0.1):
    """True when the posterior of s is within ``threshold`` TV of its prior."""
    return s_prior_overlap(s_samples, s_prior) < threshold


def summarise(trace):
    """Report dict used by the harness."""
    out = {"samples": len(trace), "k_posterior": k_posterior(trace), "k_mode": k_mode(trace),
           "k_mean": float(np.mean(trace.K)), "acceptance": acceptance_report(trace.moves)}
    if len(trace) >= 10:
        for name, series in (("K", trace.K), ("log_post", trace.log_post), ("alpha", trace.alpha)):
            res = ess(series, return_flag=True)
            out[f"ess_{name}"] = res.value
            out[f"ess_{name}_constant"] = res.constant
    if len(trace) >= 2:
        out["esjd_K"] = esjd_k(trace)
    m = map_partition(trace)
    out["map"] = {"K": m.K, "log_post": m.log_post, "iteration": m.iteration,
                  "assignments": m.assignments.tolist()}
    if not math.isfinite(out["k_mean"]):
        raise UndefinedStatistic("non-finite K summary")
    return out
