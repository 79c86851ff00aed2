"""Parameter proposals for birth moves and fixed-dimensional resampling.

Each family returns a draw together with its log density on the auxiliary
scale and the log Jacobian of the map back to parameter space. Only the
log-normal family has a non-zero Jacobian. The moment-matched families fall
back to a prior draw when the moving set is too small or its moments are
degenerate; which family actually fired is a pure function of the data, so
the reverse density is evaluated with exactly the same choice.
"""

from dataclasses import dataclass
from enum import Enum
import math
from typing import NamedTuple

import numpy as np

from ._dists import gamma_logpdf, invgamma_logpdf, lognormal_logpdf, normal_logpdf
from .models import sample_moments


class Family(str, Enum):
    PRIOR = "prior"
    INDEPENDENCE = "independence"
    NMM = "nmm"
    IGMM = "igmm"
    LNMM = "lnmm"


@dataclass(frozen=True)
class IndependenceSpec:
    """Fixed proposal distribution applied independently to every component."""

    family: str = "gamma"
    params: tuple = (1.0, 1.0)

    def __post_init__(self):
        if self.family not in ("gamma", "lognormal", "normal"):
            raise ValueError(f"unknown independence family {self.family!r}")
        if len(self.params) != 2 or self.params[1] <= 0 or (self.family == "gamma" and self.params[0] <= 0):
            raise ValueError("independence proposal parameters are invalid")

    def sample(self, rng):
        p, q = self.params
        if self.family == "gamma":
            return rng.gamma(p, 1.0 / q)
        if self.family == "lognormal":
            return math.exp(rng.normal(p, q))
        return rng.normal(p, q)

    def log_density(self, x):
        p, q = self.params
        if self.family == "gamma":
            return gamma_logpdf(x, p, q)
        if self.family == "lognormal":
            return lognormal_logpdf(x, p, q)
        return normal_logpdf(x, p, q)


@dataclass(frozen=True)
class BirthProposalConfig:
    family: Family = Family.PRIOR
    sigma: float = 0.5
    independence: IndependenceSpec = None
    min_size: int = 2

    def __post_init__(self):
        object.__setattr__(self, "family", Family(self.family))
        if self.family in (Family.NMM, Family.LNMM) and not self.sigma > 0:
            raise ValueError("moment-matching dispersion sigma must be positive")
        if self.family is Family.INDEPENDENCE and self.independence is None:
            raise ValueError("independence family needs an IndependenceSpec")
        if self.min_size < 1:
            raise ValueError("min_size must be at least 1")


@dataclass(frozen=True)
class ResampleConfig:
    enabled: bool = False
    family: Family = Family.NMM
    sigma: float = 0.5
    min_size: int = 2

    def __post_init__(self):
        object.__setattr__(self, "family", Family(self.family))
        if self.family not in (Family.NMM, Family.IGMM, Family.LNMM):
            raise ValueError("resampling uses a moment-matched family (nmm, igmm, lnmm)")
        if self.family in (Family.NMM, Family.LNMM) and not self.sigma > 0:
            raise ValueError("resampling dispersion sigma must be positive")

    def as_birth(self):
        return BirthProposalConfig(self.family, self.sigma, None, self.min_size)


class BirthDraw(NamedTuple):
    rho: tuple
    log_q: float
    log_jac: float
    family: Family


def inverse_gamma_moments(mean, var):
    """Inverse-gamma (shape, scale) matching a mean and variance, or None."""
    if mean is None or var is None or not var > 0:
        return None
    shape = 2.0 + mean * mean / var
    scale = mean * (shape - 1.0)
    if not (math.isfinite(shape) and math.isfinite(scale) and shape > 2.0 and scale > 0.0):
        return None
    return shape, scale


def resolve_family(model, stats, config):
    """Return ``(family_used, centre)`` for a moving set with statistics ``stats``."""
    fam = config.family
    if fam is Family.PRIOR or fam is Family.INDEPENDENCE:
        return fam, None
    if stats[0] < config.min_size:
        return Family.PRIOR, None
    if fam is Family.IGMM:
        ig = inverse_gamma_moments(*sample_moments(stats))
        return (Family.IGMM, ig) if ig is not None else (Family.PRIOR, None)
    centre = model.moment_stats(stats, config.min_size)
    if centre is None or (fam is Family.LNMM and min(centre) <= 0):
        return Family.PRIOR, None
    return fam, centre


def _draw(model, fam, centre, config, rng):
    if fam is Family.PRIOR:
        rho = tuple(model.prior_sample(rng))
        return BirthDraw(rho, model.prior_log_density(rho), 0.0, fam)
    if fam is Family.INDEPENDENCE:
        spec = config.independence
        rho = tuple(spec.sample(rng) for _ in range(model.param_dim))
        return BirthDraw(rho, sum(spec.log_density(x) for x in rho), 0.0, fam)
    if fam is Family.NMM:
        rho = tuple(rng.normal(m, config.sigma) for m in centre)
        return BirthDraw(rho, sum(normal_logpdf(x, m, config.sigma) for x, m in zip(rho, centre)), 0.0, fam)
    if fam is Family.IGMM:
        shape, scale = centre
        rho = tuple(scale / rng.gamma(shape) for _ in range(model.param_dim))
        return BirthDraw(rho, sum(invgamma_logpdf(x, shape, scale) for x in rho), 0.0, fam)
    u = tuple(rng.normal(math.log(m), config.sigma) for m in centre)
    rho = tuple(math.exp(v) for v in u)
    log_q = sum(normal_logpdf(v, math.log(m), config.sigma) for v, m in zip(u, centre))
    return BirthDraw(rho, log_q, sum(u), fam)


def _density(model, fam, centre, config, rho):
    if fam is Family.PRIOR:
        return model.prior_log_density(rho), 0.0
    if fam is Family.INDEPENDENCE:
        return sum(config.independence.log_density(x) for x in rho), 0.0
    if fam is Family.NMM:
        return sum(normal_logpdf(x, m, config.sigma) for x, m in zip(rho, centre)), 0.0
    if fam is Family.IGMM:
        shape, scale = centre
        return sum(invgamma_logpdf(x, shape, scale) for x in rho), 0.0
    if min(rho) <= 0:
        return -math.inf, 0.0
    u = [math.log(x) for x in rho]
    return sum(normal_logpdf(v, math.log(m), config.sigma) for v, m in zip(u, centre)), sum(u)


def birth_draw_stats(model, stats, config, rng):
    fam, centre = resolve_family(model, stats, config)
    return _draw(model, fam, centre, config, rng)


def birth_density_stats(model, stats, config, rho):
    fam, centre = resolve_family(model, stats, config)
    return _density(model, fam, centre, config, rho)


def propose_birth_params(model, y_moving, config, rng):
    """Draw parameters for a cluster made of ``y_moving``.

    Returns a :class:`BirthDraw` ``(rho, log_q, log_jac, family)``.
    """
    return birth_draw_stats(model, model.stats_of(y_moving), config, rng)


def birth_log_density(model, y_moving, config, rho):
    """``(log_q, log_jac)`` of the birth proposal at ``rho``, replaying the fallback."""
    return birth_density_stats(model, model.stats_of(y_moving), config, tuple(np.atleast_1d(rho).astype(float)))


def _param_space_density(model, stats, config, rho):
    log_q, log_jac = birth_density_stats(model, stats, config, rho)
    return log_q - log_jac


def resample_draw_stats(model, stats_r, stats_t, config, rng):
    birth = config.as_birth()
    a = birth_draw_stats(model, stats_r, birth, rng)
    b = birth_draw_stats(model, stats_t, birth, rng)
    return a.rho, b.rho, (a.log_q - a.log_jac) + (b.log_q - b.log_jac)


def resample_density_stats(model, stats_r, stats_t, rho_r, rho_t, config):
    birth = config.as_birth()
    return _param_space_density(model, stats_r, birth, rho_r) + _param_space_density(model, stats_t, birth, rho_t)


def propose_resample(model, y_remaining_new, y_target_new, config, rng):
    """Fresh parameters for both clusters touched by a transfer, given new memberships.

    Returns ``(rho_r, rho_t, log_q_forward)`` with the density taken on the
    parameter scale.
    """
    if len(y_remaining_new) == 0 or len(y_target_new) == 0:
        raise ValueError("resampling needs both affected clusters non-empty")
    return resample_draw_stats(model, model.stats_of(y_remaining_new), model.stats_of(y_target_new), config, rng)


def evaluate_resample(model, y_remaining_old, y_target_old, rho_r, rho_t, config):
    """Reverse-move density of the old parameters under the old memberships."""
    if len(y_remaining_old) == 0 or len(y_target_old) == 0:
        raise ValueError("resampling needs both affected clusters non-empty")
    return resample_density_stats(model, model.stats_of(y_remaining_old), model.stats_of(y_target_old),
                                  tuple(np.atleast_1d(rho_r).astype(float)),
                                  tuple(np.atleast_1d(rho_t).astype(float)), config)
