"""Within-chain updates for the concentration alpha and the decay scale s.

alpha is updated exactly: exponential auxiliaries ``V_i ~ Exp(alpha + R_i)``
cancel the prior normalisers and leave a Gamma full conditional. s gets a
random-walk Metropolis-Hastings step on the log scale, optionally reusing
the auxiliaries from the alpha update.
"""

from dataclasses import dataclass
import math

import numpy as np

from .prior import DecayForm, link_distance_sum, n_self_links


class UnsupportedConfiguration(ValueError):
    pass


@dataclass(frozen=True)
class HyperConfig:
    infer_alpha: bool = True
    alpha_prior: tuple = (1.0, 0.01)
    infer_s: bool = False
    s_prior: tuple = (1.0, 1.0)
    s_step: float = 0.5

    def __post_init__(self):
        if min(self.alpha_prior) <= 0 or min(self.s_prior) <= 0:
            raise ValueError("hyperprior shape and rate must be positive")
        if self.infer_s and not self.s_step > 0:
            raise ValueError("s_step must be positive when s is inferred")


def alpha_gibbs_update(c, prior, config, rng):
    """One exact (V, alpha) Gibbs pass; returns ``(alpha, V)``."""
    rates = prior.alpha + prior.row_weights
    v = rng.exponential(1.0 / rates)
    shape = config.alpha_prior[0] + n_self_links(c)
    rate = config.alpha_prior[1] + v.sum()
    return float(rng.gamma(shape, 1.0 / rate)), v


def s_log_ratio(c, prior, s_new, s_prior, aux=None):
    """Log acceptance ratio for moving the decay scale from ``prior.decay.scale`` to ``s_new``.

    The ``a_s * log(s'/s)`` term folds the Gamma prior's ``(a_s - 1)`` power
    together with the log-scale proposal Jacobian.
    """
    s = prior.decay.scale
    a_s, b_s = s_prior
    d_sum = link_distance_sum(c, prior.distances)
    log_r = a_s * math.log(s_new / s) - (b_s + d_sum) * (s_new - s)
    r_new = prior.row_weights_at(s_new)
    if aux is not None:
        log_r -= float(np.dot(aux, r_new - prior.row_weights))
    else:
        log_r -= float(np.sum(np.log(prior.alpha + r_new) - np.log(prior.alpha + prior.row_weights)))
    return log_r


def s_mh_update(c, prior, config, aux, rng):
    """Log-normal random-walk step for s; returns ``(prior, accepted)``."""
    if prior.decay.form is not DecayForm.EXPONENTIAL:
        raise UnsupportedConfiguration("inferring s requires exponential decay")
    s_new = prior.decay.scale * math.exp(rng.normal(0.0, config.s_step))
    log_r = s_log_ratio(c, prior, s_new, config.s_prior, aux)
    if math.log(rng.random()) < log_r:
        return prior.with_scale(s_new), True
    return prior, False


def update_hyperparameters(c, prior, config, rng):
    """alpha first (drawing V), then s reusing V when both are inferred."""
    aux = None
    if config.infer_alpha:
        alpha, aux = alpha_gibbs_update(c, prior, config, rng)
        prior = prior.with_alpha(alpha)
    if config.infer_s:
        prior, _ = s_mh_update(c, prior, config, aux, rng)
    return prior
