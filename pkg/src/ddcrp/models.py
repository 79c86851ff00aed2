"""Cluster observation models.

Every model reduces a set of observations to additive sufficient statistics
``(count, sum, sum_sq, extra)`` so the samplers can move observations between
clusters without rescanning the data. ``extra`` is model specific.

Cluster parameters ``rho`` are tuples of floats of length ``param_dim``. Both
shipped models have no global parameters, but the public likelihood methods
accept ``theta`` so other models can use it.
"""

import math

import numpy as np

from ._dists import gamma_logpdf

EMPTY_STATS = (0.0, 0.0, 0.0, 0.0)


def add_stats(a, b):
    return (a[0] + b[0], a[1] + b[1], a[2] + b[2], a[3] + b[3])


def sub_stats(a, b):
    return (a[0] - b[0], a[1] - b[1], a[2] - b[2], a[3] - b[3])


def sum_stats(table, idx):
    n = s = q = e = 0.0
    for j in idx:
        t = table[j]
        n += t[0]
        s += t[1]
        q += t[2]
        e += t[3]
    return (n, s, q, e)


def sample_moments(stats):
    """Mean and unbiased variance from statistics; variance is None below two points."""
    n, s, q = stats[0], stats[1], stats[2]
    if n < 1:
        return None, None
    mean = s / n
    if n < 2:
        return mean, None
    var = max((q - n * mean * mean) / (n - 1.0), 0.0)
    return mean, var


class ClusterModel:
    name = "abstract"
    param_dim = 1
    positivity_mask = (True,)

    def validate(self, y):
        raise NotImplementedError

    def observation_stats(self, y):
        """Per-observation statistics as a list of tuples (one per observation)."""
        raise NotImplementedError

    def stats_of(self, y):
        y = self.validate(y)
        return sum_stats(self.observation_stats(y), range(len(y)))

    def log_lik_stats(self, stats, rho):
        raise NotImplementedError

    def marginal_stats(self, stats):
        return None

    @property
    def conjugate(self):
        return type(self).marginal_stats is not ClusterModel.marginal_stats

    def cluster_log_lik(self, y, rho, theta=None):
        return self.log_lik_stats(self.stats_of(y), tuple(np.atleast_1d(rho).astype(float)))

    def marginal_cluster_log_lik(self, y, theta=None):
        return self.marginal_stats(self.stats_of(y))

    def prior_log_density(self, rho):
        raise NotImplementedError

    def prior_sample(self, rng):
        raise NotImplementedError

    def moment_stats(self, stats, min_size=2):
        raise NotImplementedError

    def moment_estimate(self, y, min_size=2):
        return self.moment_stats(self.stats_of(y), min_size)

    def predictive_sample(self, rho, stats, rng):
        """One new observation from a cluster with parameters ``rho`` and data ``stats``."""
        raise NotImplementedError

    def describe(self):
        return {"name": self.name}


class PoissonGammaModel(ClusterModel):
    """Poisson counts with a Gamma(a, b) (shape, rate) prior on each cluster rate."""

    name = "poisson"

    def __init__(self, a=1.0, b=0.1):
        if not (a > 0 and b > 0):
            raise ValueError("Gamma prior shape and rate must be positive")
        self.a = float(a)
        self.b = float(b)
        self._prior_const = self.a * math.log(self.b) - math.lgamma(self.a)

    def validate(self, y):
        y = np.asarray(y, dtype=float).ravel()
        if np.any(~np.isfinite(y)) or np.any(y < 0) or np.any(y != np.round(y)):
            raise ValueError("Poisson observations must be non-negative integers")
        return y

    def observation_stats(self, y):
        return [(1.0, v, v * v, math.lgamma(v + 1.0)) for v in map(float, y)]

    def log_lik_stats(self, stats, rho):
        n = stats[0]
        if n == 0:
            return 0.0
        lam = rho[0]
        if lam <= 0.0:
            return -math.inf
        return stats[1] * math.log(lam) - n * lam - stats[3]

    def marginal_stats(self, stats):
        n, total = stats[0], stats[1]
        if n == 0:
            return 0.0
        post_a = total + self.a
        return math.lgamma(post_a) - post_a * math.log(n + self.b) + self._prior_const - stats[3]

    def prior_log_density(self, rho):
        return gamma_logpdf(rho[0], self.a, self.b)

    def prior_sample(self, rng):
        return (rng.gamma(self.a, 1.0 / self.b),)

    def moment_stats(self, stats, min_size=2):
        if stats[0] < max(min_size, 1):
            return None
        mean = stats[1] / stats[0]
        return (mean,) if mean > 0 else None

    def conditional_sample(self, stats, rng):
        """Draw a rate from its conjugate posterior given cluster statistics."""
        return (rng.gamma(self.a + stats[1], 1.0 / (self.b + stats[0])),)

    def predictive_sample(self, rho, stats, rng):
        return float(rng.poisson(rho[0]))

    def describe(self):
        return {"name": self.name, "a": self.a, "b": self.b}


class GammaMarginalShapeModel(ClusterModel):
    """Gamma observations with cluster shape kept explicit and cluster rate integrated out.

    Shape has a Gamma(shape_a, shape_b) prior; the rate has a Gamma(rate_a, rate_b)
    prior which is conjugate and marginalised analytically.
    """

    name = "gamma-shape"

    def __init__(self, shape_a=2.0, shape_b=0.5, rate_a=2.0, rate_b=0.5):
        if min(shape_a, shape_b, rate_a, rate_b) <= 0:
            raise ValueError("all Gamma hyperparameters must be positive")
        self.shape_a = float(shape_a)
        self.shape_b = float(shape_b)
        self.rate_a = float(rate_a)
        self.rate_b = float(rate_b)
        self._rate_const = self.rate_a * math.log(self.rate_b) - math.lgamma(self.rate_a)

    def validate(self, y):
        y = np.asarray(y, dtype=float).ravel()
        if np.any(~np.isfinite(y)) or np.any(y <= 0):
            raise ValueError("gamma-model observations must be strictly positive")
        return y

    def observation_stats(self, y):
        return [(1.0, v, v * v, math.log(v)) for v in map(float, y)]

    def log_lik_stats(self, stats, rho):
        n = stats[0]
        if n == 0:
            return 0.0
        shape = rho[0]
        if shape <= 0.0:
            return -math.inf
        post_a = n * shape + self.rate_a
        return ((shape - 1.0) * stats[3] - n * math.lgamma(shape) + self._rate_const
                + math.lgamma(post_a) - post_a * math.log(self.rate_b + stats[1]))

    def prior_log_density(self, rho):
        return gamma_logpdf(rho[0], self.shape_a, self.shape_b)

    def prior_sample(self, rng):
        return (rng.gamma(self.shape_a, 1.0 / self.shape_b),)

    def moment_stats(self, stats, min_size=2):
        if stats[0] < max(min_size, 2):
            return None
        mean, var = sample_moments(stats)
        if not var or var <= 0:
            return None
        return (mean * mean / var,)

    def rate_conditional_sample(self, shape, stats, rng):
        return rng.gamma(self.rate_a + stats[0] * shape, 1.0 / (self.rate_b + stats[1]))

    def predictive_sample(self, rho, stats, rng):
        rate = self.rate_conditional_sample(rho[0], stats, rng)
        return float(rng.gamma(rho[0], 1.0 / rate))

    def describe(self):
        return {"name": self.name, "shape_a": self.shape_a, "shape_b": self.shape_b,
                "rate_a": self.rate_a, "rate_b": self.rate_b}


def poisson_marginal_cluster_log_lik(y, a, b):
    return PoissonGammaModel(a, b).marginal_cluster_log_lik(y)


def poisson_cluster_log_lik(y, lam):
    if not lam > 0:
        raise ValueError("Poisson rate must be positive")
    return PoissonGammaModel().cluster_log_lik(y, (lam,))


def gamma_marginal_shape_log_lik(y, shape, rate_a, rate_b):
    if not shape > 0:
        raise ValueError("gamma shape must be positive")
    return GammaMarginalShapeModel(rate_a=rate_a, rate_b=rate_b).cluster_log_lik(y, (shape,))


def moment_estimate_poisson(y, min_size=2):
    """Sample mean of a cluster, or None when it is too small or all zero."""
    return PoissonGammaModel().moment_estimate(y, min_size)


def moment_estimate_gamma_shape(y, min_size=2):
    """``mean**2 / var`` with the unbiased variance, or None when degenerate."""
    return GammaMarginalShapeModel().moment_estimate(y, min_size)


MODELS = {
    PoissonGammaModel.name: PoissonGammaModel,
    GammaMarginalShapeModel.name: GammaMarginalShapeModel,
}
