"""Scalar log densities on the hot path.

scipy.stats frozen distributions cost tens of microseconds per call, which is
too slow inside a per-observation sampler loop, so the handful of densities
the samplers need are written out against :mod:`math` here.
"""

import math

LOG_2PI = math.log(2.0 * math.pi)
NEG_INF = -math.inf


def gamma_logpdf(x, shape, rate):
    if x <= 0.0:
        return NEG_INF
    return shape * math.log(rate) - math.lgamma(shape) + (shape - 1.0) * math.log(x) - rate * x


def invgamma_logpdf(x, shape, scale):
    if x <= 0.0:
        return NEG_INF
    return shape * math.log(scale) - math.lgamma(shape) - (shape + 1.0) * math.log(x) - scale / x


def normal_logpdf(x, mean, sd):
    z = (x - mean) / sd
    return -0.5 * (LOG_2PI + z * z) - math.log(sd)


def lognormal_logpdf(x, mu, sigma):
    if x <= 0.0:
        return NEG_INF
    lx = math.log(x)
    return normal_logpdf(lx, mu, sigma) - lx


def exponential_logpdf(x, rate):
    if x < 0.0:
        return NEG_INF
    return math.log(rate) - rate * x


def log_add(a, b):
    if a == NEG_INF:
        return b
    if b == NEG_INF:
        return a
    if a < b:
        a, b = b, a
    return a + math.log1p(math.exp(b - a))
