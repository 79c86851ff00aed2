"""The distance-dependent CRP prior over link vectors."""

from bisect import bisect_right
from dataclasses import dataclass, field
from enum import Enum
import math

import numpy as np

from .partition import validate_assignments


class DecayForm(str, Enum):
    EXPONENTIAL = "exponential"
    WINDOW = "window"
    IDENTITY = "identity"


@dataclass(frozen=True)
class DecaySpec:
    form: DecayForm = DecayForm.EXPONENTIAL
    scale: float = 1.0
    extra: tuple = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "form", DecayForm(self.form))
        if not self.scale > 0:
            raise ValueError("decay scale must be positive")
        if self.form is DecayForm.WINDOW and (len(self.extra) != 1 or not self.extra[0] > 0):
            raise ValueError("window decay needs one positive width in `extra`")

    def with_scale(self, scale):
        return DecaySpec(self.form, scale, self.extra)

    def __call__(self, d):
        d = np.asarray(d, dtype=float)
        if self.form is DecayForm.EXPONENTIAL:
            return np.exp(-self.scale * d)
        if self.form is DecayForm.IDENTITY:
            return np.ones_like(d)
        return (d < self.extra[0]).astype(float)


def validate_distances(d):
    d = np.array(d, dtype=float)
    if d.ndim != 2 or d.shape[0] != d.shape[1] or d.shape[0] == 0:
        raise ValueError("distance matrix must be square and non-empty")
    if not np.all(np.isfinite(d)):
        raise ValueError("distance matrix has non-finite entries")
    if np.any(d < 0):
        raise ValueError("distances must be non-negative")
    if np.any(np.diag(d) != 0):
        raise ValueError("distance matrix must have a zero diagonal")
    if not np.allclose(d, d.T, rtol=0, atol=1e-12):
        raise ValueError("distance matrix must be symmetric")
    return d


def distances_from_covariate(x):
    x = np.asarray(x, dtype=float).ravel()
    return np.abs(x[:, None] - x[None, :])


class DdcrpPrior:
    """Link prior with cached decay weights.

    ``row_weights[i]`` is the non-self mass ``sum_{j != i} f(d_ij)``. The cache
    belongs to one decay scale; :meth:`with_scale` builds a new prior and
    :meth:`row_weights_at` evaluates other scales without touching it.
    """

    def __init__(self, distances, decay, alpha, *, _checked=False):
        self.distances = distances if _checked else validate_distances(distances)
        self.decay = decay
        if not alpha > 0:
            raise ValueError("concentration alpha must be positive")
        self.alpha = float(alpha)
        self._rebuild()

    @classmethod
    def from_covariate(cls, x, decay, alpha):
        return cls(distances_from_covariate(x), decay, alpha)

    @property
    def n(self):
        return self.distances.shape[0]

    def _rebuild(self):
        f = self.decay(self.distances)
        np.fill_diagonal(f, 0.0)
        self.weights = f
        self.row_weights = f.sum(axis=1)
        with np.errstate(divide="ignore"):
            self.log_weights = np.log(f)
        self._cum_rows = None

    def _share(self, alpha):
        new = DdcrpPrior.__new__(DdcrpPrior)
        new.distances = self.distances
        new.decay = self.decay
        new.alpha = float(alpha)
        new.weights = self.weights
        new.row_weights = self.row_weights
        new.log_weights = self.log_weights
        new._cum_rows = self._cum_rows
        return new

    def with_alpha(self, alpha):
        if not alpha > 0:
            raise ValueError("concentration alpha must be positive")
        return self._share(alpha)

    def with_scale(self, scale):
        return DdcrpPrior(self.distances, self.decay.with_scale(scale), self.alpha, _checked=True)

    def row_weights_at(self, scale):
        f = self.decay.with_scale(scale)(self.distances)
        np.fill_diagonal(f, 0.0)
        return f.sum(axis=1)

    def link_log_probs(self, i):
        out = self.log_weights[i].copy()
        out[i] = math.log(self.alpha)
        return out - math.log(self.alpha + self.row_weights[i])

    def link_log_prob(self, i, j):
        norm = math.log(self.alpha + self.row_weights[i])
        if i == j:
            return math.log(self.alpha) - norm
        return float(self.log_weights[i, j]) - norm

    def assignment_log_prior(self, c):
        c = validate_assignments(c)
        if c.size != self.n:
            raise ValueError("assignment vector length does not match the prior")
        idx = np.arange(self.n)
        self_links = c == idx
        total = self_links.sum() * math.log(self.alpha)
        other = self.log_weights[idx[~self_links], c[~self_links]]
        total += other.sum() - np.log(self.alpha + self.row_weights).sum()
        return float(total)

    def _rows(self):
        if self._cum_rows is None:
            self._cum_rows = np.cumsum(self.weights, axis=1).tolist()
        return self._cum_rows

    def sample_link(self, i, rng):
        r_i = self.row_weights[i]
        u = rng.random() * (self.alpha + r_i)
        if u < self.alpha or r_i <= 0.0:
            return i
        row = self._rows()[i]
        j = bisect_right(row, u - self.alpha)
        if j >= self.n:
            j = int(np.flatnonzero(self.weights[i])[-1])
        return j

    def sample_assignments(self, rng):
        return np.array([self.sample_link(i, rng) for i in range(self.n)], dtype=np.int64)


def n_self_links(c):
    c = np.asarray(c)
    return int(np.sum(c == np.arange(c.size)))


def link_distance_sum(c, distances):
    """Sum of d_{i, c_i} over non-self links."""
    c = np.asarray(c)
    return float(distances[np.arange(c.size), c].sum())
