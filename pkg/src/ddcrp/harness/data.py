"""Dataset loading and the Poisson simulation scenario."""

import csv
from dataclasses import dataclass
from importlib import resources
import io

import numpy as np

from ..prior import distances_from_covariate, validate_distances
from .errors import DataError


@dataclass
class Dataset:
    y: np.ndarray
    distances: np.ndarray
    x: np.ndarray = None
    labels: np.ndarray = None  # ground truth for simulated data; never given to samplers

    @property
    def n(self):
        return self.y.size


def _read_columns(text, origin):
    rows = list(csv.reader(io.StringIO(text)))
    if not rows:
        raise DataError(f"{origin}: empty file")
    header = [h.strip() for h in rows[0]]
    if "y" not in header:
        raise DataError(f"{origin}: header must contain a 'y' column")
    cols = {h: [] for h in header}
    for lineno, row in enumerate(rows[1:], start=2):
        if not row or all(not v.strip() for v in row):
            continue
        if len(row) != len(header):
            raise DataError(f"{origin}:{lineno}: expected {len(header)} fields, got {len(row)}")
        for h, v in zip(header, row):
            try:
                cols[h].append(float(v))
            except ValueError:
                raise DataError(f"{origin}:{lineno}: non-numeric value {v!r} in column {h!r}") from None
    if not cols["y"]:
        raise DataError(f"{origin}: no observations")
    return {h: np.asarray(v) for h, v in cols.items()}


def load_distance_matrix(path):
    try:
        d = np.loadtxt(path, delimiter=",", ndmin=2)
    except OSError:
        raise DataError(f"distance file not found: {path}") from None
    except ValueError as exc:
        raise DataError(f"{path}: {exc}") from None
    try:
        return validate_distances(d)
    except ValueError as exc:
        raise DataError(f"{path}: {exc}") from None


def build_dataset(y, x=None, distances=None, labels=None):
    """Exactly one of ``x`` and ``distances`` must be given."""
    if (x is None) == (distances is None):
        raise DataError("need exactly one distance source: a covariate column x or a distance matrix")
    y = np.asarray(y, dtype=float).ravel()
    if not np.all(np.isfinite(y)):
        raise DataError("observations must be finite")
    if x is not None:
        x = np.asarray(x, dtype=float).ravel()
        if x.size != y.size or not np.all(np.isfinite(x)):
            raise DataError("covariate column must be finite and match y in length")
        distances = distances_from_covariate(x)
    elif distances.shape[0] != y.size:
        raise DataError(f"distance matrix is {distances.shape[0]}x{distances.shape[0]} but there are {y.size} observations")
    return Dataset(y, distances, x, labels)


def load_csv_dataset(path, distances_path=""):
    try:
        with open(path) as fh:
            cols = _read_columns(fh.read(), path)
    except FileNotFoundError:
        raise DataError(f"data file not found: {path}") from None
    x = cols.get("x")
    if distances_path:
        return build_dataset(cols["y"], distances=load_distance_matrix(distances_path))
    if x is None:
        raise DataError(f"{path}: no 'x' column and no distance matrix given")
    return build_dataset(cols["y"], x=x)


def old_faithful():
    """Eruption durations (y) with waiting times (x), n = 272."""
    text = resources.files("ddcrp.harness").joinpath("data", "old_faithful.csv").read_text()
    cols = _read_columns(text, "old_faithful.csv")
    return build_dataset(cols["y"], x=cols["x"])


def simulate_poisson_dataset(rng, n=150, mu=(-3.0, 0.0, 3.0), sigma=1.5, lam=(1.0, 4.0, 7.0)):
    """Equal-sized groups with Gaussian covariates and Poisson counts.

    Group sizes differ by at most one when ``n`` is not a multiple of the
    number of groups.
    """
    mu, lam = np.asarray(mu, float), np.asarray(lam, float)
    k = mu.size
    z = np.repeat(np.arange(k), [n // k + (j < n % k) for j in range(k)])
    x = rng.normal(mu[z], sigma)
    y = rng.poisson(lam[z]).astype(float)
    return build_dataset(y, x=x, labels=z)


def write_dataset_csv(ds, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["y", "x"] if ds.x is not None else ["y"])
        for i in range(ds.n):
            row = [_fmt(ds.y[i])]
            if ds.x is not None:
                row.append(_fmt(ds.x[i]))
            w.writerow(row)


def _fmt(v):
    v = float(v)
    return str(int(v)) if v.is_integer() else repr(v)
