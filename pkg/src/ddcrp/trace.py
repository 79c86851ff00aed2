"""In-memory chain traces and their on-disk form.

On disk a trace is a directory holding

* ``scalars.csv``  - iteration, K, alpha, s, log_post per stored sample
* ``assignments.rle`` - one line per run of identical link vectors:
  ``<repeat> <c_0> ... <c_{n-1}>``
* ``params.csv``   - iteration, cluster, p0..p{d-1}; clusters use the
  canonical smallest-member labelling (absent for collapsed chains)
* ``meta.json``    - run metadata and move acceptance counts
"""

from dataclasses import dataclass, field
import csv
import hashlib
import json
from pathlib import Path

import numpy as np

from .partition import partition_from_assignments


def array_digest(a):
    a = np.ascontiguousarray(a, dtype=float)
    return hashlib.sha256(a.tobytes() + str(a.shape).encode()).hexdigest()[:16]


@dataclass
class TraceStore:
    iterations: np.ndarray
    K: np.ndarray
    alpha: np.ndarray
    s: np.ndarray
    log_post: np.ndarray
    assignments: np.ndarray
    cluster_params: list = None
    metadata: dict = field(default_factory=dict)
    moves: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.iterations)

    @property
    def n(self):
        return self.assignments.shape[1]

    @property
    def has_params(self):
        return self.cluster_params is not None

    def observation_params(self, t):
        """Parameters of each observation's cluster in sample ``t``, shape ``(n, d)``."""
        part = partition_from_assignments(self.assignments[t])
        return np.asarray(self.cluster_params[t])[part.labels]

    def subset(self, mask):
        mask = np.asarray(mask)
        idx = np.flatnonzero(mask) if mask.dtype == bool else mask
        params = None if self.cluster_params is None else [self.cluster_params[t] for t in idx]
        return TraceStore(self.iterations[idx], self.K[idx], self.alpha[idx], self.s[idx],
                          self.log_post[idx], self.assignments[idx], params,
                          dict(self.metadata), dict(self.moves))

    def write(self, directory):
        out = Path(directory)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "scalars.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["iteration", "K", "alpha", "s", "log_post"])
            for row in zip(self.iterations, self.K, self.alpha, self.s, self.log_post):
                w.writerow([int(row[0]), int(row[1]), repr(float(row[2])), repr(float(row[3])),
                            repr(float(row[4]))])
        with open(out / "assignments.rle", "w") as fh:
            for count, vec in _runs(self.assignments):
                fh.write(f"{count} " + " ".join(map(str, vec)) + "\n")
        if self.cluster_params is not None:
            with open(out / "params.csv", "w", newline="") as fh:
                w = csv.writer(fh, lineterminator="\n")
                d = np.asarray(self.cluster_params[0]).shape[1] if len(self) else 1
                w.writerow(["iteration", "cluster"] + [f"p{k}" for k in range(d)])
                for it, block in zip(self.iterations, self.cluster_params):
                    for k, rho in enumerate(np.asarray(block)):
                        w.writerow([int(it), k] + [repr(float(v)) for v in rho])
        meta = {"metadata": self.metadata, "moves": self.moves}
        (out / "meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True))

    @classmethod
    def read(cls, directory):
        src = Path(directory)
        meta = json.loads((src / "meta.json").read_text())
        cols = np.loadtxt(src / "scalars.csv", delimiter=",", skiprows=1, ndmin=2)
        if cols.size == 0:
            cols = np.empty((0, 5))
        rows = []
        with open(src / "assignments.rle") as fh:
            for line in fh:
                parts = line.split()
                if parts:
                    rows.extend([list(map(int, parts[1:]))] * int(parts[0]))
        n = meta["metadata"].get("n", len(rows[0]) if rows else 0)
        assignments = np.array(rows, dtype=np.int64).reshape(len(rows), n)
        params = None
        if (src / "params.csv").exists():
            table = np.loadtxt(src / "params.csv", delimiter=",", skiprows=1, ndmin=2)
            lo = np.searchsorted(table[:, 0], cols[:, 0], side="left")
            hi = np.searchsorted(table[:, 0], cols[:, 0], side="right")
            params = [table[a:b, 2:] for a, b in zip(lo, hi)]
        return cls(cols[:, 0].astype(np.int64), cols[:, 1].astype(np.int64), cols[:, 2], cols[:, 3],
                   cols[:, 4], assignments, params, meta["metadata"], meta["moves"])


def _runs(assignments):
    prev, count = None, 0
    for vec in assignments:
        vec = tuple(int(v) for v in vec)
        if vec == prev:
            count += 1
            continue
        if prev is not None:
            yield count, prev
        prev, count = vec, 1
    if prev is not None:
        yield count, prev


class TraceRecorder:
    def __init__(self, n, metadata=None, with_params=False):
        self.n = n
        self.metadata = dict(metadata or {})
        self.metadata.setdefault("n", n)
        self.with_params = with_params
        self._rows = []
        self._assign = []
        self._params = []

    def record(self, iteration, K, alpha, s, log_post, c, cluster_params=None):
        self._rows.append((iteration, K, alpha, s, log_post))
        self._assign.append(list(c))
        if self.with_params:
            self._params.append(np.asarray(cluster_params, dtype=float))

    def finish(self, moves=None):
        rows = np.array(self._rows, dtype=float).reshape(len(self._rows), 5)
        assign = np.array(self._assign, dtype=np.int64).reshape(len(self._assign), self.n)
        return TraceStore(rows[:, 0].astype(np.int64), rows[:, 1].astype(np.int64), rows[:, 2],
                          rows[:, 3], rows[:, 4], assign,
                          self._params if self.with_params else None,
                          self.metadata, dict(moves or {}))


def is_recorded(iteration, burn_in, thinning):
    """Iterations are 1-based; the first ``burn_in`` are discarded, then every ``thinning``-th kept."""
    return iteration > burn_in and (iteration - burn_in) % thinning == 0


@dataclass(frozen=True)
class ChainSettings:
    """Iteration budget of one chain. ``iterations`` includes burn-in."""

    iterations: int
    burn_in: int = 0
    thinning: int = 1
    scan: str = "fixed"
    init: str = "self"

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError("iterations must be at least 1")
        if not 0 <= self.burn_in < self.iterations:
            raise ValueError("burn_in must satisfy 0 <= burn_in < iterations")
        if self.thinning < 1:
            raise ValueError("thinning must be at least 1")
        if self.scan not in ("fixed", "random"):
            raise ValueError("scan must be 'fixed' or 'random'")
        if self.init not in ("self", "prior", "single"):
            raise ValueError("init must be 'self', 'prior' or 'single'")

    @property
    def kept(self):
        return (self.iterations - self.burn_in) // self.thinning


def initial_links(n, how, prior, rng):
    if how == "self":
        return np.arange(n)
    if how == "single":
        return np.concatenate([[0], np.arange(n - 1)])
    return prior.sample_assignments(rng)


def scan_order(n, scan, rng):
    return range(n) if scan == "fixed" else rng.integers(0, n, size=n).tolist()
