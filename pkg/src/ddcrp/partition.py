"""Link graphs, the partitions they induce, and single-link move bookkeeping.

Observations are indexed from 0. An assignment vector ``c`` has one outgoing
link per observation (``c[i] == i`` is a self-link); clusters are the
connected components of the undirected view of that graph.
"""

from collections import deque
from dataclasses import dataclass
from enum import Enum
import heapq
from typing import NamedTuple

import numpy as np


class MoveClass(str, Enum):
    BIRTH = "birth"
    DEATH = "death"
    FIXED_SAME = "fixed_same"
    FIXED_TRANSFER = "fixed_transfer"


K_DELTA = {
    MoveClass.BIRTH: 1,
    MoveClass.DEATH: -1,
    MoveClass.FIXED_SAME: 0,
    MoveClass.FIXED_TRANSFER: 0,
}


def validate_assignments(c):
    """Return ``c`` as an int64 array, raising ``ValueError`` on malformed links."""
    arr = np.asarray(c)
    if arr.ndim != 1 or arr.size == 0:
        raise ValueError("assignment vector must be a non-empty 1-D sequence")
    if not np.issubdtype(arr.dtype, np.integer):
        if not np.all(np.equal(np.mod(arr, 1), 0)):
            raise ValueError("assignment vector entries must be integers")
        arr = arr.astype(np.int64)
    n = arr.size
    if arr.min() < 0 or arr.max() >= n:
        raise ValueError(f"assignment entries must lie in [0, {n - 1}]")
    return arr.astype(np.int64, copy=False)


@dataclass(frozen=True)
class PartitionView:
    labels: np.ndarray
    members: tuple
    K: int

    def cluster_of(self, i):
        return self.members[self.labels[i]]


def partition_from_assignments(c):
    """Connected components of the link graph, labelled by smallest member index."""
    c = validate_assignments(c)
    n = c.size
    parent = list(range(n))

    def find(x):
        root = x
        while parent[root] != root:
            root = parent[root]
        while parent[x] != root:
            parent[x], x = root, parent[x]
        return root

    for i in range(n):
        ri, rj = find(i), find(int(c[i]))
        if ri != rj:
            parent[max(ri, rj)] = min(ri, rj)

    labels = np.empty(n, dtype=np.int64)
    root_label = {}
    groups = []
    for i in range(n):
        r = find(i)
        if r not in root_label:
            root_label[r] = len(groups)
            groups.append([])
        labels[i] = root_label[r]
        groups[root_label[r]].append(i)
    return PartitionView(labels=labels, members=tuple(tuple(g) for g in groups), K=len(groups))


def _children(c):
    kids = [[] for _ in range(len(c))]
    for j, t in enumerate(c):
        kids[int(t)].append(j)
    return kids


def _reach_by_inlinks(kids, i):
    seen = {i}
    queue = deque([i])
    while queue:
        node = queue.popleft()
        for j in kids[node]:
            if j not in seen:
                seen.add(j)
                queue.append(j)
    return seen


def moving_set(c, i):
    """Component containing ``i`` once its outgoing link is removed.

    With ``i`` turned into a sink, that component is exactly the set of
    observations whose link path leads to ``i``.
    """
    c = validate_assignments(c)
    return frozenset(_reach_by_inlinks(_children(c), int(i)))


@dataclass(frozen=True)
class MoveDecomposition:
    original: frozenset
    moving: frozenset
    remaining: frozenset
    target: frozenset
    move_class: MoveClass

    @property
    def k_delta(self):
        return K_DELTA[self.move_class]


def _classify(moving_has_star, origin_has_star, remaining_empty):
    if moving_has_star:
        return MoveClass.FIXED_SAME if remaining_empty else MoveClass.BIRTH
    if origin_has_star:
        return MoveClass.FIXED_SAME
    return MoveClass.DEATH if remaining_empty else MoveClass.FIXED_TRANSFER


def classify_move(c, i, c_star):
    c = validate_assignments(c)
    n = c.size
    if not 0 <= c_star < n:
        raise ValueError(f"proposed link {c_star} outside [0, {n - 1}]")
    part = partition_from_assignments(c)
    original = frozenset(part.cluster_of(i))
    moving = moving_set(c, i)
    remaining = original - moving
    proposed = c.copy()
    proposed[i] = c_star
    target = frozenset(partition_from_assignments(proposed).cluster_of(i))
    kind = _classify(c_star in moving, c_star in original, not remaining)
    return MoveDecomposition(original, moving, remaining, target, kind)


class Move(NamedTuple):
    """Fast-path decomposition used inside the samplers (slot ids, not sets)."""

    kind: MoveClass
    moving: set
    origin: int
    target: int  # slot joined on death/transfer, -1 otherwise


class LinkGraph:
    """Mutable link graph with incrementally maintained components.

    Clusters live in integer slots; a birth takes the smallest free slot so
    runs are reproducible. ``partition()`` gives the canonical view.
    """

    def __init__(self, c):
        c = validate_assignments(c)
        self.n = n = c.size
        self.c = [int(v) for v in c]
        self.children = [set() for _ in range(n)]
        for j, t in enumerate(self.c):
            self.children[t].add(j)
        part = partition_from_assignments(c)
        self.label = [int(v) for v in part.labels]
        self.members = {k: set(m) for k, m in enumerate(part.members)}
        self._free = list(range(part.K, n))
        heapq.heapify(self._free)

    @property
    def K(self):
        return len(self.members)

    def copy(self):
        new = LinkGraph.__new__(LinkGraph)
        new.n = self.n
        new.c = list(self.c)
        new.children = [set(s) for s in self.children]
        new.label = list(self.label)
        new.members = {k: set(m) for k, m in self.members.items()}
        new._free = list(self._free)
        return new

    def moving_set(self, i):
        return _reach_by_inlinks(self.children, i)

    def decompose(self, i, c_star, moving=None):
        if moving is None:
            moving = self.moving_set(i)
        origin = self.label[i]
        remaining_empty = len(moving) == len(self.members[origin])
        in_origin = self.label[c_star] == origin
        kind = _classify(c_star in moving, in_origin, remaining_empty)
        target = self.label[c_star] if kind in (MoveClass.DEATH, MoveClass.FIXED_TRANSFER) else -1
        return Move(kind, moving, origin, target)

    def relink(self, i, c_star, move):
        """Apply ``c[i] = c_star``; returns the slot created (birth) or freed (death)."""
        old = self.c[i]
        self.children[old].discard(i)
        self.children[c_star].add(i)
        self.c[i] = c_star
        kind = move.kind
        if kind is MoveClass.FIXED_SAME:
            return -1
        if kind is MoveClass.BIRTH:
            slot = heapq.heappop(self._free)
            self.members[move.origin] -= move.moving
            self.members[slot] = set(move.moving)
            for j in move.moving:
                self.label[j] = slot
            return slot
        self.members[move.origin] -= move.moving
        self.members[move.target] |= move.moving
        for j in move.moving:
            self.label[j] = move.target
        if kind is MoveClass.DEATH:
            del self.members[move.origin]
            heapq.heappush(self._free, move.origin)
            return move.origin
        return -1

    def partition(self):
        return partition_from_assignments(self.c)

    def assignments(self):
        return np.asarray(self.c, dtype=np.int64)
