"""Internal (friendly) partitions: verification and a local search."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from . import rng
from .graphs import Graph

MAX_SIDEWAYS = 100


@dataclass
class Partition:
    """Two-class partition as a boolean side array (True = class B)."""

    side: np.ndarray

    def __post_init__(self):
        self.side = np.asarray(self.side, dtype=bool)

    @classmethod
    def from_sets(cls, n: int, a, b) -> "Partition":
        a = np.asarray(sorted(a), dtype=np.int64)
        b = np.asarray(sorted(b), dtype=np.int64)
        if np.intersect1d(a, b).size or len(a) + len(b) != n or len(np.union1d(a, b)) != n:
            raise ValueError("A and B must be disjoint and cover the vertex set")
        side = np.zeros(n, dtype=bool)
        side[b] = True
        return cls(side)

    @property
    def A(self) -> np.ndarray:
        return np.nonzero(~self.side)[0]

    @property
    def B(self) -> np.ndarray:
        return np.nonzero(self.side)[0]

    def class_sizes(self) -> Tuple[int, int]:
        nb = int(self.side.sum())
        return len(self.side) - nb, nb

    def swapped(self) -> "Partition":
        return Partition(~self.side)


@dataclass
class InternalCheck:
    ok: bool
    violations: List[Tuple[int, int, int]] = field(default_factory=list)
    reason: Optional[str] = None
    class_sizes: Tuple[int, int] = (0, 0)

    def certificate(self) -> dict:
        return {"ok": self.ok, "class_sizes": list(self.class_sizes),
                "violations": [list(v) for v in self.violations], "reason": self.reason}


def own_other_counts(g: Graph, p: Partition) -> Tuple[np.ndarray, np.ndarray]:
    other = g.neighbor_count(~p.side) * p.side + g.neighbor_count(p.side) * ~p.side
    return g.degrees - other, other


def check_internal(g: Graph, p: Partition) -> InternalCheck:
    if len(p.side) != g.n:
        raise ValueError("partition size does not match the graph")
    sizes = p.class_sizes()
    if min(sizes) == 0:
        return InternalCheck(False, [], "empty class", sizes)
    own, other = own_other_counts(g, p)
    bad = np.nonzero(own < other)[0]
    viol = [(int(v), int(own[v]), int(other[v])) for v in bad]
    return InternalCheck(not viol, viol, None if not viol else "vertex with more neighbors across", sizes)


def violation_count(g: Graph, p: Partition) -> int:
    own, other = own_other_counts(g, p)
    return int(np.maximum(0, other - own).sum())


def _move_deltas(g: Graph, side: np.ndarray, own: np.ndarray, other: np.ndarray) -> np.ndarray:
    """Change in total violation when each single vertex switches class."""
    def pen(o, x):
        return np.maximum(0, x - o)

    # the mover itself swaps own/other
    delta = pen(other, own) - pen(own, other)
    # each neighbor w of v: if same class, w loses one own and gains one other; else the reverse
    same = side[g.rows] == side[g.indices]
    w = g.indices
    ow, xw = own[w], other[w]
    after = np.where(same, pen(ow - 1, xw + 1), pen(ow + 1, xw - 1))
    delta += np.bincount(g.rows, weights=after - pen(ow, xw), minlength=g.n).astype(np.int64)
    return delta


def internal_search(g: Graph, start: Partition, max_moves: int = 10_000, seed: int = 0,
                    sideways_cap: int = MAX_SIDEWAYS) -> Optional[Partition]:
    """Hill climbing on the total violation count by single-vertex moves.

    Ties are broken uniformly at random; at most ``sideways_cap`` consecutive
    zero-gain moves are allowed.  Any returned partition passes check_internal.
    """
    side = start.side.copy()
    gen = rng.generator(seed, "internal-search")
    sideways = 0
    for _ in range(max_moves + 1):
        p = Partition(side)
        if check_internal(g, p).ok:
            return p
        own, other = own_other_counts(g, p)
        delta = _move_deltas(g, side, own, other)
        nb = int(side.sum())
        # keep both classes nonempty
        if nb == 1:
            delta[side] = np.iinfo(np.int64).max
        if g.n - nb == 1:
            delta[~side] = np.iinfo(np.int64).max
        best = delta.min()
        if best > 0 or (best == 0 and sideways >= sideways_cap):
            return None
        sideways = sideways + 1 if best == 0 else 0
        v = gen.choice(np.nonzero(delta == best)[0])
        side[v] = not side[v]
    return None


def exhaustive_internal(g: Graph, limit: int = 20) -> Optional[Partition]:
    """Any internal partition of a small graph, by enumerating all bipartitions."""
    if g.n > limit:
        raise ValueError(f"exhaustive check limited to {limit} vertices")
    for mask in range(1, 2 ** (g.n - 1)):
        side = np.array([(mask >> i) & 1 for i in range(g.n)], dtype=bool)
        p = Partition(side)
        if check_internal(g, p).ok:
            return p
    return None


def adjacent_pair_split(n: int) -> Partition:
    """Cycle split into two arcs of consecutive vertices."""
    return Partition(np.arange(n) >= n // 2)

