"""Random regular graphs, short-cycle census and treelikeness diagnostics."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, Iterable, List, Sequence, Tuple

import numba
import numpy as np

from . import rng


class Graph:
    """Undirected graph in CSR form; ``d`` is the nominal degree."""

    def __init__(self, n: int, edges: np.ndarray, d: int = None):
        edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        if len(edges) and (edges.min() < 0 or edges.max() >= n):
            raise ValueError("edge endpoint out of range")
        self.n = int(n)
        u, v = edges[:, 0], edges[:, 1]
        src = np.concatenate([u, v])
        dst = np.concatenate([v, u])
        order = np.lexsort((dst, src))
        self.indices = dst[order]
        self.indptr = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(np.bincount(src, minlength=n), out=self.indptr[1:])
        self.degrees = np.diff(self.indptr)
        self.rows = src[order]
        lo, hi = np.minimum(u, v), np.maximum(u, v)
        self.edges = np.unique(np.stack([lo, hi], axis=1), axis=0) if len(edges) else edges
        self._multi = len(self.edges) != len(edges)
        self.d = int(self.degrees.max()) if d is None and n else d

    @classmethod
    def from_edges(cls, n: int, edges: Iterable[Tuple[int, int]], d: int = None) -> "Graph":
        return cls(n, np.array(list(edges), dtype=np.int64), d)

    @property
    def m(self) -> int:
        return len(self.edges)

    @property
    def regular(self) -> bool:
        return bool(self.n) and bool((self.degrees == self.d).all())

    @property
    def simple(self) -> bool:
        return not self._multi and not (self.edges[:, 0] == self.edges[:, 1]).any()

    def neighbors(self, v: int) -> np.ndarray:
        return self.indices[self.indptr[v]:self.indptr[v + 1]]

    def adjacency(self) -> np.ndarray:
        """(n, d) neighbor table; only for regular graphs."""
        if not self.regular:
            raise ValueError("adjacency table needs a regular graph")
        return self.indices.reshape(self.n, self.d)

    def neighbor_count(self, mask: np.ndarray) -> np.ndarray:
        """Per vertex, the number of neighbors where ``mask`` holds."""
        return np.bincount(self.rows, weights=mask[self.indices], minlength=self.n).astype(np.int64)

    def to_text(self) -> str:
        lines = [f"{self.n} {self.d}"] + [f"{a} {b}" for a, b in self.edges]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "Graph":
        rows = [line.split() for line in text.strip().splitlines() if line.strip()]
        n, d = map(int, rows[0])
        edges = [(int(a), int(b)) for a, b in rows[1:]]
        for a, b in edges:
            if not a < b:
                raise ValueError(f"edge line '{a} {b}' must satisfy u < v")
        return cls.from_edges(n, edges, d)

    def write(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(self.to_text())

    @classmethod
    def read(cls, path) -> "Graph":
        with open(path) as fh:
            return cls.from_text(fh.read())


def sample_regular_graph(n: int, d: int, seed: int, mode: str = "reject", max_attempts: int = 100_000) -> Graph:
    """Configuration model: a uniform perfect matching of the n*d half-edges.

    ``reject`` resamples until the multigraph is simple (uniform over simple
    d-regular graphs); ``erase`` keeps the first matching and removes loops
    and repeated edges by random double-edge switchings, which preserve the
    degrees.  The switch count is stored as ``g.switchings``.
    """
    if (n * d) % 2:
        raise ValueError(f"n*d must be even (n={n}, d={d})")
    if d < 3 or n <= d:
        raise ValueError(f"need d >= 3 and n > d (n={n}, d={d})")
    if mode not in ("reject", "erase"):
        raise ValueError(f"unknown sampling mode {mode!r}")
    stubs = np.repeat(np.arange(n, dtype=np.int64), d)
    for attempt in range(max_attempts):
        perm = rng.generator(seed, "configuration-model", attempt).permutation(stubs)
        pairs = perm.reshape(-1, 2)
        loops = pairs[:, 0] == pairs[:, 1]
        if mode == "erase":
            fixed, switches = _switch_until_simple(pairs, rng.generator(seed, "switchings", attempt))
            g = Graph(n, fixed, d)
            g.switchings = switches
            return g
        if loops.any():
            continue
        lo = np.minimum(pairs[:, 0], pairs[:, 1])
        hi = np.maximum(pairs[:, 0], pairs[:, 1])
        keys = np.sort(lo * n + hi)
        if (keys[1:] == keys[:-1]).any():
            continue
        return Graph(n, np.stack([lo, hi], axis=1), d)
    raise RuntimeError(f"no simple graph after {max_attempts} attempts")


def _switch_until_simple(pairs: np.ndarray, gen: np.random.Generator, max_tries: int = 10_000_000):
    """Replace each loop or repeated edge {a,b} with a random edge {c,x} by {a,c},{b,x}
    (or {a,x},{b,c}) whenever both new edges are new and not loops."""
    pairs = np.sort(pairs, axis=1)
    count: Dict[Tuple[int, int], int] = {}
    for a, b in pairs.tolist():
        count[(a, b)] = count.get((a, b), 0) + 1
    bad = [i for i, (a, b) in enumerate(pairs.tolist()) if a == b or count[(a, b)] > 1]
    switches = 0
    tries = 0
    while bad:
        i = bad[-1]
        a, b = map(int, pairs[i])
        if a != b and count[(a, b)] == 1:
            bad.pop()  # fixed as a side effect of an earlier switch
            continue
        tries += 1
        if tries > max_tries:
            raise RuntimeError("switchings did not reach a simple graph")
        j = int(gen.integers(len(pairs)))
        c, x = map(int, pairs[j])
        if gen.random() < 0.5:
            c, x = x, c
        e1, e2 = (min(a, c), max(a, c)), (min(b, x), max(b, x))
        if j == i or a == c or b == x or e1 == e2 or count.get(e1, 0) or count.get(e2, 0):
            continue
        old_j = (min(c, x), max(c, x))
        if count[old_j] > 1 or c == x:
            continue  # keep the partner edge a good one
        for e in ((a, b), old_j):
            count[e] -= 1
        count[e1] = 1
        count[e2] = 1
        pairs[i], pairs[j] = e1, e2
        switches += 1
        bad.pop()
    return pairs, switches


def complete_graph(n: int) -> Graph:
    return Graph.from_edges(n, [(i, j) for i in range(n) for j in range(i + 1, n)])


def complete_bipartite(a: int, b: int) -> Graph:
    return Graph.from_edges(a + b, [(i, a + j) for i in range(a) for j in range(b)])


def cycle_graph(n: int) -> Graph:
    return Graph.from_edges(n, [(i, (i + 1) % n) for i in range(n)])


def petersen_graph() -> Graph:
    outer = [(i, (i + 1) % 5) for i in range(5)]
    spokes = [(i, i + 5) for i in range(5)]
    inner = [(5 + i, 5 + (i + 2) % 5) for i in range(5)]
    return Graph.from_edges(10, outer + spokes + inner)


@dataclass
class CycleCensus:
    counts: Dict[int, int]

    def __getitem__(self, k: int) -> int:
        return self.counts.get(k, 0)

    @property
    def kmax(self) -> int:
        return max(self.counts) if self.counts else 0


MAX_CYCLE_LENGTH = 12


@numba.njit(cache=True)
def _count_cycles_from(indptr, indices, kmax, out):
    n = len(indptr) - 1
    path = np.empty(kmax, dtype=np.int64)
    pos = np.empty(kmax, dtype=np.int64)
    on_path = np.zeros(n, dtype=np.bool_)
    for s in range(n):
        # cycles whose smallest vertex is s; each found twice (both directions)
        path[0] = s
        pos[0] = indptr[s]
        on_path[s] = True
        depth = 0
        while depth >= 0:
            v = path[depth]
            if pos[depth] < indptr[v + 1]:
                w = indices[pos[depth]]
                pos[depth] += 1
                if w == s:
                    if depth >= 2:
                        out[depth + 1] += 1
                elif w > s and not on_path[w] and depth + 1 < kmax:
                    depth += 1
                    path[depth] = w
                    pos[depth] = indptr[w]
                    on_path[w] = True
            else:
                on_path[v] = False
                depth -= 1


def count_cycles(g: Graph, kmax: int) -> CycleCensus:
    """Exact number of simple cycles of each length 3..kmax."""
    if not 3 <= kmax <= MAX_CYCLE_LENGTH:
        raise ValueError(f"kmax must lie in 3..{MAX_CYCLE_LENGTH}")
    out = np.zeros(kmax + 1, dtype=np.int64)
    _count_cycles_from(g.indptr, g.indices, kmax, out)
    return CycleCensus({k: int(out[k] // 2) for k in range(3, kmax + 1)})


def poisson_mean(k: int, d: int) -> float:
    """Limiting mean number of k-cycles in a random d-regular graph."""
    return (d - 1) ** k / (2 * k)


@numba.njit(cache=True)
def _ball_is_tree(indptr, indices, v, radius, closed, dist, stamp, tag, queue):
    # BFS to depth radius, then count the ball's edges
    queue[0] = v
    stamp[v] = tag
    dist[v] = 0
    head, tail = 0, 1
    while head < tail:
        x = queue[head]
        head += 1
        if dist[x] == radius:
            continue
        for p in range(indptr[x], indptr[x + 1]):
            y = indices[p]
            if stamp[y] != tag:
                stamp[y] = tag
                dist[y] = dist[x] + 1
                queue[tail] = y
                tail += 1
    twice_edges = 0
    for i in range(tail):
        x = queue[i]
        for p in range(indptr[x], indptr[x + 1]):
            y = indices[p]
            if stamp[y] == tag and (closed or dist[x] < radius or dist[y] < radius):
                twice_edges += 1
    return twice_edges == 2 * (tail - 1)


@numba.njit(cache=True)
def _treelike_mask(indptr, indices, radius, closed):
    n = len(indptr) - 1
    dist = np.zeros(n, dtype=np.int64)
    stamp = np.full(n, -1, dtype=np.int64)
    queue = np.empty(n, dtype=np.int64)
    out = np.zeros(n, dtype=np.bool_)
    for v in range(n):
        out[v] = _ball_is_tree(indptr, indices, v, radius, closed, dist, stamp, v, queue)
    return out


def treelike_mask(g: Graph, radius: int, closed: bool = True) -> np.ndarray:
    """Per vertex: is the ``radius``-ball a tree?

    ``closed``: the subgraph induced on the ball.  Otherwise only edges with
    an endpoint strictly inside the ball count, which is the neighborhood the
    cycle-coverage bound is stated for.
    """
    if radius < 1:
        raise ValueError("radius must be at least 1")
    return _treelike_mask(g.indptr, g.indices, radius, closed)


def treelike_fraction(g: Graph, radius: int, closed: bool = True) -> float:
    return float(treelike_mask(g, radius, closed).mean())


def error_radius(eps: float) -> int:
    """Ball radius that keeps the tracked two-neighborhood cycle-free for all steps."""
    return int(math.ceil(1 / eps)) + 3


def error_upper_bound(census: CycleCensus, radius: int, d: int, n: int) -> float:
    """(1/n) * sum_k X_k * k * (d-1)^(R - ceil(k/2)), clamped to [0, 1].

    Bounds the fraction of vertices whose open ``radius``-neighborhood
    (``treelike_mask(..., closed=False)``) contains a cycle.  Cycles longer
    than 2R never fit in such a neighborhood, so those terms are left out.
    """
    total = 0.0
    for k, x in census.counts.items():
        if x and k <= 2 * radius:
            total += x * k * float(d - 1) ** (radius - (k + 1) // 2)
    return min(1.0, max(0.0, total / n))
