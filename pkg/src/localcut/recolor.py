"""Terminal recoloring: swap a balanced independent set of miscolored vertices.

In the bisection direction a red vertex is miscolored when most of its
neighbors are blue; flipping it alone removes at least one cut edge.  In the
max-cut direction (``objective="max"``) the roles are reversed and each flip
adds at least one cut edge.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import rng
from .coloring import BLUE, RED, ColoringAssignment, cut_size, neighbor_colors
from .graphs import Graph
from .tree import bihole_fraction

MAX_EXACT_VERTICES = 30


def _check_objective(objective: str) -> None:
    if objective not in ("min", "max"):
        raise ValueError(f"objective must be 'min' or 'max', not {objective!r}")


def miscolored_sets(g: Graph, coloring: ColoringAssignment, criterion: str = "terminal",
                    objective: str = "min") -> Tuple[np.ndarray, np.ndarray]:
    """Sorted vertex arrays (left = red, right = blue) of miscolored vertices.

    ``terminal``: the opposite color (same color for ``max``) holds a strict
    majority of the neighbors.  ``strict``: additionally colored at an
    asymmetric step, with the tightest majority d//2 + 1.
    """
    _check_objective(objective)
    if criterion not in ("terminal", "strict"):
        raise ValueError(f"unknown criterion {criterion!r}")
    if not coloring.fully_colored():
        raise ValueError("miscolored sets need a fully colored graph")
    red_nb, blue_nb = neighbor_colors(g, coloring.color)
    red = coloring.color == RED
    blue = coloring.color == BLUE
    # for each vertex, the neighbor count that flipping would turn into uncut edges
    against = np.where(red, blue_nb, red_nb) if objective == "min" else np.where(red, red_nb, blue_nb)
    if criterion == "terminal":
        bad = 2 * against > g.degrees
    else:
        bad = coloring.strict & (against == g.degrees // 2 + 1)
    return np.nonzero(red & bad)[0], np.nonzero(blue & bad)[0]


@dataclass
class ConflictGraph:
    left: np.ndarray
    right: np.ndarray
    edges: np.ndarray  # host-graph vertex pairs

    @property
    def vertices(self) -> np.ndarray:
        return np.concatenate([self.left, self.right])

    def degrees(self) -> Dict[int, int]:
        deg = {int(v): 0 for v in self.vertices}
        for a, b in self.edges:
            deg[int(a)] += 1
            deg[int(b)] += 1
        return deg

    @property
    def max_degree(self) -> int:
        return max(self.degrees().values(), default=0)

    def isolated_fraction(self) -> float:
        deg = self.degrees()
        return sum(1 for x in deg.values() if x == 0) / len(deg) if deg else 0.0


def build_conflict_graph(g: Graph, left: Sequence[int], right: Sequence[int],
                         same_side: bool = False) -> ConflictGraph:
    """Host edges between ``left`` and ``right``; with ``same_side`` also edges inside each side."""
    left = np.asarray(left, dtype=np.int64)
    right = np.asarray(right, dtype=np.int64)
    if np.intersect1d(left, right).size:
        raise ValueError("left and right must be disjoint")
    in_l = np.zeros(g.n, dtype=bool)
    in_r = np.zeros(g.n, dtype=bool)
    in_l[left] = True
    in_r[right] = True
    u, v = g.edges[:, 0], g.edges[:, 1]
    keep = (in_l[u] & in_r[v]) | (in_r[u] & in_l[v])
    if same_side:
        keep |= (in_l[u] & in_l[v]) | (in_r[u] & in_r[v])
    return ConflictGraph(left, right, g.edges[keep])


@dataclass
class SwapSet:
    red: np.ndarray
    blue: np.ndarray

    @property
    def size(self) -> int:
        return len(self.red) + len(self.blue)


def _adjacency_sets(cg: ConflictGraph) -> Dict[int, set]:
    adj = {int(v): set() for v in cg.vertices}
    for a, b in cg.edges:
        adj[int(a)].add(int(b))
        adj[int(b)].add(int(a))
    return adj


def is_independent(cg: ConflictGraph, vertices: Sequence[int]) -> bool:
    chosen = set(int(x) for x in vertices)
    return not any(int(a) in chosen and int(b) in chosen for a, b in cg.edges)


def _greedy_once(cg: ConflictGraph, adj: Dict[int, set], gen: np.random.Generator) -> SwapSet:
    """Random-order greedy that always extends the side with fewer chosen vertices.

    Vertices on the larger side would be trimmed anyway and only block the
    other side, so the search stops once the smaller side is blocked.
    """
    queues = [list(gen.permutation(cg.left)), list(gen.permutation(cg.right))]
    chosen: List[List[int]] = [[], []]
    blocked = set()
    while True:
        k0, k1 = len(chosen[0]), len(chosen[1])
        side = int(gen.integers(2)) if k0 == k1 else int(k1 < k0)
        q = queues[side]
        while q and int(q[-1]) in blocked:
            q.pop()
        if not q:
            break
        v = int(q.pop())
        chosen[side].append(v)
        blocked |= adj[v]
    k = min(len(chosen[0]), len(chosen[1]))
    red = np.sort(np.array(chosen[0][:k], dtype=np.int64))
    blue = np.sort(np.array(chosen[1][:k], dtype=np.int64))
    return SwapSet(red, blue)


def _exact(cg: ConflictGraph) -> SwapSet:
    """Maximum balanced independent set by branch and bound over bitmasks."""
    verts = [int(v) for v in cg.vertices]
    idx = {v: i for i, v in enumerate(verts)}
    nl = len(cg.left)
    left_mask = (1 << nl) - 1
    nbr = [0] * len(verts)
    for a, b in cg.edges:
        i, j = idx[int(a)], idx[int(b)]
        nbr[i] |= 1 << j
        nbr[j] |= 1 << i
    best = [0, 0]  # (balanced size per side, chosen mask)

    def popcount(x):
        return bin(x).count("1")

    def search(avail, chosen):
        a = popcount(chosen & left_mask)
        b = popcount(chosen & ~left_mask)
        # isolated available vertices can always be added
        free = 0
        x = avail
        while x:
            low = x & -x
            i = low.bit_length() - 1
            if not nbr[i] & avail:
                free |= low
            x ^= low
        if free:
            chosen |= free
            avail &= ~free
            a = popcount(chosen & left_mask)
            b = popcount(chosen & ~left_mask)
        if min(a, b) > best[0]:
            best[0], best[1] = min(a, b), chosen
        if not avail:
            return
        if min(a + popcount(avail & left_mask), b + popcount(avail & ~left_mask)) <= best[0]:
            return
        # branch on the available vertex with most available neighbors
        x, pick, pick_deg = avail, -1, -1
        while x:
            low = x & -x
            i = low.bit_length() - 1
            deg = popcount(nbr[i] & avail)
            if deg > pick_deg:
                pick, pick_deg = i, deg
            x ^= low
        bit = 1 << pick
        search(avail & ~bit & ~nbr[pick], chosen | bit)
        search(avail & ~bit, chosen)

    search((1 << len(verts)) - 1, 0)
    k, mask = best
    red = [verts[i] for i in range(nl) if mask >> i & 1][:k]
    blue = [verts[i] for i in range(nl, len(verts)) if mask >> i & 1][:k]
    return SwapSet(np.array(sorted(red), dtype=np.int64), np.array(sorted(blue), dtype=np.int64))


def find_balanced_independent_set(cg: ConflictGraph, strategy: str = "greedy", seed: int = 0,
                                  restarts: int = 8) -> SwapSet:
    if strategy == "exact":
        if len(cg.left) + len(cg.right) > MAX_EXACT_VERTICES:
            raise ValueError(f"exact search limited to {MAX_EXACT_VERTICES} vertices")
        out = _exact(cg)
    elif strategy == "greedy":
        adj = _adjacency_sets(cg)
        out = None
        for r in range(restarts):
            cand = _greedy_once(cg, adj, rng.generator(seed, "bihole-greedy", r))
            if out is None or cand.size > out.size:
                out = cand
    else:
        raise ValueError(f"unknown strategy {strategy!r}")
    if len(out.red) != len(out.blue) or not is_independent(cg, np.concatenate([out.red, out.blue])):
        raise AssertionError("search returned an invalid swap set")
    return out


def bihole_benchmark(cg: ConflictGraph, delta: Optional[int] = None) -> Optional[float]:
    """Guaranteed per-side bihole size for the conflict graph's max degree, if a constant is known."""
    delta = cg.max_degree if delta is None else delta
    try:
        mu = bihole_fraction(max(delta, 3))
    except ValueError:
        return None
    return mu * min(len(cg.left), len(cg.right))


@dataclass
class SwapResult:
    coloring: ColoringAssignment
    deltas: List[int]


def apply_swaps(g: Graph, coloring: ColoringAssignment, swaps: SwapSet, objective: str = "min") -> SwapResult:
    """Flip the swap set one vertex at a time, recording each cut change.

    The set is rejected before any mutation unless it is balanced, its red
    part is red, its blue part is blue, and no two of its vertices are
    adjacent in a way that could change a later flip's gain (across classes
    for ``min``, anywhere for ``max``).
    """
    _check_objective(objective)
    red = np.asarray(swaps.red, dtype=np.int64)
    blue = np.asarray(swaps.blue, dtype=np.int64)
    if len(red) != len(blue):
        raise ValueError("swap set is unbalanced")
    if (coloring.color[red] != RED).any() or (coloring.color[blue] != BLUE).any():
        raise ValueError("swap set sides do not match the coloring")
    cg = build_conflict_graph(g, red, blue, same_side=(objective == "max"))
    if len(cg.edges):
        raise ValueError("swap set is not independent")
    out = coloring.copy()
    c = out.color
    deltas = []
    for v in np.concatenate([red, blue]):
        nb = c[g.neighbors(v)]
        same = int((nb == c[v]).sum())
        deltas.append(same - (len(nb) - same))
        c[v] = BLUE if c[v] == RED else RED
    return SwapResult(out, deltas)


@dataclass
class RecolorReport:
    criterion: str
    objective: str
    n_left: int
    n_right: int
    conflict_max_degree: int
    swap_size: int
    cut_before: int
    cut_after: int
    deltas_histogram: Dict[int, int]
    isolated_fraction: float
    benchmark: Optional[float]

    def to_dict(self) -> dict:
        return {"criterion": self.criterion, "objective": self.objective, "|left|": self.n_left,
                "|right|": self.n_right, "conflict_max_degree": self.conflict_max_degree,
                "|I|": self.swap_size, "cut_before": self.cut_before, "cut_after": self.cut_after,
                "deltas_histogram": {str(k): v for k, v in sorted(self.deltas_histogram.items())},
                "isolated_fraction": self.isolated_fraction, "bihole_benchmark_per_side": self.benchmark}


def recolor(g: Graph, coloring: ColoringAssignment, criterion: str = "strict", strategy: str = "greedy",
            seed: int = 0, objective: str = "min") -> Tuple[ColoringAssignment, RecolorReport, List[int]]:
    """Full recoloring phase; returns the new coloring, a report and the per-flip deltas."""
    left, right = miscolored_sets(g, coloring, criterion, objective)
    cg = build_conflict_graph(g, left, right, same_side=(objective == "max"))
    swaps = find_balanced_independent_set(cg, strategy, seed)
    before = cut_size(g, coloring)
    res = apply_swaps(g, coloring, swaps, objective)
    after = cut_size(g, res.coloring)
    hist: Dict[int, int] = {}
    for x in res.deltas:
        hist[x] = hist.get(x, 0) + 1
    report = RecolorReport(criterion, objective, len(left), len(right), cg.max_degree, swaps.size,
                           before, after, hist, cg.isolated_fraction(), bihole_benchmark(cg))
    return res.coloring, report, res.deltas
