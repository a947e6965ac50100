"""The eps-step local coloring run on a finite graph from a precomputed schedule."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import rng
from .graphs import Graph
from .tree import (B_LOOSE, B_STRICT, R_LOOSE, R_STRICT, ROOT_STATUSES, U_ROW, Measure,
                   tree_space)
from .vertex_types import StepParams, VertexType

UNCOLORED, RED, BLUE = 0, 1, 2
COLOR_NAMES = {UNCOLORED: "U", RED: "R", BLUE: "B"}


@dataclass
class ColoringAssignment:
    """Per-vertex color, coloring step (0 = never, N+1 = terminal coin) and strict flag."""

    color: np.ndarray
    step: np.ndarray
    strict: np.ndarray
    newly_colored: List[int] = field(default_factory=list)
    dominant_candidates: List[int] = field(default_factory=list)
    color_probability: List[float] = field(default_factory=list)

    @classmethod
    def blank(cls, n: int) -> "ColoringAssignment":
        return cls(np.zeros(n, dtype=np.int8), np.zeros(n, dtype=np.int32), np.zeros(n, dtype=bool))

    def copy(self) -> "ColoringAssignment":
        return ColoringAssignment(self.color.copy(), self.step.copy(), self.strict.copy(),
                                  list(self.newly_colored), list(self.dominant_candidates),
                                  list(self.color_probability))

    @property
    def n(self) -> int:
        return len(self.color)

    def class_sizes(self) -> Tuple[int, int]:
        return int((self.color == RED).sum()), int((self.color == BLUE).sum())

    def fully_colored(self) -> bool:
        return not (self.color == UNCOLORED).any()


def vertex_type(g: Graph, coloring: ColoringAssignment, v: int) -> Tuple[int, int]:
    """(#red neighbors, #blue neighbors) of v."""
    nb = coloring.color[g.neighbors(v)]
    return int((nb == RED).sum()), int((nb == BLUE).sum())


def neighbor_colors(g: Graph, color: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    return g.neighbor_count(color == RED), g.neighbor_count(color == BLUE)


def swap_intervals(s: np.ndarray, q: float) -> np.ndarray:
    """Involution exchanging [0, q] and (q, 2q]; identity elsewhere."""
    out = s.copy()
    low = s <= q
    mid = (s > q) & (s <= 2 * q)
    out[low] = s[low] + q
    out[mid] = s[mid] - q
    return out


def check_schedule(schedule: Sequence[StepParams], d: Optional[int] = None) -> None:
    for i, p in enumerate(schedule, start=1):
        if p.t != i:
            raise ValueError(f"schedule entry {i} has step index {p.t}")
        if d is not None and p.dominant.size > d:
            raise ValueError(f"dominant type {p.dominant} impossible for degree {d}")


def run_schedule(g: Graph, schedule: Sequence[StepParams], seeds, perception: str = "normal",
                 snapshots: Optional[Dict[int, ColoringAssignment]] = None) -> ColoringAssignment:
    """Synchronous rounds of the schedule, then the terminal fair coin.

    Each round reads only the previous round's colors.  ``colorblind``
    perception reads every neighbor color flipped and uses involuted seeds at
    symmetric steps (and at the terminal coin, the symmetric step with q=1/2).
    If ``snapshots`` is a dict, it is filled with copies keyed by step
    (0 = start, N = end of the greedy phase, N+1 = after the coin).
    """
    if perception not in ("normal", "colorblind"):
        raise ValueError(f"unknown perception {perception!r}")
    check_schedule(schedule, g.d)
    blind = perception == "colorblind"
    col = ColoringAssignment.blank(g.n)
    if snapshots is not None:
        snapshots[0] = col.copy()
    for p in schedule:
        red, blue = neighbor_colors(g, col.color)
        if blind:
            red, blue = blue, red
        lo, hi = np.minimum(red, blue), np.maximum(red, blue)
        dom = (col.color == UNCOLORED) & (lo == p.dominant.lo) & (hi == p.dominant.hi)
        s = seeds.step(p.t)
        if p.multiplicity == 1:
            if blind:
                s = swap_intervals(s, p.q)
            to_red = dom & (s <= p.q)
            to_blue = dom & (s > p.q) & (s <= 2 * p.q)
            prob = 2 * p.q
        else:
            hit = dom & (s <= p.q)
            to_red = hit & (red > blue)
            to_blue = hit & (blue > red)
            prob = p.q
        col.color[to_red] = RED
        col.color[to_blue] = BLUE
        changed = to_red | to_blue
        col.step[changed] = p.t
        col.strict[changed] = p.multiplicity == 2
        col.newly_colored.append(int(changed.sum()))
        col.dominant_candidates.append(int(dom.sum()))
        col.color_probability.append(prob)
        if snapshots is not None:
            snapshots[p.t] = col.copy()
    left = col.color == UNCOLORED
    t_last = len(schedule) + 1
    s = seeds.step(t_last)
    if blind:
        s = swap_intervals(s, 0.5)
    col.color[left & (s <= 0.5)] = RED
    col.color[left & (s > 0.5)] = BLUE
    col.step[left] = t_last
    if snapshots is not None:
        snapshots[t_last] = col.copy()
    return col


def cut_size(g: Graph, coloring: ColoringAssignment) -> int:
    if not coloring.fully_colored():
        raise ValueError("cut size needs a fully colored graph")
    c = coloring.color
    return int((c[g.edges[:, 0]] != c[g.edges[:, 1]]).sum())


@dataclass
class RepairResult:
    coloring: ColoringAssignment
    moves: int
    moved: np.ndarray


def balance_repair(g: Graph, coloring: ColoringAssignment, seed: int) -> RepairResult:
    """Move uniformly chosen vertices out of the larger class until the sizes differ by <= 1."""
    if not coloring.fully_colored():
        raise ValueError("balance repair needs a fully colored graph")
    out = coloring.copy()
    nr, nb = out.class_sizes()
    k = abs(nr - nb) // 2
    if k == 0:
        return RepairResult(out, 0, np.zeros(0, dtype=np.int64))
    big, small = (RED, BLUE) if nr > nb else (BLUE, RED)
    pool = np.nonzero(out.color == big)[0]
    moved = rng.generator(seed, "balance-repair").choice(pool, size=k, replace=False)
    out.color[moved] = small
    return RepairResult(out, k, np.sort(moved))


def empirical_two_ball_distribution(g: Graph, coloring: ColoringAssignment,
                                    mask: Optional[np.ndarray] = None) -> Measure:
    """Frequencies of canonical two-neighborhood states over the masked vertices.

    ``mask`` normally selects the vertices whose closed 2-ball is a tree.
    """
    space = tree_space(g.d)
    adj = g.adjacency()
    c = coloring.color
    red, blue = neighbor_colors(g, c)
    nbc = c[adj]
    outer_r = red[adj] - (c == RED)[:, None]
    outer_b = blue[adj] - (c == BLUE)[:, None]
    table = np.full((g.d, g.d), -1, dtype=np.int64)
    for r in range(g.d):
        for b in range(g.d - r):
            table[r, b] = space.open_index(r, b)
    letters = np.where(nbc == RED, 0, np.where(nbc == BLUE, 1,
                       table[np.clip(outer_r, 0, g.d - 1), np.clip(outer_b, 0, g.d - 1)]))
    sel = np.ones(g.n, dtype=bool) if mask is None else np.asarray(mask, dtype=bool)
    counts = np.zeros((g.n, space.A), dtype=np.int64)
    for j in range(g.d):
        np.add.at(counts, (np.arange(g.n), letters[:, j]), 1)
    cols = space.lookup(counts[sel] @ space.weights)
    rows = np.select([c == RED, c == BLUE], [np.where(coloring.strict, R_STRICT, R_LOOSE),
                                             np.where(coloring.strict, B_STRICT, B_LOOSE)], U_ROW)[sel]
    mass = np.bincount(rows * space.S + cols, minlength=len(ROOT_STATUSES) * space.S).astype(np.float64)
    total = mass.sum()
    if total:
        mass /= total
    return Measure(space, mass.reshape(len(ROOT_STATUSES), space.S))


def total_variation(a: Measure, b: Measure) -> float:
    return 0.5 * float(np.abs(a.mass - b.mass).sum())
