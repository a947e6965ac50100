"""Law of the colored two-neighborhood of the root of the infinite d-regular tree.

A state is the root status together with the multiset of its d neighbor
descriptors.  A descriptor is ``R``/``B`` for a colored neighbor, or
``Open(r, b)`` for an uncolored one whose outer (non-root) neighbors hold
r red and b blue vertices.  Colored neighbors forget their outer colors.

Measures are stored densely as a ``(5, S)`` array: one row per root status
(see ``ROOT_STATUSES``) and one column per canonical neighbor multiset.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from functools import lru_cache
from itertools import combinations_with_replacement
from typing import Dict, Iterator, List, Optional, Tuple

import numba
import numpy as np
import scipy.sparse as sp

from .vertex_types import StepParams, VertexType, dominant_type, multiplicity

log = logging.getLogger(__name__)

MIN_D, MAX_D = 3, 7
MODES = ("exact", "simplified")
# transitions need a linear int64 key over d+1-ary counts; d=7 overflows it
MAX_TRANSITION_D = 6

UNCOLORED, RED, BLUE = "U", "R", "B"


@dataclass(frozen=True, order=True)
class RootStatus:
    color: str
    strict: bool = False

    def __post_init__(self):
        if self.color not in (UNCOLORED, RED, BLUE):
            raise ValueError(f"bad root color {self.color!r}")
        if self.color == UNCOLORED and self.strict:
            raise ValueError("an uncolored root cannot be strict")


ROOT_STATUSES = (
    RootStatus(UNCOLORED),
    RootStatus(RED, True),
    RootStatus(RED, False),
    RootStatus(BLUE, True),
    RootStatus(BLUE, False),
)
U_ROW, R_STRICT, R_LOOSE, B_STRICT, B_LOOSE = range(5)
_ROW_SWAP = np.array([U_ROW, B_STRICT, B_LOOSE, R_STRICT, R_LOOSE])


@dataclass(frozen=True, order=True)
class Descriptor:
    """A neighbor of the root: colored (``R``/``B``) or open with outer counts."""

    kind: str
    outer_red: int = 0
    outer_blue: int = 0

    @classmethod
    def open(cls, r: int, b: int) -> "Descriptor":
        return cls("O", r, b)

    def __str__(self):
        return self.kind if self.kind != "O" else f"O({self.outer_red},{self.outer_blue})"


@dataclass(frozen=True)
class TreeState:
    root: RootStatus
    neighbors: Tuple[Descriptor, ...]

    def __str__(self):
        flag = "*" if self.root.strict else ""
        return f"{self.root.color}{flag}; " + ", ".join(map(str, self.neighbors))


def check_degree(d: int, hi: int = MAX_D) -> None:
    if not (MIN_D <= d <= hi):
        raise ValueError(f"degree d={d} outside the supported range {MIN_D}..{hi}")


def descriptor_alphabet(d: int) -> List[Descriptor]:
    """Canonical order: R < B < Open(r, b) lexicographic, r + b <= d - 1."""
    check_degree(d)
    opens = [Descriptor.open(r, b) for r in range(d) for b in range(d - r)]
    return [Descriptor(RED), Descriptor(BLUE)] + opens


def state_count(d: int) -> int:
    a = len(descriptor_alphabet(d))
    return len(ROOT_STATUSES) * math.comb(a + d - 1, d)


def enumerate_states(d: int) -> Iterator[TreeState]:
    """All canonical states, root-status major, multisets in lexicographic order."""
    alphabet = descriptor_alphabet(d)
    for root in ROOT_STATUSES:
        for combo in combinations_with_replacement(alphabet, d):
            yield TreeState(root, combo)


class TreeSpace:
    """Index tables for the neighbor multisets of a given degree."""

    def __init__(self, d: int):
        check_degree(d, MAX_TRANSITION_D)
        self.d = d
        self.alphabet = descriptor_alphabet(d)
        self.A = A = len(self.alphabet)
        self.letter_index = {x: i for i, x in enumerate(self.alphabet)}
        self.open_letters = list(range(2, A))
        self.outer = np.array([(-1, -1), (-1, -1)]
                              + [(x.outer_red, x.outer_blue) for x in self.alphabet[2:]], dtype=np.int64)
        self.free_slots = np.where(self.outer[:, 0] >= 0, d - 1 - self.outer.sum(axis=1), 0)

        self.multisets = np.array(list(combinations_with_replacement(range(A), d)), dtype=np.int16)
        self.S = S = len(self.multisets)
        counts = np.zeros((S, A), dtype=np.int64)
        for j in range(d):
            np.add.at(counts, (np.arange(S), self.multisets[:, j]), 1)
        self.counts = counts
        self.n_red = counts[:, 0]
        self.n_blue = counts[:, 1]
        self.n_open = d - self.n_red - self.n_blue

        # counts of the last letter are implied by the multiset size
        self.weights = np.zeros(A, dtype=np.int64)
        self.weights[:-1] = (d + 1) ** np.arange(A - 1, dtype=np.int64)
        self.keys = counts @ self.weights
        self._order = np.argsort(self.keys, kind="stable")
        self._sorted_keys = self.keys[self._order]

        swap_letter = np.empty(A, dtype=np.int64)
        for i, x in enumerate(self.alphabet):
            if x.kind == RED:
                swap_letter[i] = 1
            elif x.kind == BLUE:
                swap_letter[i] = 0
            else:
                swap_letter[i] = self.letter_index[Descriptor.open(x.outer_blue, x.outer_red)]
        swapped = np.zeros_like(counts)
        swapped[:, swap_letter] = counts
        self.swap = self.lookup(swapped @ self.weights)

        self._exact_maps = None

    def lookup(self, keys: np.ndarray) -> np.ndarray:
        pos = np.searchsorted(self._sorted_keys, keys)
        pos = np.minimum(pos, self.S - 1)
        if not np.array_equal(self._sorted_keys[pos], keys):
            raise KeyError("key does not encode a multiset of this space")
        return self._order[pos]

    def open_index(self, r: int, b: int) -> int:
        return self.letter_index[Descriptor.open(r, b)]

    def state_index(self, state: TreeState) -> Tuple[int, int]:
        row = ROOT_STATUSES.index(state.root)
        c = np.zeros(self.A, dtype=np.int64)
        for x in state.neighbors:
            c[self.letter_index[x]] += 1
        if c.sum() != self.d:
            raise ValueError(f"state has {c.sum()} neighbors, expected {self.d}")
        return row, int(self.lookup(np.array([c @ self.weights]))[0])

    def state_at(self, row: int, col: int) -> TreeState:
        return TreeState(ROOT_STATUSES[row], tuple(self.alphabet[i] for i in self.multisets[col]))

    def destinations(self, a: int) -> List[int]:
        """Letters an open letter can turn into in one step (itself included)."""
        r, b = self.outer[a]
        u = self.free_slots[a]
        return [0, 1] + [self.open_index(r + i, b + j) for i in range(u + 1) for j in range(u + 1 - i)]

    def processing_order(self) -> List[int]:
        # each open letter only moves to colored letters or to letters with
        # more colored outer slots, so larger outer totals go first
        return sorted(self.open_letters, key=lambda a: -int(self.outer[a].sum()))

    @property
    def exact_maps(self) -> List["_LetterMap"]:
        if self._exact_maps is None:
            self._exact_maps = [_LetterMap.build(self, a) for a in self.processing_order()]
        return self._exact_maps


def _multinomial(parts) -> int:
    out, total = 1, 0
    for p in parts:
        total += p
        out *= math.comb(total, p)
    return out


@dataclass
class _LetterMap:
    """Sparse linear map replacing every copy of one letter by iid draws.

    ``matrix`` is (destination, source); its data is refreshed per kernel
    from the per-pattern probabilities.
    """

    letter: int
    dests: np.ndarray
    patterns: np.ndarray  # (P, len(dests)) draw counts
    coef: np.ndarray  # multinomial coefficients
    pattern_of_entry: np.ndarray
    matrix: sp.csr_matrix

    @classmethod
    def build(cls, space: TreeSpace, a: int) -> "_LetterMap":
        dests = np.array(space.destinations(a), dtype=np.int64)
        nd = len(dests)
        pats, coefs = [], []
        rows, cols, pids = [], [], []
        base = 0
        for k in range(space.d + 1):
            src = np.nonzero(space.counts[:, a] == k)[0]
            block = np.zeros((math.comb(nd + k - 1, k), nd), dtype=np.int64)
            for p, combo in enumerate(combinations_with_replacement(range(nd), k)):
                for j in combo:
                    block[p, j] += 1
            pats.append(block)
            coefs.append([_multinomial(row) for row in block])
            if len(src) == 0:
                base += len(block)
                continue
            pat_keys = block @ space.weights[dests]
            dst_keys = space.keys[src][:, None] - k * space.weights[a] + pat_keys[None, :]
            dst = space.lookup(dst_keys.ravel())
            rows.append(dst)
            cols.append(np.repeat(src, len(block)))
            pids.append(np.tile(np.arange(base, base + len(block)), len(src)))
            base += len(block)
        rows = np.concatenate(rows)
        cols = np.concatenate(cols)
        pids = np.concatenate(pids)
        m = sp.csr_matrix(((pids + 1).astype(np.float64), (rows, cols)), shape=(space.S, space.S))
        m.sort_indices()
        pattern_of_entry = np.rint(m.data).astype(np.int64) - 1
        return cls(a, dests, np.concatenate(pats), np.array(np.concatenate(coefs), dtype=np.float64),
                   pattern_of_entry, m)

    def apply(self, kernel: np.ndarray, v: np.ndarray) -> np.ndarray:
        row = kernel[self.letter, self.dests]
        if row[self.self_slot] == 1.0 and np.count_nonzero(row) == 1:
            return v
        probs = _pattern_probs(self.patterns, self.coef, row)
        m = self.matrix
        return _pattern_matvec(m.indptr, m.indices, self.pattern_of_entry, probs, v)

    @property
    def self_slot(self) -> int:
        return int(np.nonzero(self.dests == self.letter)[0][0])


@numba.njit(cache=True)
def _pattern_probs(patterns, coef, row):
    out = coef.copy()
    for p in range(patterns.shape[0]):
        for j in range(patterns.shape[1]):
            for _ in range(patterns[p, j]):
                out[p] *= row[j]
    return out


@numba.njit(cache=True)
def _pattern_matvec(indptr, indices, pid, probs, v):
    """(matrix with data probs[pid]) @ v, without materializing the data."""
    n, k = len(indptr) - 1, v.shape[1]
    out = np.zeros((n, k))
    for i in range(n):
        for e in range(indptr[i], indptr[i + 1]):
            w = probs[pid[e]]
            j = indices[e]
            for c in range(k):
                out[i, c] += w * v[j, c]
    return out


class Measure:
    """Probability measure over canonical tree states of one degree."""

    def __init__(self, space: TreeSpace, mass: np.ndarray):
        if mass.shape != (len(ROOT_STATUSES), space.S):
            raise ValueError("mass array has the wrong shape")
        self.space = space
        self.mass = mass

    @property
    def d(self) -> int:
        return self.space.d

    def total(self) -> float:
        return float(math.fsum(self.mass.ravel()))

    def swapped(self) -> "Measure":
        """Image under the global red/blue swap."""
        out = np.empty_like(self.mass)
        out[_ROW_SWAP] = self.mass[:, np.argsort(self.space.swap)]
        return Measure(self.space, out)

    def symmetry_defect(self) -> float:
        return float(np.max(np.abs(self.mass - self.swapped().mass)))

    def __getitem__(self, state: TreeState) -> float:
        row, col = self.space.state_index(state)
        return float(self.mass[row, col])

    def items(self, threshold: float = 0.0) -> Iterator[Tuple[TreeState, float]]:
        rows, cols = np.nonzero(np.abs(self.mass) > threshold)
        for r, c in zip(rows, cols):
            yield self.space.state_at(r, c), float(self.mass[r, c])

    def to_dict(self, threshold: float = 0.0) -> Dict[TreeState, float]:
        return dict(self.items(threshold))

    @classmethod
    def from_dict(cls, space: TreeSpace, masses: Dict[TreeState, float]) -> "Measure":
        arr = np.zeros((len(ROOT_STATUSES), space.S))
        for state, m in masses.items():
            arr[space.state_index(state)] += m
        return cls(space, arr)

    def colored_root_mass(self) -> float:
        return float(self.mass[1:].sum())

    def uncolored_root_mass(self) -> float:
        return float(self.mass[U_ROW].sum())

    def red_root_mass(self) -> float:
        return float(self.mass[R_STRICT].sum() + self.mass[R_LOOSE].sum())

    def red_neighbor_mass(self) -> float:
        """P(a fixed neighbor of the root is red)."""
        return float((self.mass.sum(axis=0) * self.space.n_red).sum() / self.d)

    def type_masses(self) -> Dict[VertexType, float]:
        """Mass of uncolored roots by unordered type."""
        u = self.mass[U_ROW]
        lo = np.minimum(self.space.n_red, self.space.n_blue)
        hi = np.maximum(self.space.n_red, self.space.n_blue)
        out: Dict[VertexType, float] = {}
        for a in range(self.d + 1):
            for b in range(a, self.d + 1 - a):
                sel = (lo == a) & (hi == b)
                if sel.any():
                    out[VertexType(a, b)] = float(u[sel].sum())
        return out

    def fully_colored(self, tol: float = 0.0) -> bool:
        return (self.mass[U_ROW].sum() <= tol
                and float((self.mass.sum(axis=0) * self.space.n_open).sum()) <= tol)


@lru_cache(maxsize=None)
def tree_space(d: int) -> TreeSpace:
    return TreeSpace(d)


def initial_measure(d: int) -> Measure:
    space = tree_space(d)
    mass = np.zeros((len(ROOT_STATUSES), space.S))
    counts = np.zeros(space.A, dtype=np.int64)
    counts[space.open_index(0, 0)] = d
    mass[U_ROW, space.lookup(np.array([counts @ space.weights]))[0]] = 1.0
    return Measure(space, mass)


def root_type_mass(mu: Measure, D) -> float:
    D = D if isinstance(D, VertexType) else VertexType.of(*D)
    return mu.type_masses().get(D, 0.0)


def uncolored_edge_mass(mu: Measure) -> float:
    """P(root and one fixed neighbor are both uncolored)."""
    return float((mu.mass[U_ROW] * mu.space.n_open).sum() / mu.d)


def step_thresholds(mu_prev: Measure, D: VertexType, eps: float, d: Optional[int] = None) -> Tuple[float, float]:
    d = mu_prev.d if d is None else d
    mass = root_type_mass(mu_prev, D)
    if mass < eps:
        raise ValueError(f"dominant type {D} carries mass {mass} < eps={eps}")
    edge = uncolored_edge_mass(mu_prev)
    if edge <= 0:
        raise ValueError("no uncolored edge mass left")
    q = multiplicity(D) * (eps / 2) / mass
    q_hat = ((d - D.size) / d * eps / 2) / edge
    return q, q_hat


def _coloring_probs(r, b, params: Optional[StepParams]):
    """P(red), P(blue) for uncolored vertices with r red and b blue neighbors."""
    r = np.asarray(r)
    b = np.asarray(b)
    pr = np.zeros(np.broadcast(r, b).shape)
    pb = np.zeros_like(pr)
    if params is None:
        return pr, pb
    D, q = params.dominant, params.q
    dom = (np.minimum(r, b) == D.lo) & (np.maximum(r, b) == D.hi)
    if params.multiplicity == 1:
        pr[dom] = q
        pb[dom] = q
    else:
        pr[dom & (r > b)] = q
        pb[dom & (b > r)] = q
    return pr, pb


def neighbor_kernel(space: TreeSpace, root_color: str, params: Optional[StepParams],
                    q_hat: float, first_order: bool = False) -> np.ndarray:
    """Per-descriptor transition matrix for one step, given the root's color.

    With ``first_order`` an open neighbor gains at most one colored outer
    neighbor per step (probability u*q_hat per color); outcomes where two or
    more of its free outer slots get colored are folded into staying put.
    """
    A, d = space.A, space.d
    K = np.zeros((A, A))
    K[0, 0] = K[1, 1] = 1.0
    r = space.outer[2:, 0] + (root_color == RED)
    b = space.outer[2:, 1] + (root_color == BLUE)
    pr, pb = _coloring_probs(r, b, params)
    stay_open = 1.0 - 2.0 * q_hat
    for i, a in enumerate(space.open_letters):
        K[a, 0] = pr[i]
        K[a, 1] = pb[i]
        stay = 1.0 - pr[i] - pb[i]
        ro, bo = space.outer[a]
        u = space.free_slots[a]
        if first_order:
            K[a, a] = stay * (1.0 - 2.0 * u * q_hat)
            if u:
                K[a, space.open_index(ro + 1, bo)] = stay * u * q_hat
                K[a, space.open_index(ro, bo + 1)] = stay * u * q_hat
            continue
        for x in range(u + 1):
            for y in range(u + 1 - x):
                w = _multinomial((x, y, u - x - y)) * q_hat ** (x + y) * stay_open ** (u - x - y)
                K[a, space.open_index(ro + x, bo + y)] = stay * w
    return K


def fair_coin_kernel(space: TreeSpace) -> np.ndarray:
    K = np.zeros((space.A, space.A))
    K[0, 0] = K[1, 1] = 1.0
    K[2:, 0] = K[2:, 1] = 0.5
    return K


def _apply_exact(space: TreeSpace, kernel: np.ndarray, cols: np.ndarray) -> np.ndarray:
    v = np.ascontiguousarray(cols, dtype=np.float64)
    for lm in space.exact_maps:
        v = lm.apply(kernel, v)
    return v


def transition_step(mu_prev: Measure, params: StepParams, mode: str = "exact") -> Measure:
    space = mu_prev.space
    m = mu_prev.mass
    pr, pb = _coloring_probs(space.n_red, space.n_blue, params)
    strict = params.multiplicity == 2
    new = np.zeros_like(m)
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    fo = mode == "simplified"
    u = m[U_ROW]
    cols_u = np.stack([u * (1.0 - pr - pb), u * pr, u * pb], axis=1)
    out_u = _apply_exact(space, neighbor_kernel(space, UNCOLORED, params, params.q_hat, fo), cols_u)
    out_r = _apply_exact(space, neighbor_kernel(space, RED, params, params.q_hat, fo), m[[R_STRICT, R_LOOSE]].T)
    out_b = _apply_exact(space, neighbor_kernel(space, BLUE, params, params.q_hat, fo), m[[B_STRICT, B_LOOSE]].T)
    new[U_ROW] = out_u[:, 0]
    new[[R_STRICT, R_LOOSE]] = out_r.T
    new[[B_STRICT, B_LOOSE]] = out_b.T
    new[R_STRICT if strict else R_LOOSE] += out_u[:, 1]
    new[B_STRICT if strict else B_LOOSE] += out_u[:, 2]
    return Measure(space, new)


def finalize_random_coloring(mu: Measure) -> Measure:
    """Color every remaining uncolored root and neighbor by a fair coin."""
    space = mu.space
    K = fair_coin_kernel(space)
    m = mu.mass
    new = np.zeros_like(m)
    out = _apply_exact(space, K, m.T)
    new[1:] = out[:, 1:].T
    new[R_LOOSE] += 0.5 * out[:, U_ROW]
    new[B_LOOSE] += 0.5 * out[:, U_ROW]
    return Measure(space, new)


@dataclass
class StepCheck:
    t: int
    total: float
    uncolored_root: float
    symmetry: float
    neighbor_red: float
    root_red: float


def run_phase1(d: int, eps: float, mode: str = "exact", checks: Optional[List[StepCheck]] = None,
               max_steps: Optional[int] = None) -> Tuple[Measure, List[StepParams]]:
    """Run greedy steps until no type carries mass >= eps.

    When ``checks`` is a list, per-step invariant diagnostics are appended.
    """
    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0, 1)")
    mu = initial_measure(d)
    schedule: List[StepParams] = []
    limit = math.ceil(1 / eps) + 1 if max_steps is None else max_steps
    while len(schedule) < limit:
        D = dominant_type(mu.type_masses(), eps)
        if D is None:
            break
        q, q_hat = step_thresholds(mu, D, eps, d)
        params = StepParams(len(schedule) + 1, D, multiplicity(D), q, q_hat)
        mu = transition_step(mu, params, mode)
        schedule.append(params)
        if checks is not None:
            checks.append(StepCheck(params.t, mu.total(), mu.uncolored_root_mass(), mu.symmetry_defect(),
                                    mu.red_neighbor_mass(), mu.red_root_mass()))
        if params.t % 1000 == 0:
            log.info("d=%d eps=%g step %d, dominant %s, uncolored %.6f", d, eps, params.t, D,
                     mu.uncolored_root_mass())
    return mu, schedule


def cut_per_vertex(mu: Measure, d: Optional[int] = None) -> float:
    """Expected cut edges per vertex, d * P(root red, fixed neighbor blue).

    Uncolored vertices count on neither side, so on the end-of-greedy measure
    this is the cut among already colored vertices.
    """
    sp_ = mu.space
    red = mu.mass[R_STRICT] + mu.mass[R_LOOSE]
    return float(math.fsum(red * sp_.n_blue))


def miscolored_and_eligible_measures(mu: Measure, d: Optional[int] = None) -> Tuple[float, float]:
    """(miscolored, eligible) measures over fully colored neighborhoods.

    miscolored: root red with strictly more blue than red neighbors, doubled
    for the blue mirror.  eligible: the strict-root part with exactly d//2+1
    blue neighbors.
    """
    sp_ = mu.space
    d = sp_.d
    done = sp_.n_open == 0
    red = mu.mass[R_STRICT] + mu.mass[R_LOOSE]
    mis = 2.0 * math.fsum(red[done & (sp_.n_blue > sp_.n_red)])
    elig = 2.0 * math.fsum(mu.mass[R_STRICT][done & (sp_.n_blue == d // 2 + 1)])
    return float(mis), float(elig)


BIHOLE_FRACTION = {3: 0.34116, 4: 0.24716}


def bihole_fraction(delta: int) -> float:
    try:
        return BIHOLE_FRACTION[delta]
    except KeyError:
        raise ValueError(f"no bihole constant for max degree {delta}") from None


def improved_cut(cut: float, eligible: float, delta: int = 3) -> float:
    if cut < 0 or eligible < 0:
        raise ValueError("cut and eligible measure must be nonnegative")
    return cut - bihole_fraction(delta) * eligible


@dataclass
class TreeReport:
    """Table columns are measured at the end of the greedy phase; the
    ``*_after_randomization`` fields are the same statistics after the fair coin."""

    d: int
    eps: float
    mode: str
    steps_taken: int
    schedule: List[StepParams] = field(repr=False)
    cut_per_vertex: float
    miscolored_measure: float
    eligible_measure: float
    improvement: float
    improved_cut_per_vertex: float
    uncolored_after_greedy: float = 0.0
    cut_after_randomization: float = float("nan")
    miscolored_after_randomization: float = float("nan")

    _FLOATS = ("cut_per_vertex", "miscolored_measure", "eligible_measure", "improvement",
               "improved_cut_per_vertex", "uncolored_after_greedy", "cut_after_randomization",
               "miscolored_after_randomization")

    def summary(self) -> dict:
        out = {k: getattr(self, k) for k in ("d", "eps", "mode", "steps_taken")}
        for k in self._FLOATS:
            out[k] = float(getattr(self, k))
        return out


def tree_report(d: int, eps: float, mode: str = "exact", delta: Optional[int] = None,
                checks: Optional[List[StepCheck]] = None) -> TreeReport:
    mu, schedule = run_phase1(d, eps, mode, checks)
    cut = cut_per_vertex(mu)
    mis, elig = miscolored_and_eligible_measures(mu)
    delta = d // 2 + 1 if delta is None else delta
    improvement = bihole_fraction(delta) * elig if delta in BIHOLE_FRACTION else 0.0
    final = finalize_random_coloring(mu)
    mis_final, _ = miscolored_and_eligible_measures(final)
    return TreeReport(d, eps, mode, len(schedule), schedule, cut, mis, elig, improvement, cut - improvement,
                      mu.uncolored_root_mass(), cut_per_vertex(final), mis_final)
