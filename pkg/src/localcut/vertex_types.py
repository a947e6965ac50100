"""Vertex types, the greedy priority ordering and the per-step schedule entry."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Optional, Tuple, Union


@dataclass(frozen=True, order=False)
class VertexType:
    """Unordered type {r, b} of an uncolored vertex.

    Stored normalized as ``lo <= hi``; ``red_view``/``blue_view`` give the
    oriented pairs with more red resp. more blue neighbors.
    """

    lo: int
    hi: int

    def __post_init__(self):
        if self.lo < 0 or self.hi < self.lo:
            raise ValueError(f"not a normalized type: ({self.lo}, {self.hi})")

    @classmethod
    def of(cls, r: int, b: int) -> "VertexType":
        if r < 0 or b < 0:
            raise ValueError("neighbor counts must be nonnegative")
        return cls(min(r, b), max(r, b))

    @property
    def symmetric(self) -> bool:
        return self.lo == self.hi

    @property
    def size(self) -> int:
        return self.lo + self.hi

    def red_view(self) -> Tuple[int, int]:
        return (self.hi, self.lo)

    def blue_view(self) -> Tuple[int, int]:
        return (self.lo, self.hi)

    def priority_key(self) -> Tuple[int, int]:
        return (self.hi - self.lo, self.lo)

    def __str__(self):
        return f"{{{self.lo},{self.hi}}}"


TypeLike = Union[VertexType, Tuple[int, int]]


def as_type(t: TypeLike) -> VertexType:
    if isinstance(t, VertexType):
        return t
    r, b = t
    return VertexType.of(r, b)


def priority_compare(a: TypeLike, b: TypeLike) -> int:
    """Return -1, 0 or 1 as the priority of ``a`` is less, equal or greater.

    With both types written as (r, b), r <= b: (r1, b1) < (r2, b2) iff
    b1 - r1 < b2 - r2, or the differences agree and r1 < r2.
    """
    ka = as_type(a).priority_key()
    kb = as_type(b).priority_key()
    return (ka > kb) - (ka < kb)


def multiplicity(t: TypeLike) -> int:
    return 1 if as_type(t).symmetric else 2


# truncated kernels leave signed roundoff of this size
MASS_TOL = 1e-9


def dominant_type(type_masses: Mapping[TypeLike, float], eps: float) -> Optional[VertexType]:
    """Priority-maximal type carrying mass >= eps, or None when there is none.

    Keys given as ordered pairs are merged into their unordered type.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    merged = {}
    for t, m in type_masses.items():
        if m < -MASS_TOL:
            raise ValueError("negative type mass")
        vt = as_type(t)
        merged[vt] = merged.get(vt, 0.0) + m
    best = None
    for vt, m in merged.items():
        if m >= eps and (best is None or vt.priority_key() > best.priority_key()):
            best = vt
    return best


@dataclass(frozen=True)
class StepParams:
    """One entry of the coloring schedule."""

    t: int
    dominant: VertexType
    multiplicity: int
    q: float
    q_hat: float

    def __post_init__(self):
        if self.t < 1:
            raise ValueError("step index starts at 1")
        if self.multiplicity != multiplicity(self.dominant):
            raise ValueError(f"multiplicity {self.multiplicity} does not match type {self.dominant}")
        if not 0.0 <= self.q <= 1.0:
            raise ValueError(f"q out of range: {self.q}")
        if self.multiplicity == 1 and 2 * self.q > 1.0:
            raise ValueError(f"2q > 1 for a symmetric dominant type: q={self.q}")
        if not 0.0 <= self.q_hat or 2 * self.q_hat > 1.0:
            raise ValueError(f"q_hat out of range: {self.q_hat}")

    def to_dict(self) -> dict:
        r, b = self.dominant.red_view()
        return {"t": self.t, "r_dom": r, "b_dom": b, "m": self.multiplicity,
                "q": self.q, "q_hat": self.q_hat}

    @classmethod
    def from_dict(cls, row: Mapping) -> "StepParams":
        return cls(t=int(row["t"]), dominant=VertexType.of(int(row["r_dom"]), int(row["b_dom"])),
                   multiplicity=int(row["m"]), q=float(row["q"]), q_hat=float(row["q_hat"]))
