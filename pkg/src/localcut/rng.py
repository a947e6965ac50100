"""Counter-based random streams keyed by (master seed, purpose, index).

Every stream is a Philox-4x64 generator whose key is derived from the
master seed and a purpose string, and whose counter's second word is the
index.  The v-th draw of stream (seed, purpose, index) is therefore a fixed
function of those four values, independent of how many values are drawn or
in which order streams are visited.
"""

from __future__ import annotations

import hashlib
from typing import Optional

import numpy as np

GENERATOR_ID = "philox4x64-sha256key-v1"
_TWO53 = float(2 ** 53)


def stream_key(seed: int, purpose: str) -> int:
    h = hashlib.sha256(f"{int(seed)}/{purpose}".encode()).digest()
    return int.from_bytes(h[:16], "little")


def philox(seed: int, purpose: str, index: int = 0) -> np.random.Philox:
    if index < 0:
        raise ValueError("stream index must be nonnegative")
    return np.random.Philox(key=stream_key(seed, purpose), counter=[0, index, 0, 0])


def generator(seed: int, purpose: str, index: int = 0) -> np.random.Generator:
    return np.random.Generator(philox(seed, purpose, index))


def open_uniforms(seed: int, purpose: str, index: int, size: int) -> np.ndarray:
    """``size`` doubles in the open interval (0, 1)."""
    raw = philox(seed, purpose, index).random_raw(size)
    return ((raw >> np.uint64(11)).astype(np.float64) + 0.5) / _TWO53


class SeedTable:
    """Lazily evaluated per-vertex seeds s_t(v) in (0, 1), t = 1..N+1.

    ``rekey`` optionally marks vertices whose seeds come from ``alt_seed``
    instead; locality tests use it to re-randomize part of the graph.
    """

    purpose = "vertex-seeds"

    def __init__(self, master_seed: int, n: int, rekey: Optional[np.ndarray] = None,
                 alt_seed: Optional[int] = None):
        self.master_seed = int(master_seed)
        self.n = n
        self.rekey = None if rekey is None else np.asarray(rekey, dtype=bool)
        self.alt_seed = alt_seed
        if self.rekey is not None and alt_seed is None:
            raise ValueError("rekeyed vertices need an alternative seed")

    def step(self, t: int) -> np.ndarray:
        if t < 1:
            raise ValueError("seed steps start at 1")
        s = open_uniforms(self.master_seed, self.purpose, t, self.n)
        if self.rekey is not None and self.rekey.any():
            s[self.rekey] = open_uniforms(self.alt_seed, self.purpose, t, self.n)[self.rekey]
        return s

    def value(self, v: int, t: int) -> float:
        return float(self.step(t)[v])


class FixedSeeds:
    """Explicit seed table, used for hand-traced examples: ``table[t-1][v]``."""

    def __init__(self, table):
        self.table = [np.asarray(row, dtype=np.float64) for row in table]
        self.n = len(self.table[0]) if self.table else 0
        self.master_seed = None

    def step(self, t: int) -> np.ndarray:
        if t <= len(self.table):
            return self.table[t - 1]
        # steps beyond the given table fall back to a fixed stream
        return open_uniforms(0, "fixed-fallback", t, self.n)
