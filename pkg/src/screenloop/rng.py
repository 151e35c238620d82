"""Deterministic random streams with draw accounting.

The engine needs byte-identical randomness across platforms and library
versions, plus an exact count of consumed draws so a saved project can
report how much entropy its history used.  numpy's Generator does not
guarantee stream stability across releases for every method, so this module
ships a minimal splitmix64 generator.  Every public method is built from
single 64-bit draws, which makes `draws` an exact cursor.

Substreams are derived with `substream(seed, tag, index)`: the engine keys
them by (purpose, event-log length) so the randomness of any operation is a
pure function of the project seed and the event log.
"""

from __future__ import annotations

_MASK = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15


def _mix(z: int) -> int:
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9 & _MASK
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB & _MASK
    return z ^ (z >> 31)


def substream_seed(seed: int, tag: str, index: int = 0) -> int:
    """Derive an independent 64-bit seed from (seed, tag, index)."""
    h = seed & _MASK
    for ch in tag:
        h = _mix((h + ord(ch)) & _MASK)
    return _mix((h + index * _GAMMA) & _MASK)


class Rng:
    """splitmix64 stream; `draws` counts primitive 64-bit outputs."""

    def __init__(self, seed: int):
        self._state = seed & _MASK
        self.draws = 0

    def _next(self) -> int:
        self._state = (self._state + _GAMMA) & _MASK
        self.draws += 1
        return _mix(self._state)

    def rand(self) -> float:
        """Uniform float in [0, 1) with 53 random bits.  One draw."""
        return (self._next() >> 11) * (1.0 / (1 << 53))

    def randint(self, n: int) -> int:
        """Uniform integer in [0, n).  One draw."""
        if n <= 0:
            raise ValueError("randint needs n >= 1")
        return min(int(self.rand() * n), n - 1)

    def sample(self, seq, k: int) -> list:
        """k items without replacement, partial Fisher-Yates.  k draws."""
        pool = list(seq)
        if k > len(pool):
            raise ValueError(f"cannot sample {k} from {len(pool)}")
        for i in range(k):
            j = i + self.randint(len(pool) - i)
            pool[i], pool[j] = pool[j], pool[i]
        return pool[:k]


def substream(seed: int, tag: str, index: int = 0) -> Rng:
    return Rng(substream_seed(seed, tag, index))
