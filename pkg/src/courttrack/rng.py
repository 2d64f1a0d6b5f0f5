"""Portable 64-bit pseudo-random streams (SplitMix64).

Fixture generation must be bit-reproducible across platforms and
languages, so the generator is spelled out here instead of relying on
library internals. Streams are split per (seed, *keys): each key is
mixed into the state, giving independent deterministic substreams.
"""

from __future__ import annotations

import math

_MASK = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def _mix(z: int) -> int:
    z &= _MASK
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return z ^ (z >> 31)


class SplitMix64:
    """Deterministic stream of 64-bit words with simple derived samplers."""

    __slots__ = ("_state",)

    def __init__(self, seed: int, *keys: int) -> None:
        state = _mix((seed & _MASK) + _GOLDEN)
        for key in keys:
            state = _mix(state ^ _mix((key & _MASK) + _GOLDEN))
        self._state = state

    def next_u64(self) -> int:
        self._state = (self._state + _GOLDEN) & _MASK
        return _mix(self._state)

    def uniform(self, lo: float = 0.0, hi: float = 1.0) -> float:
        """Uniform in [lo, hi) with 53-bit resolution."""
        u = self.next_u64() >> 11
        return lo + (hi - lo) * (u / float(1 << 53))

    def randint(self, lo: int, hi: int) -> int:
        """Uniform integer in [lo, hi] (modulo biased; fine for fixtures)."""
        if hi < lo:
            raise ValueError("empty integer range")
        return lo + self.next_u64() % (hi - lo + 1)

    def gauss(self, mu: float = 0.0, sigma: float = 1.0) -> float:
        """Box-Muller transform from two uniform draws."""
        u1 = (self.next_u64() >> 11) / float(1 << 53)
        u2 = (self.next_u64() >> 11) / float(1 << 53)
        # avoid log(0); the offset keeps u1 in (0, 1]
        u1 = 1.0 - u1
        return mu + sigma * math.sqrt(-2.0 * math.log(u1)) * math.cos(2.0 * math.pi * u2)
