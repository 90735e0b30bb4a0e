"""Portable deterministic random number generation.

Dataset synthesis and the partition optimizer must reproduce bit-identical
results across runs and platforms, so instead of relying on a particular
library's stream stability we use splitmix64 (Steele, Lea & Flood 2014):
a tiny 64-bit integer permutation whose output is fully specified by the
seed. Gaussians come from Box-Muller on top of the 53-bit uniforms.
"""

from __future__ import annotations

import math

_MASK64 = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15


class SplitMix64:
    """splitmix64 stream with the few sampling helpers this package needs."""

    def __init__(self, seed: int):
        self._state = seed & _MASK64
        self._spare_gauss: float | None = None

    def next_u64(self) -> int:
        self._state = (self._state + _GAMMA) & _MASK64
        z = self._state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        return z ^ (z >> 31)

    def uniform(self) -> float:
        """Uniform float in [0, 1) with 53 bits of resolution."""
        return (self.next_u64() >> 11) * 2.0**-53

    def randint(self, lo: int, hi: int) -> int:
        """Uniform integer in [lo, hi], both ends inclusive.

        Uses a plain modulo draw; the bias is < 2**-32 for the spans used
        here (sample counts, restart seeds) and keeps the stream trivially
        portable.
        """
        if hi < lo:
            raise ValueError(f"empty range [{lo}, {hi}]")
        return lo + self.next_u64() % (hi - lo + 1)

    def gauss(self) -> float:
        """Standard normal via Box-Muller; the paired value is cached."""
        if self._spare_gauss is not None:
            g = self._spare_gauss
            self._spare_gauss = None
            return g
        u1 = self.uniform()
        u2 = self.uniform()
        # 1 - u1 lies in (0, 1], so the log is finite.
        r = math.sqrt(-2.0 * math.log(1.0 - u1))
        t = 2.0 * math.pi * u2
        self._spare_gauss = r * math.sin(t)
        return r * math.cos(t)

    def gauss_vector(self, n: int) -> list[float]:
        return [self.gauss() for _ in range(n)]

    def shuffle(self, seq: list) -> None:
        """In-place Fisher-Yates shuffle."""
        for i in range(len(seq) - 1, 0, -1):
            j = self.randint(0, i)
            seq[i], seq[j] = seq[j], seq[i]

    def spawn(self) -> "SplitMix64":
        """Derive an independent child stream (for optimizer restarts)."""
        return SplitMix64(self.next_u64())
