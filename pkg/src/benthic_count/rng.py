"""Deterministic, portable pseudo-random generation.

Scene synthesis must be bit-identical across platforms and runtimes, so
nothing here uses the host RNG. Two primitives, both pure 64-bit integer
arithmetic (mod 2^64):

splitmix64 finalizer (state scrambler)::

    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB
    z =  z ^ (z >> 31)

xorshift64* sequential stream (state s != 0)::

    s ^= s >> 12;  s ^= s << 25;  s ^= s >> 27
    output = s * 0x2545F4914F6CDD1D

Streams are seeded by walking the splitmix64 sequence (increment
0x9E3779B97F4A7C15, the 64-bit golden ratio) so nearby seeds decorrelate.
Uniform doubles take the top 53 output bits / 2^53; Gaussian deviates use
the Box-Muller transform on consecutive uniforms; Poisson counts use
Knuth's product method. Bulk pixel fields use the splitmix64 finalizer in
counter mode (key + golden * index), which vectorizes without changing
any sequential stream.
"""

from __future__ import annotations

import math

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
SPLITMIX_MULT1 = 0xBF58476D1CE4E5B9
SPLITMIX_MULT2 = 0x94D049BB133111EB
XORSHIFT_MULT = 0x2545F4914F6CDD1D


def splitmix64(z: int) -> int:
    """The splitmix64 finalizer: avalanche one 64-bit value."""
    z &= MASK64
    z = ((z ^ (z >> 30)) * SPLITMIX_MULT1) & MASK64
    z = ((z ^ (z >> 27)) * SPLITMIX_MULT2) & MASK64
    return z ^ (z >> 31)


def derive_key(seed: int, *tags: int) -> int:
    """Independent substream key from a seed and integer tags."""
    k = seed & MASK64
    for t in tags:
        k = splitmix64((k + GOLDEN + t) & MASK64)
    return k


class PortableRng:
    """xorshift64* stream with a splitmix64-derived starting state."""

    def __init__(self, seed: int):
        state = splitmix64((seed + GOLDEN) & MASK64)
        self._state = state if state != 0 else GOLDEN
        self._spare_gauss: float | None = None

    def next_u64(self) -> int:
        s = self._state
        s ^= s >> 12
        s = (s ^ (s << 25)) & MASK64
        s ^= s >> 27
        self._state = s
        return (s * XORSHIFT_MULT) & MASK64

    def uniform(self) -> float:
        """Uniform in [0, 1) with 53-bit resolution."""
        return (self.next_u64() >> 11) / (1 << 53)

    def uniform_range(self, lo: float, hi: float) -> float:
        return lo + (hi - lo) * self.uniform()

    def randint(self, lo: int, hi: int) -> int:
        """Uniform integer in [lo, hi] (inclusive)."""
        if hi < lo:
            raise ValueError(f"empty range [{lo}, {hi}]")
        return lo + int(self.uniform() * (hi - lo + 1))

    def gauss(self, mu: float = 0.0, sigma: float = 1.0) -> float:
        """Box-Muller; one spare deviate is cached between calls."""
        if self._spare_gauss is not None:
            z = self._spare_gauss
            self._spare_gauss = None
        else:
            u1 = max(self.uniform(), 2.0 ** -53)
            u2 = self.uniform()
            r = math.sqrt(-2.0 * math.log(u1))
            z = r * math.cos(2.0 * math.pi * u2)
            self._spare_gauss = r * math.sin(2.0 * math.pi * u2)
        return mu + sigma * z

    def poisson(self, lam: float) -> int:
        """Knuth's product method; fine for the small rates used here."""
        if lam <= 0.0:
            return 0
        limit = math.exp(-lam)
        k, p = 0, 1.0
        while True:
            p *= self.uniform()
            if p <= limit:
                return k
            k += 1


def counter_uniform_field(key: int, count: int) -> np.ndarray:
    """``count`` uniforms in [0, 1) from the counter-mode splitmix64 finalizer.

    Element i is splitmix64(key + GOLDEN * (i + 1)) >> 11, scaled — fully
    vectorized and independent of any sequential stream.
    """
    idx = np.arange(1, count + 1, dtype=np.uint64)
    z = (np.uint64(key) + np.uint64(GOLDEN) * idx)
    z = (z ^ (z >> np.uint64(30))) * np.uint64(SPLITMIX_MULT1)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(SPLITMIX_MULT2)
    z = z ^ (z >> np.uint64(31))
    return (z >> np.uint64(11)).astype(np.float64) / float(1 << 53)


def counter_gauss_field(key: int, count: int) -> np.ndarray:
    """``count`` standard-normal deviates, Box-Muller over counter uniforms."""
    u = counter_uniform_field(key, 2 * count)
    u1 = np.maximum(u[0::2], 2.0 ** -53)
    u2 = u[1::2]
    return np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)
