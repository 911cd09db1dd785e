"""Portable deterministic random numbers.

All stochastic behaviour in the engine (RANSAC sampling, pair sampling,
synthetic scenes) goes through xoshiro256** seeded via splitmix64, so runs
reproduce bit-for-bit across platforms and can be re-implemented in other
languages from this file alone.

Stream contract (documented, frozen):
  - seed expansion: four splitmix64 outputs from the 64-bit seed.
  - next_u64: xoshiro256** as published by Blackman & Vigna.
  - randbelow(n): rejection sampling against the largest multiple of n
    below 2^64 (no modulo bias), then ``u % n``.
  - uniform(): ``(next_u64() >> 11) * 2^-53`` in [0, 1).
  - normal(): Box-Muller pair from two uniforms; the second value of each
    pair is cached and served next.
  - sample_indices(n, k): k distinct values drawn one at a time with
    randbelow(n), rejecting duplicates within the sample.
"""

from __future__ import annotations

import hashlib
import math

_MASK64 = (1 << 64) - 1


def _rotl(x: int, k: int) -> int:
    return ((x << k) | (x >> (64 - k))) & _MASK64


def splitmix64(state: int) -> tuple[int, int]:
    """One splitmix64 step; returns (output, next_state)."""
    state = (state + 0x9E3779B97F4A7C15) & _MASK64
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31), state


def derive_seed(*parts: object) -> int:
    """Stable 64-bit sub-seed from arbitrary labelled parts (SHA-256 based)."""
    h = hashlib.sha256()
    for p in parts:
        h.update(repr(p).encode("utf-8"))
        h.update(b"\x1f")
    return int.from_bytes(h.digest()[:8], "little")


class Rng:
    """xoshiro256** stream with the helpers the engine needs."""

    __slots__ = ("s0", "s1", "s2", "s3", "_gauss_cache")

    def __init__(self, seed: int):
        seed &= _MASK64
        s = seed
        out = []
        for _ in range(4):
            v, s = splitmix64(s)
            out.append(v)
        self.s0, self.s1, self.s2, self.s3 = out
        self._gauss_cache: float | None = None

    def next_u64(self) -> int:
        s0, s1, s2, s3 = self.s0, self.s1, self.s2, self.s3
        result = (_rotl((s1 * 5) & _MASK64, 7) * 9) & _MASK64
        t = (s1 << 17) & _MASK64
        s2 ^= s0
        s3 ^= s1
        s1 ^= s2
        s0 ^= s3
        s2 ^= t
        s3 = _rotl(s3, 45)
        self.s0, self.s1, self.s2, self.s3 = s0, s1, s2, s3
        return result

    def randbelow(self, n: int) -> int:
        if n <= 0:
            raise ValueError("randbelow needs n >= 1")
        limit = (1 << 64) - ((1 << 64) % n)
        while True:
            u = self.next_u64()
            if u < limit:
                return u % n

    def sample_indices(self, n: int, k: int) -> list[int]:
        """k distinct indices in [0, n), in draw order."""
        if k > n:
            raise ValueError(f"cannot draw {k} distinct values from {n}")
        chosen: list[int] = []
        seen = set()
        while len(chosen) < k:
            v = self.randbelow(n)
            if v not in seen:
                seen.add(v)
                chosen.append(v)
        return chosen

    def uniform(self, lo: float = 0.0, hi: float = 1.0) -> float:
        u = (self.next_u64() >> 11) * 2.0**-53
        return lo + (hi - lo) * u

    def normal(self, mu: float = 0.0, sigma: float = 1.0) -> float:
        if self._gauss_cache is not None:
            z = self._gauss_cache
            self._gauss_cache = None
        else:
            # u1 in (0, 1]: avoids log(0)
            u1 = 1.0 - self.uniform()
            u2 = self.uniform()
            r = math.sqrt(-2.0 * math.log(u1))
            z = r * math.cos(2.0 * math.pi * u2)
            self._gauss_cache = r * math.sin(2.0 * math.pi * u2)
        return mu + sigma * z
