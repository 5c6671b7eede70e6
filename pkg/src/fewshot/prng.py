"""Deterministic pseudo-randomness shared by every stochastic operation.

Fixture generation, parameter initialization, and episode subsampling all
draw from the generator below instead of ``numpy.random`` so that results
are bit-reproducible from integer seeds, across platforms and library
versions, and so the exact stream can be re-created by an independent
implementation.  The complete definition:

* Raw stream (splitmix64): ``state_i = (seed + i * 0x9E3779B97F4A7C15)
  mod 2**64`` for i = 1, 2, ...; the i-th output is ``mix64(state_i)``
  where ``mix64`` is the splitmix64 finalizer.
* Uniform float in [0, 1): the top 53 bits, ``(u >> 11) * 2.0**-53``.
* Bounded integer in [0, n): ``u % n`` (plain modulo; the bias is
  negligible for the small n used here and the rule is trivially
  portable).
* Standard normals: Box-Muller on ``u1 = 1 - uniform()`` (so u1 is in
  (0, 1]) and ``u2 = uniform()``.  Normals are produced in pairs
  ``(r*cos(2*pi*u2), r*sin(2*pi*u2))`` with ``r = sqrt(-2*ln(u1))``; the
  second element of each pair is returned by the next call.
* Stream key for a (seed, text) pair: FNV-1a (64-bit) over the UTF-8
  bytes of the text, XORed with ``mix64(seed)``, then mixed once more.
"""

from __future__ import annotations

import math

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3


def mix64(z: int) -> int:
    """splitmix64 finalizer: a 64-bit bijective mixing function."""
    z &= _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def derive_seed(seed: int, text: str) -> int:
    """Deterministic 64-bit stream key for a (seed, text) pair."""
    h = _FNV_OFFSET
    for byte in text.encode("utf-8"):
        h = ((h ^ byte) * _FNV_PRIME) & _MASK64
    return mix64(h ^ mix64(seed))


class SplitMix64:
    """Counter-based PRNG; see the module docstring for the exact spec."""

    def __init__(self, seed: int):
        self._state = seed & _MASK64
        self._spare_normal: float | None = None

    def next_u64(self) -> int:
        self._state = (self._state + _GOLDEN) & _MASK64
        return mix64(self._state)

    def next_below(self, n: int) -> int:
        if n <= 0:
            raise ValueError("n must be positive")
        return self.next_u64() % n

    def uniform(self) -> float:
        """Uniform float in [0, 1) with 53 random bits."""
        return (self.next_u64() >> 11) * 2.0**-53

    def uniform_in(self, lo: float, hi: float) -> float:
        return lo + (hi - lo) * self.uniform()

    def normal(self) -> float:
        """Standard normal via Box-Muller; generated in pairs."""
        if self._spare_normal is not None:
            value = self._spare_normal
            self._spare_normal = None
            return value
        u1 = 1.0 - self.uniform()
        u2 = self.uniform()
        radius = math.sqrt(-2.0 * math.log(u1))
        theta = 2.0 * math.pi * u2
        self._spare_normal = radius * math.sin(theta)
        return radius * math.cos(theta)

    def shuffle_prefix(self, items: list, k: int) -> list:
        """First k elements of a Fisher-Yates shuffle of ``items``.

        Mutates ``items`` in place and returns ``items[:k]``.  Only the
        first k swap positions are visited, which is all a partial
        selection needs.
        """
        n = len(items)
        if not 0 <= k <= n:
            raise ValueError(f"k={k} out of range for {n} items")
        for i in range(k):
            j = i + self.next_below(n - i)
            items[i], items[j] = items[j], items[i]
        return items[:k]
