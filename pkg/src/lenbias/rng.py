"""Fixed-algorithm random number generation.

Every stochastic choice in this package (perturbation word picks, synthetic
scorer noise) must be bit-reproducible across runs, platforms, and
reimplementations in other languages. Library RNGs do not guarantee that, so
this module pins the exact algorithms:

* ``SplitMix64`` — the 64-bit generator of Steele, Lea & Flood. State advances
  by the golden-gamma constant ``0x9E3779B97F4A7C15``; output is the state
  passed through two xor-multiply finalization rounds (``0xBF58476D1CE4E5B9``,
  ``0x94D049BB133111EB``) and a final 31-bit xor-shift.
* Uniform doubles take the top 53 bits of one output: ``u = (x >> 11) * 2**-53``
  giving values in [0, 1).
* Normal deviates use the Box-Muller transform on two uniforms:
  ``z = sqrt(-2*ln(1 - u1)) * cos(2*pi*u2)`` (``1 - u1`` keeps the log argument
  in (0, 1]). Exactly two uniforms are consumed per deviate; nothing is cached.
* String keys are folded into seeds with 64-bit FNV-1a over their UTF-8 bytes.
"""

from __future__ import annotations

import math

_MASK64 = 0xFFFFFFFFFFFFFFFF
_GAMMA = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3


def fnv1a64(data: bytes) -> int:
    """64-bit FNV-1a hash of ``data``."""
    h = _FNV_OFFSET
    for b in data:
        h ^= b
        h = (h * _FNV_PRIME) & _MASK64
    return h


def key_seed(seed: int, key: str) -> int:
    """Derive a stream seed from a base seed and a string key.

    The key's FNV-1a hash is xored into the seed, so distinct request ids or
    document ids get decorrelated streams while the mapping stays a pure
    function of (seed, key).
    """
    return (seed & _MASK64) ^ fnv1a64(key.encode("utf-8"))


class SplitMix64:
    """SplitMix64 generator with uniform and normal output helpers."""

    __slots__ = ("_state",)

    def __init__(self, seed: int):
        self._state = seed & _MASK64

    def next_u64(self) -> int:
        self._state = (self._state + _GAMMA) & _MASK64
        z = self._state
        z = ((z ^ (z >> 30)) * _MIX1) & _MASK64
        z = ((z ^ (z >> 27)) * _MIX2) & _MASK64
        return (z ^ (z >> 31)) & _MASK64

    def next_float(self) -> float:
        """Uniform double in [0, 1) from the top 53 bits of one output."""
        return (self.next_u64() >> 11) * 2.0**-53

    def next_below(self, n: int) -> int:
        """Uniform integer in [0, n) by scaling one uniform double.

        Scaling (rather than rejection sampling) keeps the consumption rate at
        exactly one output per call, which matters for cross-implementation
        reproducibility; the bias for small n is far below any use here.
        """
        if n <= 0:
            raise ValueError("n must be positive")
        return int(self.next_float() * n)

    def next_normal(self) -> float:
        """Standard normal deviate via Box-Muller; consumes two outputs."""
        u1 = self.next_float()
        u2 = self.next_float()
        return math.sqrt(-2.0 * math.log(1.0 - u1)) * math.cos(2.0 * math.pi * u2)
