"""Deterministic 64-bit PRNG used for question instantiation and simulation.

The generator is splitmix64 (Steele, Lea, Flood 2014).  It is fixed here so
that a (template id, seed) pair produces byte-identical question instances on
every platform and every run: all state transitions are integer arithmetic
mod 2**64, never platform floats or Python's hash randomization.

Streams are derived by hashing a string key (FNV-1a 64) into the seed, which
gives independent per-template and per-student substreams from one root seed.
"""

from __future__ import annotations

_MASK = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3


def fnv1a64(text: str) -> int:
    """FNV-1a hash of the UTF-8 bytes of *text*, 64-bit."""
    h = _FNV_OFFSET
    for byte in text.encode("utf-8"):
        h ^= byte
        h = (h * _FNV_PRIME) & _MASK
    return h


class SplitMix64:
    """splitmix64 stream.  next() yields uniform 64-bit integers."""

    __slots__ = ("_state",)

    def __init__(self, seed: int):
        self._state = seed & _MASK

    def next(self) -> int:
        self._state = (self._state + _GOLDEN) & _MASK
        z = self._state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
        return z ^ (z >> 31)

    def below(self, n: int) -> int:
        """Uniform integer in [0, n).  Plain modulo: the bias for the small
        n used here (< 2**20) is below 2**-44 and determinism matters more."""
        if n <= 0:
            raise ValueError("below() needs n >= 1")
        return self.next() % n

    def unit(self) -> float:
        """Uniform float in [0, 1) with 53 random bits."""
        return (self.next() >> 11) * (1.0 / (1 << 53))

    def shuffle(self, items: list) -> None:
        """In-place Fisher-Yates driven by this stream."""
        for i in range(len(items) - 1, 0, -1):
            j = self.below(i + 1)
            items[i], items[j] = items[j], items[i]


def stream(key: str, seed: int) -> SplitMix64:
    """Derive the substream for *key* under root *seed*.

    The state is fnv1a64(key) xor (seed+1)*golden, so distinct keys and
    distinct seeds both move the stream.
    """
    return SplitMix64(fnv1a64(key) ^ (((seed + 1) * _GOLDEN) & _MASK))
