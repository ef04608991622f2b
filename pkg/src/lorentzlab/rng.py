"""Reproducible random number streams.

Two mechanisms, both counter-based so that results never depend on the
order in which work is scheduled:

* ``rng_stream(master_seed, stream_index)`` returns an independent
  numpy ``Generator`` (Philox) for bulk sampling.  Same inputs, same
  stream, on every platform and at every worker count.
* ``HashStream`` is a tiny splitmix64 stream keyed by a tuple of
  integers.  It is what the scatterer field uses per lattice cell: the
  draws for a cell are a pure function of (seed, cell index), so a cell
  can be re-generated at any time without storing anything.
"""

from __future__ import annotations

import math

import numpy as np

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def splitmix64(z: int) -> int:
    """One splitmix64 scramble of a 64-bit integer."""
    z = (z + _GOLDEN) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def mix_key(*parts: int) -> int:
    """Fold any number of (possibly negative) integers into a 64-bit key."""
    h = 0x6A09E667F3BCC909
    for p in parts:
        h = splitmix64(h ^ (p & _MASK64))
    return h


def rng_stream(master_seed: int, stream_index: int) -> np.random.Generator:
    """Independent generator for a (master seed, stream index) pair.

    Built on Philox, a counter-based generator: distinct keys give
    statistically independent streams by construction, and the mapping
    from inputs to the stream is pure.
    """
    k0 = mix_key(master_seed, stream_index, 1)
    k1 = mix_key(master_seed, stream_index, 2)
    return np.random.Generator(np.random.Philox(key=k0 | (k1 << 64)))


class HashStream:
    """Deterministic scalar stream of uniforms/Poisson counts from a key.

    Output i is splitmix64(key + i*GOLDEN); the stream is a pure
    function of the key tuple.  Cheap enough to re-derive per lattice
    cell in the hot path of the event-driven dynamics.
    """

    __slots__ = ("_counter",)

    def __init__(self, *key: int):
        self._counter = mix_key(*key)

    def next_u64(self) -> int:
        self._counter = (self._counter + _GOLDEN) & _MASK64
        return splitmix64(self._counter)

    def uniform(self) -> float:
        # 53 mantissa bits -> uniform on [0, 1)
        return (self.next_u64() >> 11) * (1.0 / 9007199254740992.0)

    def poisson(self, lam: float) -> int:
        """Poisson count via Knuth's product method (split for large means)."""
        if lam <= 0.0:
            return 0
        if lam > 64.0:
            half = lam / 2.0
            return self.poisson(half) + self.poisson(half)
        limit = math.exp(-lam)
        k = 0
        p = 1.0
        while True:
            p *= self.uniform()
            if p <= limit:
                return k
            k += 1
