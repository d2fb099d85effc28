"""Counter-based random bits and seed derivation.

Every random object in the package is a pure function of a 64-bit seed plus
integer coordinates, so arbitrary sites of huge lattices can be sampled in
O(1) without materializing anything, and replicas parallelize by seed
derivation instead of stream splitting.
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1
_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)


def _as_u64(values) -> np.ndarray:
    # two's-complement reinterpretation keeps negative coordinates distinct
    arr = np.asarray(values)
    if arr.dtype == np.uint64:
        return arr
    return arr.astype(np.int64, copy=False).view(np.uint64)


def mix64(z) -> np.ndarray:
    """splitmix64 finalizer: bijective 64-bit avalanche, vectorized.

    Wraparound is the whole point of the arithmetic, so overflow warnings
    are suppressed locally.
    """
    z = np.asarray(z, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = z + _GAMMA
        z = (z ^ (z >> np.uint64(30))) * _M1
        z = (z ^ (z >> np.uint64(27))) * _M2
        return z ^ (z >> np.uint64(31))


def derive(seed: int, *indices: int) -> int:
    """Derive a child seed from (seed, indices), deterministically.

    Used for replica substreams and for giving unrelated samplers within one
    run statistically independent bit streams.  Results fit in 63 bits so
    arrays of derived seeds stay int64-clean.
    """
    h = mix64(np.uint64(seed & _MASK64))
    for i in indices:
        h = mix64(h ^ mix64(np.uint64(i & _MASK64)))
    return int(h & np.uint64(0x7FFFFFFFFFFFFFFF))


def coin_bits(seed, x, t) -> np.ndarray:
    """Fair bits indexed by lattice coordinates; pure in (seed, x, t).

    `seed`, `x` and `t` broadcast against each other, so one call can span a
    row of sites, a batch of replicas (array of seeds), or both.
    """
    s = mix64(_as_u64(seed))
    h = mix64(s ^ _as_u64(x))
    h = mix64(h ^ _as_u64(t))
    return (h & np.uint64(1)).astype(np.int8)


def generator(seed: int, *indices: int) -> np.random.Generator:
    """A numpy Generator on a Philox stream keyed by derive(seed, *indices)."""
    return np.random.Generator(np.random.Philox(key=derive(seed, *indices)))
