"""Counter-based random streams.

Every stochastic procedure in the package draws from stateless streams:
a 64-bit stream key is derived by folding identifying fields (purpose tag,
relationship, node id, walk index, ...) into the master seed, and the i-th
variate of the stream is a SplitMix64-style hash of ``key + i * GOLDEN``.
Streams can therefore be evaluated in any order, on any worker, with
identical results.

Two implementations live here: masked python-int scalars and vectorized
numpy uint64 arrays. The numba kernels carry a third copy of the same
arithmetic; ``tests/test_rng.py`` pins all of them to each other.
"""

from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
MIX_A = 0xBF58476D1CE4E5B9
MIX_B = 0x94D049BB133111EB

# Stream purpose tags. Distinct tags keep unrelated procedures on
# non-overlapping streams even when their other fields coincide.
PURPOSE_WALK = 0x11
PURPOSE_PAIR_SHUFFLE = 0x22
PURPOSE_LAYERS = 0x33
PURPOSE_RANDOM_LAYERS = 0x44
PURPOSE_NEGATIVES = 0x55
PURPOSE_INIT = 0x66
PURPOSE_SPLIT = 0x77
PURPOSE_EVAL = 0x88

_INV53 = 1.0 / 9007199254740992.0  # 2**-53


def mix64(z: int) -> int:
    """SplitMix64 finalizer on masked python ints."""
    z = (z + GOLDEN) & MASK64
    z = ((z ^ (z >> 30)) * MIX_A) & MASK64
    z = ((z ^ (z >> 27)) * MIX_B) & MASK64
    return z ^ (z >> 31)


def derive_key(seed: int, *fields: int) -> int:
    """Fold identifying fields into a 64-bit stream key."""
    key = mix64(seed & MASK64)
    for f in fields:
        key = mix64(key ^ ((f & MASK64) ^ GOLDEN))
    return key


def draw_u64(key: int, counter: int) -> int:
    """The ``counter``-th 64-bit variate of stream ``key``."""
    return mix64((key + counter * GOLDEN) & MASK64)


def draw_uniform(key: int, counter: int) -> float:
    """Uniform float in [0, 1) with 53-bit resolution."""
    return (draw_u64(key, counter) >> 11) * _INV53


def draw_below(key: int, counter: int, n: int) -> int:
    """Uniform integer in [0, n)."""
    idx = int(draw_uniform(key, counter) * n)
    return idx if idx < n else n - 1


def mix64_np(z: np.ndarray) -> np.ndarray:
    """SplitMix64 finalizer on uint64 arrays (wrapping arithmetic)."""
    z = z + np.uint64(GOLDEN)
    z = (z ^ (z >> np.uint64(30))) * np.uint64(MIX_A)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(MIX_B)
    return z ^ (z >> np.uint64(31))


def derive_keys_np(seed: int, *field_arrays) -> np.ndarray:
    """Vectorized ``derive_key``: fields broadcast to a common shape."""
    arrs = np.broadcast_arrays(*[np.asarray(f, dtype=np.uint64) for f in field_arrays])
    key = np.full(arrs[0].shape, mix64(seed & MASK64), dtype=np.uint64)
    for f in arrs:
        key = mix64_np(key ^ (f ^ np.uint64(GOLDEN)))
    return key


def draw_u64_np(keys: np.ndarray, counters: np.ndarray) -> np.ndarray:
    """Vectorized ``draw_u64`` (keys and counters broadcast)."""
    keys = np.asarray(keys, dtype=np.uint64)
    counters = np.asarray(counters, dtype=np.uint64)
    return mix64_np(keys + counters * np.uint64(GOLDEN))


def draw_uniform_np(keys: np.ndarray, counters: np.ndarray) -> np.ndarray:
    return (draw_u64_np(keys, counters) >> np.uint64(11)).astype(np.float64) * _INV53


def draw_below_np(keys: np.ndarray, counters: np.ndarray, n: np.ndarray) -> np.ndarray:
    """Vectorized uniform integers in [0, n) (n may vary per element)."""
    n = np.asarray(n)
    idx = (draw_uniform_np(keys, counters) * n).astype(np.int64)
    return np.minimum(idx, np.maximum(n - 1, 0))


def permutation(key: int, n: int) -> np.ndarray:
    """Deterministic permutation of range(n) keyed by ``key``."""
    u = draw_u64_np(np.full(n, key, dtype=np.uint64), np.arange(n, dtype=np.uint64))
    return np.argsort(u, kind="stable")
