"""Deterministic random numbers.

``cell_uniform`` is a counter-based generator: every value is a SplitMix64
hash of (seed, key..., i, j), so any matrix cell can be regenerated in
isolation and generation order never matters. Monte Carlo streams use numpy's
Philox counter-based bit generator keyed by a derived 64-bit seed.
"""

import zlib

import numpy as np

MASK64 = (1 << 64) - 1
_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)


def _mix(z):
    with np.errstate(over="ignore"):
        z = (z ^ (z >> np.uint64(30))) * _M1
        z = (z ^ (z >> np.uint64(27))) * _M2
        return z ^ (z >> np.uint64(31))


def _key_int(k) -> int:
    if isinstance(k, str):
        return zlib.crc32(k.encode("utf-8"))
    return int(k) & MASK64


def hash_keys(seed, *keys) -> np.uint64:
    h = _mix(np.uint64(_key_int(seed)))
    for k in keys:
        with np.errstate(over="ignore"):
            h = _mix(h ^ _mix(np.uint64(_key_int(k)) + _GOLDEN))
    return h


def derive_seed(seed, *keys) -> int:
    """A 64-bit seed derived deterministically from ``seed`` and ``keys``."""
    return int(hash_keys(seed, *keys))


def cell_uniform(n: int, seed, *keys) -> np.ndarray:
    """n x n uniforms in [0, 1): cell (i, j) depends only on (seed, keys, i, j)."""
    base = hash_keys(seed, *keys)
    i = np.arange(n, dtype=np.uint64)[:, None]
    j = np.arange(n, dtype=np.uint64)[None, :]
    with np.errstate(over="ignore"):
        h = _mix(base ^ _mix(i * np.uint64(0x100000001B3) + _GOLDEN))
        h = _mix(h ^ _mix(j + _GOLDEN))
    return (h >> np.uint64(11)).astype(np.float64) * (1.0 / (1 << 53))


def philox(seed) -> np.random.Generator:
    """Generator backed by Philox4x64 with the given 64-bit key."""
    return np.random.Generator(np.random.Philox(key=int(seed) & MASK64))
