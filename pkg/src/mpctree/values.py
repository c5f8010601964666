"""Shared value conventions and deterministic randomness.

All solvers and oracles use the same scalar conventions so results compare
exactly:

- plain Python ints for costs/weights (arbitrary precision, no float drift),
- ``None`` as the infeasible sentinel (works for both min and max problems),
- int64 numpy vectors with ``INF64``/``NEG64`` sentinels where vectorization
  pays off (linear-problem tables).

Randomness is always drawn from a named stream: ``seeded_rng(seed, *tags)``
hashes the seed together with the stream tags, so every random choice in the
system is reproducible and independent of call order.
"""

from __future__ import annotations

import hashlib
import random

import numpy as np

# int64 sentinels.  2^61 leaves headroom: a sum of two sentinel-valued entries
# plus an edge weight stays below 2^62 (no int64 wrap), and renormalization
# snaps anything past the +-2^60 threshold back to the exact sentinel so
# tables stay canonical (every entry is either exact or exactly the sentinel).
INF64 = 1 << 61
NEG64 = -(1 << 61)
_SNAP = 1 << 60


def renorm_min(arr):
    """Snap blown-up entries of a min-plus table back to INF64, in place."""
    arr[arr >= _SNAP] = INF64
    return arr


def renorm_max(arr):
    """Snap blown-down entries of a max-plus table back to NEG64, in place."""
    arr[arr <= -_SNAP] = NEG64
    return arr


def min_plus_conv(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """c[t] = min over i+j=t of a[i]+b[j], INF64-saturated."""
    conv = a[:, None] + b[None, :]
    idx = np.add.outer(np.arange(len(a)), np.arange(len(b)))
    out = np.full(len(a) + len(b) - 1, INF64, dtype=np.int64)
    np.minimum.at(out, idx.ravel(), conv.ravel())
    return renorm_min(out)


def max_plus_conv(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    conv = a[:, None] + b[None, :]
    idx = np.add.outer(np.arange(len(a)), np.arange(len(b)))
    out = np.full(len(a) + len(b) - 1, NEG64, dtype=np.int64)
    np.maximum.at(out, idx.ravel(), conv.ravel())
    return renorm_max(out)


def seed_int(seed, *tags) -> int:
    """Derive a 64-bit integer from a seed and a tuple of stream tags."""
    text = repr((int(seed),) + tags).encode()
    return int.from_bytes(hashlib.blake2b(text, digest_size=8).digest(), "big")


def seeded_rng(seed, *tags) -> random.Random:
    """A `random.Random` whose state depends only on (seed, tags)."""
    return random.Random(seed_int(seed, *tags))


def sat_add(*vals):
    """Sum of values where None (infeasible) absorbs."""
    total = 0
    for v in vals:
        if v is None:
            return None
        total += v
    return total


def better(a, b, sense: str):
    """Pick the preferable of two values; None loses to anything."""
    if a is None:
        return b
    if b is None:
        return a
    return max(a, b) if sense == "max" else min(a, b)


def best_of(vals, sense: str):
    out = None
    for v in vals:
        out = better(out, v, sense)
    return out
