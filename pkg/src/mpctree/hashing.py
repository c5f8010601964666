"""k-wise independent hashing into power-of-two ranges.

A hash function is a uniformly random degree-(k-1) polynomial over the
Mersenne prime p = 2^61 - 1, reduced mod the range size.  Evaluations over
distinct keys are k-wise independent, which is what the load-balancing
arguments for sharding need (k around log2 of the machine count).

Scalar evaluation uses exact Python integers; `eval_array` is a vectorized
uint64 path for the Mersenne prime using 32-bit limb products, bit-identical
to the scalar path.
"""

from __future__ import annotations

import math

import numpy as np

from .values import seeded_rng

PRIME = (1 << 61) - 1

_MASK61 = PRIME
_MASK32 = (1 << 32) - 1
_MASK29 = (1 << 29) - 1


class HashError(Exception):
    pass


class KeyOutOfDomain(HashError):
    pass


class InvalidRange(HashError):
    pass


def _is_pow2(x: int) -> bool:
    return x >= 1 and (x & (x - 1)) == 0


class HashFn:
    """Polynomial hash h(x) = (sum coeffs[i] * x^i mod p) mod m.

    m must be a power of two so the final reduction just keeps low bits.
    """

    def __init__(self, coeffs, m, prime=PRIME):
        if not _is_pow2(m):
            raise InvalidRange(f"range must be a power of two, got {m}")
        if not coeffs:
            raise ValueError("need at least one coefficient")
        self.coeffs = tuple(int(c) % prime for c in coeffs)
        self.m = int(m)
        self.prime = int(prime)

    @property
    def k(self) -> int:
        return len(self.coeffs)

    def __call__(self, key: int) -> int:
        p = self.prime
        if not (0 <= key < p):
            raise KeyOutOfDomain(f"key {key} outside [0, {p})")
        acc = 0
        for c in reversed(self.coeffs):
            acc = (acc * key + c) % p
        return acc & (self.m - 1)

    def eval_array(self, keys: np.ndarray) -> np.ndarray:
        """Vectorized evaluation; keys must already lie in [0, prime)."""
        keys = np.ascontiguousarray(keys, dtype=np.uint64)
        if keys.size and int(keys.max()) >= self.prime:
            raise KeyOutOfDomain("key outside field")
        if self.prime != PRIME:
            out = np.fromiter((self(int(x)) for x in keys), dtype=np.int64,
                              count=keys.size)
            return out
        acc = np.zeros_like(keys)
        for c in reversed(self.coeffs):
            acc = _mulmod61(acc, keys)
            acc += np.uint64(c)
            acc = _redmod61(acc)
        return (acc & np.uint64(self.m - 1)).astype(np.int64)

    def __words__(self) -> int:
        return len(self.coeffs) + 2


def _redmod61(x):
    """Reduce values < 2^64 mod 2^61-1."""
    x = (x >> np.uint64(61)) + (x & np.uint64(_MASK61))
    x = (x >> np.uint64(61)) + (x & np.uint64(_MASK61))
    return np.where(x >= np.uint64(PRIME), x - np.uint64(PRIME), x)


def _mulmod61(a, b):
    """(a*b) mod 2^61-1 for uint64 arrays with a,b < 2^61.

    Split into 32-bit limbs; 2^64 = 8 and 2^61 = 1 modulo the prime, so the
    three partial products fold into terms below 2^62 before one reduction.
    """
    ah = a >> np.uint64(32)
    al = a & np.uint64(_MASK32)
    bh = b >> np.uint64(32)
    bl = b & np.uint64(_MASK32)

    hi = (ah * bh) << np.uint64(3)                 # * 2^64 == * 8
    mid = ah * bl + al * bh                        # * 2^32, < 2^62
    mid = (mid >> np.uint64(29)) + ((mid & np.uint64(_MASK29)) << np.uint64(32))
    lo = al * bl
    lo = (lo >> np.uint64(61)) + (lo & np.uint64(_MASK61))

    return _redmod61(_redmod61(hi + mid) + lo)


def k_for_machines(m: int) -> int:
    """Independence degree used when sharding across m machines."""
    return max(2, math.ceil(math.log2(max(m, 2))))


def sample_hash(k: int, m: int, seed, prime=PRIME) -> HashFn:
    """Draw a uniformly random degree-(k-1) polynomial from a named stream."""
    if k < 1:
        raise ValueError("k must be positive")
    rng = seeded_rng(seed, "khash", k, m)
    coeffs = [rng.randrange(prime) for _ in range(k)]
    return HashFn(coeffs, m, prime=prime)


def distribute_weighted(items, h: HashFn):
    """Assign weighted keys to bins via h; returns (assignment, max_load).

    items is an iterable of (key, weight) pairs.  The assignment maps each
    key to its bin; max_load is the heaviest bin's total weight.
    """
    loads = np.zeros(h.m, dtype=np.int64)
    assignment = {}
    keys = []
    weights = []
    for key, w in items:
        keys.append(key)
        weights.append(w)
    if not keys:
        return {}, 0
    bins = h.eval_array(np.asarray(keys, dtype=np.uint64))
    np.add.at(loads, bins, np.asarray(weights, dtype=np.int64))
    for key, b in zip(keys, bins):
        assignment[key] = int(b)
    return assignment, int(loads.max())


def load_vector(keys: np.ndarray, weights: np.ndarray, h: HashFn) -> np.ndarray:
    """Per-bin total weight for a large key array (no assignment dict)."""
    loads = np.zeros(h.m, dtype=np.int64)
    bins = h.eval_array(keys)
    np.add.at(loads, bins, np.asarray(weights, dtype=np.int64))
    return loads
