"""Rooted trees with 1-based vertex indexes.

Text format: a header line with the vertex count, then one line per vertex
``index parent [weight]`` where parent 0 marks the root.  Weights are exact
rationals (decimals like ``3.5`` parse exactly); solvers that need integer
weights validate separately.

Vertices added by extensions get indexes above ``original_n``; for freshly
parsed or generated trees every vertex is original.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .values import seeded_rng

GENERATOR_KINDS = ("path", "full_binary", "star", "caterpillar",
                   "random_recursive", "broom")


class TreeError(Exception):
    pass


class DuplicateIndex(TreeError):
    pass


class MissingParent(TreeError):
    pass


class CycleDetected(TreeError):
    pass


class MultipleRoots(TreeError):
    pass


@dataclass
class Tree:
    """parent[v] is v's parent index (0 for the root); index 0 is unused.

    weights[v] is the weight of the edge v -> parent(v); None means the tree
    is unweighted.  Vertices with index > original_n are auxiliary.
    """

    n: int
    parent: np.ndarray
    weights: list | None = None
    original_n: int = 0

    def __post_init__(self):
        if self.original_n == 0:
            self.original_n = self.n
        self.parent = np.asarray(self.parent, dtype=np.int64)

    @property
    def root(self) -> int:
        return int(np.nonzero(self.parent[1:] == 0)[0][0]) + 1

    def is_aux(self, v: int) -> bool:
        return v > self.original_n

    @property
    def has_weights(self) -> bool:
        return self.weights is not None

    def children_lists(self) -> list[list[int]]:
        kids = [[] for _ in range(self.n + 1)]
        for v in range(1, self.n + 1):
            p = int(self.parent[v])
            if p:
                kids[p].append(v)
        return kids

    def post_order(self) -> list[int]:
        """Iterative post-order (children before parents); no recursion."""
        kids = self.children_lists()
        order = []
        stack = [(self.root, False)]
        while stack:
            v, done = stack.pop()
            if done:
                order.append(v)
            else:
                stack.append((v, True))
                for c in kids[v]:
                    stack.append((c, False))
        return order

    def int_weights(self, default: int = 1) -> np.ndarray:
        """Edge weights as int64 (root entry 0); raises on fractional input."""
        w = np.zeros(self.n + 1, dtype=np.int64)
        if self.weights is None:
            w[1:] = default
            w[self.root] = 0
            return w
        for v in range(1, self.n + 1):
            if int(self.parent[v]) == 0:
                continue
            frac = Fraction(self.weights[v])
            if frac.denominator != 1:
                raise TreeError(f"solver needs integer weights, got {frac} at {v}")
            if frac < 0:
                raise TreeError(f"negative weight {frac} at {v}")
            w[v] = int(frac)
        return w


def parse_tree(text: str) -> Tree:
    lines = [ln for ln in text.strip().splitlines() if ln.strip()]
    if not lines:
        raise TreeError("empty input")
    try:
        n = int(lines[0].split()[0])
    except ValueError:
        raise TreeError(f"bad header {lines[0]!r}")
    if n < 1:
        raise TreeError(f"vertex count must be >= 1, got {n}")
    if len(lines) - 1 != n:
        raise TreeError(f"expected {n} vertex lines, got {len(lines) - 1}")

    parent = np.zeros(n + 1, dtype=np.int64)
    seen = np.zeros(n + 1, dtype=bool)
    weights: dict[int, Fraction] = {}
    weighted_rows = 0
    nonroot_rows = 0
    for ln in lines[1:]:
        parts = ln.split()
        if len(parts) not in (2, 3):
            raise TreeError(f"bad vertex line {ln!r}")
        idx, par = int(parts[0]), int(parts[1])
        if not (1 <= idx <= n):
            raise TreeError(f"index {idx} outside [1, {n}]")
        if seen[idx]:
            raise DuplicateIndex(f"index {idx} appears twice")
        seen[idx] = True
        if not (0 <= par <= n):
            raise MissingParent(f"vertex {idx} names parent {par} which does not exist")
        parent[idx] = par
        if par != 0:
            nonroot_rows += 1
            if len(parts) == 3:
                weighted_rows += 1
                weights[idx] = Fraction(parts[2])

    roots = [v for v in range(1, n + 1) if parent[v] == 0]
    if len(roots) > 1:
        raise MultipleRoots(f"roots {roots}")
    if not roots:
        raise CycleDetected("no root (every vertex has a parent)")
    if weighted_rows not in (0, nonroot_rows):
        raise TreeError("either all non-root edges carry weights or none do")

    # reachability from the root; unreachable vertices sit on a cycle
    kids = [[] for _ in range(n + 1)]
    for v in range(1, n + 1):
        if parent[v]:
            kids[int(parent[v])].append(v)
    reached = 0
    stack = [roots[0]]
    while stack:
        v = stack.pop()
        reached += 1
        stack.extend(kids[v])
    if reached != n:
        raise CycleDetected(f"only {reached} of {n} vertices reachable from the root")

    wlist = None
    if weighted_rows:
        wlist = [Fraction(0)] * (n + 1)
        for v, frac in weights.items():
            wlist[v] = frac
    return Tree(n=n, parent=parent, weights=wlist)


def emit_tree(tree: Tree) -> str:
    lines = [str(tree.n)]
    for v in range(1, tree.n + 1):
        p = int(tree.parent[v])
        if tree.weights is not None and p != 0:
            lines.append(f"{v} {p} {tree.weights[v]}")
        else:
            lines.append(f"{v} {p}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# generators
# ---------------------------------------------------------------------------

def gen_tree(kind: str, n: int, seed=0, weight_dist: str = "none") -> Tree:
    """Deterministic family of test trees; shapes depend only on (kind, n, seed)."""
    if n < 1:
        raise TreeError("n must be >= 1")
    if kind not in GENERATOR_KINDS:
        raise TreeError(f"unknown generator {kind!r}")
    rng = seeded_rng(seed, "shape", kind, n)
    parent = np.zeros(n + 1, dtype=np.int64)

    if kind == "path":
        for i in range(2, n + 1):
            parent[i] = i - 1
    elif kind == "full_binary":
        for i in range(2, n + 1):
            parent[i] = i // 2
    elif kind == "star":
        parent[2:] = 1
    elif kind == "caterpillar":
        spine = max(1, n // 2)
        for i in range(2, spine + 1):
            parent[i] = i - 1
        for i in range(spine + 1, n + 1):
            parent[i] = rng.randint(1, spine)
    elif kind == "random_recursive":
        for i in range(2, n + 1):
            parent[i] = rng.randint(1, i - 1)
    elif kind == "broom":
        handle = max(1, n // 2)
        for i in range(2, handle + 1):
            parent[i] = i - 1
        parent[handle + 1:] = handle

    weights = _gen_weights(weight_dist, n, parent, seed, kind)
    return Tree(n=n, parent=parent, weights=weights)


def _gen_weights(weight_dist, n, parent, seed, kind):
    if weight_dist in (None, "none") or n == 1:
        return None
    rng = seeded_rng(seed, "weights", kind, n)
    weights = [Fraction(0)] * (n + 1)
    if weight_dist == "unit":
        for v in range(1, n + 1):
            if parent[v]:
                weights[v] = Fraction(1)
        return weights
    if weight_dist.startswith("uniform:"):
        try:
            _, lo, hi = weight_dist.split(":")
            lo, hi = int(lo), int(hi)
        except ValueError:
            raise TreeError(f"bad weight spec {weight_dist!r}")
        if not (0 <= lo <= hi):
            raise TreeError(f"bad weight range [{lo}, {hi}]")
        for v in range(1, n + 1):
            if parent[v]:
                weights[v] = Fraction(rng.randint(lo, hi))
        return weights
    raise TreeError(f"unknown weight distribution {weight_dist!r}")


# ---------------------------------------------------------------------------
# sharding
# ---------------------------------------------------------------------------

@dataclass
class ShardedTree:
    tree: Tree
    h: object                   # HashFn over vertex indexes
    machine_of: np.ndarray      # (n+1,) int64
    locals: list[np.ndarray]    # per machine, sorted vertex index arrays


def shard_tree(tree: Tree, h) -> ShardedTree:
    ids = np.arange(1, tree.n + 1, dtype=np.uint64)
    bins = h.eval_array(ids)
    locals_ = [np.sort(ids[bins == mu]).astype(np.int64) for mu in range(h.m)]
    machine_of = np.zeros(tree.n + 1, dtype=np.int64)
    machine_of[1:] = bins
    return ShardedTree(tree=tree, h=h, machine_of=machine_of, locals=locals_)


def shard_rows(tree: Tree, h, default_weight: int = 1) -> list[np.ndarray]:
    """Per-machine (id, parent, weight) int64 row blocks, sharded by h(id)."""
    w = tree.int_weights(default=default_weight)
    ids = np.arange(1, tree.n + 1, dtype=np.int64)
    rows = np.stack([ids, tree.parent[1:], w[1:]], axis=1)
    bins = h.eval_array(ids.astype(np.uint64))
    return [np.ascontiguousarray(rows[bins == mu]) for mu in range(h.m)]
