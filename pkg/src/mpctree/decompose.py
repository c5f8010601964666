"""Randomized contraction of a binary tree into at most 14m components.

Components start as singletons.  Each iteration selects components by rule
(root; exactly two children; parent already completed; exactly one child with
probability 1/2) and merges every unselected incomplete component into its
closest selected ancestor, the whole pointer path collapsing into that same
target.  A component reaching ceil(n/m) vertices is marked completed and
never merges again.  The loop ends when at most 14m components remain.

A component's id is the index of its root vertex, so the component tree is
read directly off the vertex parent array.  Coin flips come from a
counter-based stream keyed by (seed, iteration) and indexed by component id,
making every run reproducible regardless of evaluation order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .runtime import NonTermination
from .values import seed_int


@dataclass
class IterationStats:
    iteration: int
    candidates: int          # |C - F| at iteration start
    selected: int            # |S|
    max_path: int            # longest hop count to a selected ancestor
    components_after: int


@dataclass
class Decomposition:
    n: int
    m: int
    threshold: int
    label: np.ndarray        # (n+1,) vertex -> component id
    comp_ids: np.ndarray     # active component ids (sorted)
    comp_parent: np.ndarray  # (n+1,) component id -> parent component id
    comp_size: np.ndarray    # (n+1,) component id -> vertex count
    iterations: int
    stats: list[IterationStats] = field(default_factory=list)

    def component_vertices(self, cid: int) -> np.ndarray:
        return np.nonzero(self.label[1:] == cid)[0] + 1


def coin_flips(n: int, seed, iteration: int) -> np.ndarray:
    gen = np.random.Generator(
        np.random.Philox(key=seed_int(seed, "select", iteration)))
    return gen.integers(0, 2, size=n + 1, dtype=np.int64).astype(bool)


def select(ids, comp_parent, child_count, completed, coins) -> np.ndarray:
    """Selection mask over ids; ids must all be incomplete (C - F)."""
    cp = comp_parent[ids]
    is_root = cp == 0
    two_kids = child_count[ids] == 2
    par_done = np.zeros(len(ids), dtype=bool)
    inner = ~is_root
    par_done[inner] = completed[cp[inner]]
    one_kid = child_count[ids] == 1
    return is_root | two_kids | par_done | (one_kid & coins[ids])


def merge_step(unselected, comp_parent, selected_mask):
    """Closest selected ancestor for every unselected id; returns
    (targets aligned with unselected, max path length in hops).

    Every component on a pointer path merges into the same target, so path
    resolution memoizes targets and depths along the way.
    """
    target = {}
    depth = {}
    max_path = 0
    for c in unselected:
        c = int(c)
        if c in target:
            max_path = max(max_path, depth[c])
            continue
        path = [c]
        p = int(comp_parent[c])
        while not selected_mask[p] and p not in target:
            path.append(p)
            p = int(comp_parent[p])
        if selected_mask[p]:
            t, base = p, 0
        else:
            t, base = target[p], depth[p]
        for i, x in enumerate(reversed(path)):
            target[x] = t
            depth[x] = base + i + 1
        max_path = max(max_path, depth[c])
    out = np.fromiter((target[int(c)] for c in unselected), dtype=np.int64,
                      count=len(unselected))
    return out, max_path


def decompose_core(parent: np.ndarray, m: int, seed=0, *,
                   check_invariants: bool = False,
                   max_iterations: int | None = None) -> Decomposition:
    n = len(parent) - 1
    threshold = -(-n // m)
    label = np.arange(n + 1, dtype=np.int64)
    active = np.ones(n + 1, dtype=bool)
    active[0] = False
    completed = np.zeros(n + 1, dtype=bool)
    comp_parent = parent.astype(np.int64).copy()
    comp_size = np.ones(n + 1, dtype=np.int64)
    stats: list[IterationStats] = []
    if max_iterations is None:
        max_iterations = 12 * math.ceil(math.log2(max(n, 2))) + 32

    iteration = 0
    while int(active.sum()) > 14 * m:
        iteration += 1
        if iteration > max_iterations:
            raise NonTermination(iteration)
        ids = np.nonzero(active)[0]
        child_count = np.bincount(comp_parent[ids], minlength=n + 1)
        cand = ids[~completed[ids]]
        coins = coin_flips(n, seed, iteration)
        sel = select(cand, comp_parent, child_count, completed, coins)
        selected_mask = np.zeros(n + 1, dtype=bool)
        selected_mask[cand[sel]] = True

        unsel = cand[~sel]
        targets, max_path = merge_step(unsel, comp_parent, selected_mask)

        remap = np.arange(n + 1, dtype=np.int64)
        remap[unsel] = targets
        label[1:] = remap[label[1:]]
        active[unsel] = False
        np.add.at(comp_size, targets, comp_size[unsel])
        ids = np.nonzero(active)[0]
        comp_parent[ids] = remap[comp_parent[ids]]

        fresh = ids[(~completed[ids]) & (comp_size[ids] >= threshold)]
        completed[fresh] = True

        stats.append(IterationStats(
            iteration=iteration, candidates=len(cand), selected=int(sel.sum()),
            max_path=max_path, components_after=len(ids)))
        if check_invariants:
            _check_iteration(n, label, active, comp_parent, comp_size, parent)

    comp_ids = np.nonzero(active)[0]
    decomp = Decomposition(n=n, m=m, threshold=threshold, label=label,
                           comp_ids=comp_ids, comp_parent=comp_parent,
                           comp_size=comp_size, iterations=iteration,
                           stats=stats)
    if check_invariants:
        _check_iteration(n, label, active, comp_parent, comp_size, parent)
        cnt = np.bincount(comp_parent[comp_ids], minlength=n + 1)
        assert cnt[comp_ids].max(initial=0) <= 2
    return decomp


def _check_iteration(n, label, active, comp_parent, comp_size, parent):
    """Exact invariants: partition, connectivity, binary component tree."""
    ids = np.nonzero(active)[0]
    # partition exactness: labels map onto active components, sizes agree
    counts = np.bincount(label[1:], minlength=n + 1)
    assert counts.sum() == n
    assert (counts[ids] == comp_size[ids]).all(), "size drift"
    assert counts[~active].sum() == 0, "label points at a dead component"
    # connectivity: each component has exactly one vertex whose parent is
    # outside, and that vertex is the component id itself
    verts = np.arange(1, n + 1)
    par = parent[1:]
    is_root = (par == 0) | (label[par] != label[verts])
    roots = verts[is_root]
    assert len(roots) == len(ids), "component with 0 or 2+ roots"
    assert (label[roots] == roots).all(), "component id is not its root vertex"
    # binary component tree with a single root component
    cp = comp_parent[ids]
    assert ((cp == 0) | active[cp]).all(), "dangling component parent"
    assert (cp == 0).sum() == 1
    cnt = np.bincount(cp, minlength=n + 1)
    assert cnt[ids].max(initial=0) <= 2, "component tree not binary"
    # component parents consistent with vertex structure
    rp = parent[ids]
    expect = np.where(rp == 0, 0, label[rp])
    assert (expect == cp).all(), "component tree drifted from vertex tree"


@dataclass
class ComponentTree:
    ids: np.ndarray
    parent: dict
    size: dict
    children: dict

    @property
    def root(self) -> int:
        return next(c for c in self.ids if self.parent[int(c)] == 0)


def contract(decomp: Decomposition) -> ComponentTree:
    ids = decomp.comp_ids
    parent = {int(c): int(decomp.comp_parent[c]) for c in ids}
    size = {int(c): int(decomp.comp_size[c]) for c in ids}
    children: dict = {int(c): [] for c in ids}
    for c in ids:
        p = parent[int(c)]
        if p:
            children[p].append(int(c))
    return ComponentTree(ids=ids, parent=parent, size=size, children=children)


def decompose_tree(btree, m: int, seed=0, **kw) -> Decomposition:
    return decompose_core(btree.parent, m, seed, **kw)


def dump_components(decomp: Decomposition, parent: np.ndarray) -> str:
    """Debug format: one line per component,
    ``id: vertices | outer (child,parent) edges``."""
    lines = []
    label = decomp.label
    for cid in decomp.comp_ids:
        verts = decomp.component_vertices(int(cid))
        outer = []
        p = int(parent[cid])
        if p:
            outer.append((int(cid), p))
        for v in verts:
            for c in np.nonzero(parent[1:] == v)[0] + 1:
                if label[c] != cid:
                    outer.append((int(c), int(v)))
        edges = " ".join(f"({a},{b})" for a, b in sorted(outer))
        lines.append(f"{int(cid)}: {' '.join(map(str, verts))} | {edges}")
    return "\n".join(lines) + "\n"
