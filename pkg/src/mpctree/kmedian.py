"""Exact k-median and k-center on weighted trees.

Both problems place exactly ``k`` facilities on original vertices and serve
every original vertex from its nearest facility; k-median charges the sum of
service distances, k-center the maximum.  The solver runs a two-curve DP over
the binary extension of the input tree, folding children into their parent in
post-order.

Per vertex ``v`` and facility count ``q`` we keep two step functions sampled
on ``grid[v]`` (the sorted distances from ``v`` to every vertex, plus an
"unbounded" sentinel):

``G[q][t]``
    cheapest way to serve the merged set entirely from its own ``q``
    facilities with the one nearest to ``v`` at distance at most ``t``
    (nonincreasing in ``t``).
``F[q][t]``
    cheapest way to serve the merged set when, in addition to its ``q``
    internal facilities, a helper facility sits at distance ``t`` above ``v``
    (nondecreasing in ``t``).

Sampling on the full distance grid keeps every later lookup exact: a query
always lands on, or rounds down to, a grid point realised by some concrete
facility placement.  Auxiliary vertices are neither demand points nor
facility sites: they seed ``F[0] = 0`` and everything else infeasible, and
their zero-weight edges leave all distances unchanged.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .binarize import build_extension, euler_intervals
from .trees import Tree
from .values import INF64, renorm_min

__all__ = [
    "CurveReport",
    "all_pairs_distances",
    "facility_report",
    "solve_kcenter",
    "solve_kmedian",
]


def all_pairs_distances(tree: Tree) -> np.ndarray:
    """(n+1, n+1) int64 path-weight matrix; row/column 0 unused.

    Row ``v`` is derived from row ``parent(v)`` in one vectorised pass: adding
    the edge weight is right for vertices outside v's subtree, and the Euler
    interval of v tells us which entries to correct by twice the weight.
    """
    n = tree.n
    w = tree.int_weights(default=1)
    tin, tout = euler_intervals(tree)
    order = sorted(range(1, n + 1), key=lambda v: tin[v])

    dist = np.zeros((n + 1, n + 1), dtype=np.int64)
    root_row = dist[tree.root]
    for v in order:
        p = int(tree.parent[v])
        if p:
            root_row[v] = root_row[p] + w[v]
    for v in order:
        p = int(tree.parent[v])
        if p == 0:
            continue
        row = dist[p] + w[v]
        inside = (tin >= tin[v]) & (tin <= tout[v])
        row[inside] -= 2 * w[v]
        row[0] = 0
        dist[v] = row
    return dist


def _vertex_curves(grid: np.ndarray, k: int, aux: bool):
    g = len(grid)
    F = np.full((k + 1, g), INF64, dtype=np.int64)
    G = np.full((k + 1, g), INF64, dtype=np.int64)
    if aux:
        F[0] = 0
    else:
        F[0] = grid
        if k >= 1:
            F[1] = 0
            G[1] = 0
    return F, G


def _merge_child(combine, vg, vF, vG, cg, cF, cG, w, k):
    """Fold a finished child (curves over ``cg``) into its parent's curves.

    Three service patterns cover every placement exactly once:

    * the helper above ``v`` (if any) serves across the edge: ``F + F``;
    * the facility nearest to ``v`` is on the parent side at distance ``r``,
      and the child side may route through it: ``G(r) + F_c(r + w)``,
      minimised over ``r`` up to the query point;
    * it is on the child side at distance ``d`` from the child, so the parent
      side sees a helper at ``d + w``: ``F(d + w) + G_c(d)``.
    """
    child_at = cF[:, np.searchsorted(cg, vg + w, side="right") - 1]
    parent_at = vF[:, np.searchsorted(vg, cg + w, side="right") - 1]
    back = np.searchsorted(cg + w, vg, side="right") - 1
    reachable = back >= 0
    back = np.clip(back, 0, None)

    nF = np.full_like(vF, INF64)
    nG = np.full_like(vG, INF64)
    for q1 in range(k + 1):
        for q2 in range(k + 1 - q1):
            q = q1 + q2
            helper_both = combine(vF[q1], child_at[q2])
            near_parent = np.minimum.accumulate(combine(vG[q1], child_at[q2]))
            near_child = np.minimum.accumulate(combine(parent_at[q1], cG[q2]))
            near_child = np.where(reachable, near_child[back], INF64)
            served_inside = np.minimum(near_parent, near_child)
            np.minimum(nG[q], served_inside, out=nG[q])
            np.minimum(nF[q], np.minimum(helper_both, served_inside), out=nF[q])
    return renorm_min(nF), renorm_min(nG)


def _plus(a, b):
    return renorm_min(a + b)


@dataclass(frozen=True)
class CurveReport:
    """Answer plus the structural facts the curves must satisfy everywhere."""

    value: int
    f_monotone: bool
    g_monotone: bool
    agree_at_infinity: bool
    vertices: int
    values: tuple = ()       # root optimum per facility count 0..k


def _run_curves(tree: Tree, k: int, objective: str, seed=0) -> CurveReport:
    if not (1 <= k <= tree.n):
        raise ValueError(f"k={k} outside [1, {tree.n}]")
    combine = _plus if objective == "median" else np.maximum

    bt, _ = build_extension(tree, 2, seed)
    dist = all_pairs_distances(bt)
    wt = bt.int_weights(default=1)
    kids = bt.children_lists()
    grids = [None] * (bt.n + 1)
    for v in range(1, bt.n + 1):
        grids[v] = np.append(np.unique(dist[v, 1:]), INF64)
    del dist

    f_mono = g_mono = agree = True
    done: dict[int, tuple[np.ndarray, np.ndarray]] = {}
    stack = [(bt.root, False)]
    while stack:
        v, ready = stack.pop()
        if not ready:
            stack.append((v, True))
            stack.extend((c, False) for c in kids[v])
            continue
        F, G = _vertex_curves(grids[v], k, bt.is_aux(v))
        for c in kids[v]:
            cF, cG = done.pop(c)
            F, G = _merge_child(combine, grids[v], F, G, grids[c], cF, cG,
                                int(wt[c]), k)
        f_mono &= bool(np.all(np.diff(F, axis=1) >= 0))
        g_mono &= bool(np.all(np.diff(G, axis=1) <= 0))
        agree &= bool(np.array_equal(F[:, -1], G[:, -1]))
        done[v] = (F, G)

    F, G = done[bt.root]
    per_count = tuple(int(x) for x in G[:, -1])
    return CurveReport(per_count[k], f_mono, g_mono, agree, bt.n, per_count)


def facility_report(tree: Tree, k: int, objective: str, seed=0) -> CurveReport:
    if objective not in ("median", "center"):
        raise ValueError(f"unknown objective {objective!r}")
    return _run_curves(tree, k, objective, seed)


def solve_kmedian(tree: Tree, k: int, seed=0) -> int:
    """Minimum total service distance with exactly ``k`` facilities."""
    return _run_curves(tree, k, "median", seed).value


def solve_kcenter(tree: Tree, k: int, seed=0) -> int:
    """Minimum service radius with exactly ``k`` facilities."""
    return _run_curves(tree, k, "center", seed).value
