"""Recursive partitioning of a component tree into a merge schedule.

The scheduler repeatedly splits every multi-node piece along the edge above
its heaviest subtree (``first_cut``); a split can leave one side with four
border nodes, in which case a second cut along border counts restores the
three-border invariant before the next step.  Cut edges are recorded in
reverse order into edge sets E_1..E_2S: replaying the sets in order merges
last cuts first, so every piece materialized during replay is exactly a
piece of the forward pass and never exceeds three borders.

Everything here runs on the contracted component tree (one node per
component), which fits on one machine by construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field


def descendant_counts(children: dict, root: int) -> dict:
    """Nodes per subtree, iteratively (children maps node -> list)."""
    out = {}
    stack = [(root, False)]
    while stack:
        v, done = stack.pop()
        if done:
            out[v] = 1 + sum(out[c] for c in children.get(v, ()))
        else:
            stack.append((v, True))
            stack.extend((c, False) for c in children.get(v, ()))
    return out


def border_counts(children: dict, root: int, borders: set) -> dict:
    out = {}
    stack = [(root, False)]
    while stack:
        v, done = stack.pop()
        if done:
            out[v] = int(v in borders) + sum(out[c] for c in children.get(v, ()))
        else:
            stack.append((v, True))
            stack.extend((c, False) for c in children.get(v, ()))
    return out


def _heaviest_child(children: dict, v: int, score: dict):
    best = None
    for c in children.get(v, ()):
        if best is None or (score[c], -c) > (score[best], -best):
            best = c
    return best


def first_cut(children: dict, root: int, D: dict) -> tuple:
    """Edge (v, heaviest child of v) below which the subtree first drops to
    at most two thirds of the piece; requires at least two nodes."""
    n = D[root]
    if n < 2:
        raise ValueError("cannot cut a single-node piece")
    v = root
    c = _heaviest_child(children, v, D)
    while D[c] > 2 * n / 3:
        v = c
        c = _heaviest_child(children, v, D)
    return (v, c)


def second_cut(children: dict, root: int, B: dict) -> tuple:
    """Edge separating a four-border piece so both sides keep ≤ 3 borders."""
    v = root
    c = _heaviest_child(children, v, B)
    while B[c] > 2:
        v = c
        c = _heaviest_child(children, v, B)
    return (v, c)


@dataclass
class Piece:
    root: int
    nodes: set
    borders: set

    def __len__(self):
        return len(self.nodes)


def _piece_children(children: dict, piece: Piece) -> dict:
    return {v: [c for c in children.get(v, ()) if c in piece.nodes]
            for v in piece.nodes}


def split_piece(children: dict, piece: Piece, edge: tuple) -> tuple:
    """Remove ``edge`` = (v, c); returns (under piece rooted at c, over)."""
    v, c = edge
    sub = _piece_children(children, piece)
    under = set()
    stack = [c]
    while stack:
        x = stack.pop()
        under.add(x)
        stack.extend(sub[x])
    over = piece.nodes - under
    return (
        Piece(root=c, nodes=under, borders=(piece.borders & under) | {c}),
        Piece(root=piece.root, nodes=over, borders=(piece.borders & over) | {v}),
    )


@dataclass
class ScheduledCut:
    step: int
    kind: str                 # "first" | "second"
    edge: tuple
    piece_size: int
    split: tuple              # (under, over) node counts


@dataclass
class MergeSchedule:
    n_nodes: int
    depth: int                              # S, number of partition steps
    levels: list = field(default_factory=list)   # E_1 .. E_2S
    cuts: list = field(default_factory=list)
    max_borders: int = 0

    def __words__(self):
        return 3 + sum(2 * len(lv) + 1 for lv in self.levels)

    def depth_bound(self) -> int:
        if self.n_nodes < 2:
            return 0
        return 2 * math.ceil(math.log(self.n_nodes, 1.5))


def build_merge_schedule(children: dict, root: int) -> MergeSchedule:
    all_nodes = {root}
    stack = [root]
    while stack:
        v = stack.pop()
        for c in children.get(v, ()):
            all_nodes.add(c)
            stack.append(c)

    schedule = MergeSchedule(n_nodes=len(all_nodes), depth=0)
    pieces = [Piece(root=root, nodes=all_nodes, borders=set())]
    firsts: list[list] = []
    seconds: list[list] = []
    step = 0
    while any(len(p) > 1 for p in pieces):
        step += 1
        lv_first, lv_second = [], []
        after_first = []
        for p in pieces:
            if len(p) == 1:
                after_first.append(p)
                continue
            sub = _piece_children(children, p)
            edge = first_cut(sub, p.root, descendant_counts(sub, p.root))
            under, over = split_piece(children, p, edge)
            lv_first.append(edge)
            schedule.cuts.append(ScheduledCut(
                step=step, kind="first", edge=edge, piece_size=len(p),
                split=(len(under), len(over))))
            after_first.extend((under, over))
        survivors = []
        for p in after_first:
            if len(p.borders) <= 3:
                survivors.append(p)
                continue
            sub = _piece_children(children, p)
            edge = second_cut(sub, p.root, border_counts(sub, p.root, p.borders))
            under, over = split_piece(children, p, edge)
            lv_second.append(edge)
            schedule.cuts.append(ScheduledCut(
                step=step, kind="second", edge=edge, piece_size=len(p),
                split=(len(under), len(over))))
            survivors.extend((under, over))
        pieces = survivors
        firsts.append(lv_first)
        seconds.append(lv_second)
        worst = max(len(p.borders) for p in pieces)
        schedule.max_borders = max(schedule.max_borders, worst)
        if worst > 3:
            raise AssertionError(f"piece with {worst} borders after step {step}")

    S = step
    schedule.depth = S
    # reverse order: replay undoes the last step first, and within a step
    # the second cut (applied last) is undone before the first cut
    levels = [[] for _ in range(2 * S)]
    for t in range(1, S + 1):
        levels[2 * (S - t)] = seconds[t - 1]
        levels[2 * (S - t) + 1] = firsts[t - 1]
    schedule.levels = levels
    return schedule


def replay_schedule(schedule: MergeSchedule, parent: dict) -> None:
    """Validate E_1..E_2S: each tree edge exactly once, merges always join
    two adjacent pieces, borders stay ≤ 3, and the result is one piece."""
    nodes = list(parent)
    edges = {(parent[c], c) for c in nodes if parent[c] != 0}
    seen = [e for lv in schedule.levels for e in lv]
    assert len(seen) == len(set(seen)) == len(edges), "edge multiset mismatch"
    assert set(seen) == edges, "scheduled edges are not the tree edges"

    lead = {v: v for v in nodes}

    def find(v):
        while lead[v] != v:
            lead[v] = lead[lead[v]]
            v = lead[v]
        return v

    pending = {v: 0 for v in nodes}
    for (v, c) in edges:
        pending[v] += 1
        pending[c] += 1
    members = {v: {v} for v in nodes}
    for r, lv in enumerate(schedule.levels, start=1):
        for (v, c) in lv:
            a, b = find(v), find(c)
            assert a != b, f"edge ({v},{c}) does not join two pieces"
            pending[v] -= 1
            pending[c] -= 1
            members[a] |= members[b]
            lead[b] = a
            del members[b]
        # a fourth border may appear between undoing a step's second cut
        # and its first cut; step boundaries (even r) restore three
        cap = 4 if r % 2 else 3
        for grp in members.values():
            assert sum(1 for x in grp if pending[x] > 0) <= cap, \
                f"replay piece exceeded {cap} borders after E_{r}"
    assert len(members) == 1
    (only,) = members.values()
    assert only == set(nodes)
