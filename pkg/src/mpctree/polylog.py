"""Tree problems with constant-size DP state, solved in O(1) extra rounds.

Each plugin gives every vertex a short vector; auxiliary vertices (from the
binary extension) get "pass-through" semantics so the answer on T^b equals
the answer on the original tree.  The distributed solve reuses the six
binary-extension rounds, decomposes the extension on machine 0, compresses
every component where it lives, and folds the component tables back together
— nine rounds end to end regardless of input size.  Inputs whose extension
is small skip the decomposition and are solved on machine 0 in eight rounds.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .binarize import (
    build_extension, r1_local_counts, r2_total_counts, r3_reparent_and_route,
    r4_prefix_counts, r5_build_gadgets, r6_assemble, rows_to_tree,
    _tree_shards,
)
from .decompose import decompose_core
from .framework import (
    ComponentData, Plugin, compress_component, evaluate_table,
    run_plugin_local,
)
from .hashing import k_for_machines, sample_hash
from .runtime import ClusterConfig, polylog_capacity, run_simulation
from .trees import Tree
from .values import seed_int


class MaxMatching(Plugin):
    """Maximum weight matching.

    States: (matched, free).  For an original vertex: best value with v
    matched / unmatched.  For an auxiliary vertex: best value where the
    bundle it represents does / does not carry a match up to its original
    ancestor.  A carried match enters through an original child's up-edge,
    whose weight rides along; auxiliary edges cost nothing.
    """

    name = "matching"
    kind = "polylog"
    states = ("matched", "free")
    sense = "max"

    def update(self, aux, children):
        alg = self.alg
        sel, unm = [], []
        for caux, vec, w in children:
            c, cp = vec
            sel.append(alg.add(w, c if caux else cp))
            unm.append(cp if caux else alg.best(c, cp))
        k = len(children)
        matched = alg.best(*[
            alg.add(sel[i], *[unm[j] for j in range(k) if j != i])
            for i in range(k)])
        return (matched, alg.add(*unm))

    def finalize(self, root_vector):
        return self.alg.best(*root_vector)


class MaxIndependentSet(Plugin):
    """Maximum independent set (cardinality).

    States: original (in-set, out-of-set); auxiliary (some original vertex
    below the bundle is selected, none is).  An original vertex may only
    enter the set if no adjacent original vertex does, and adjacency passes
    through auxiliary bundles untouched.
    """

    name = "mis"
    kind = "polylog"
    states = ("take", "skip")
    sense = "max"

    def update(self, aux, children):
        alg = self.alg
        sel = [vec[0] for _, vec, _ in children]
        none = [vec[1] for _, vec, _ in children]
        anyv = [alg.best(*vec) for _, vec, _ in children]
        k = len(children)
        if aux:
            some = alg.best(*[
                alg.add(sel[i], *[anyv[j] for j in range(k) if j != i])
                for i in range(k)])
            return (some, alg.add(*none))
        return (alg.add(1, *none), alg.add(*anyv))

    def finalize(self, root_vector):
        return self.alg.best(*root_vector)


class MinVertexCover(Plugin):
    """Minimum vertex cover (cardinality).

    States: original (in-cover, out-of-cover); auxiliary (every original
    vertex below the bundle is in the cover, no constraint).  An uncovered
    vertex forces all original children — across bundles — into the cover.
    """

    name = "vc"
    kind = "polylog"
    states = ("all_in", "any")
    sense = "min"

    def update(self, aux, children):
        alg = self.alg
        safe = [vec[0] for _, vec, _ in children]
        anyv = [alg.best(*vec) for _, vec, _ in children]
        if aux:
            return (alg.add(*safe), alg.add(*anyv))
        return (alg.add(1, *anyv), alg.add(*safe))

    def finalize(self, root_vector):
        return self.alg.best(*root_vector)


class MinDominatingSet(Plugin):
    """Minimum dominating set (cardinality).

    States per original vertex: in the set / out but dominated by a child /
    out and relying on its parent.  Auxiliary vertices carry the same three
    states for the bundle as a whole: valid if the original ancestor is in
    the set / valid without it and donating a dominator to it / valid
    without it and donating nothing.
    """

    name = "dominating-set"
    kind = "polylog"
    states = ("taken", "child_covered", "parent_needed")
    sense = "min"

    def update(self, aux, children):
        alg = self.alg
        r0, r1, r2 = [], [], []
        for caux, vec, _ in children:
            if caux:
                a, b, c = vec
            else:
                d0, d1, d2 = vec
                a, b, c = alg.best(d0, d1, d2), d0, d1
            r0.append(a)
            r1.append(b)
            r2.append(c)
        k = len(children)
        covered = alg.best(*[
            alg.add(r1[i], *[alg.best(r1[j], r2[j])
                             for j in range(k) if j != i])
            for i in range(k)])
        base = alg.add(*r0)
        return (base if aux else alg.add(1, base), covered, alg.add(*r2))

    def finalize(self, root_vector):
        return self.alg.best(root_vector[0], root_vector[1])


class LongestPath(Plugin):
    """Heaviest simple path (edge weights; auxiliary edges weigh nothing,
    so paths in T^b mirror paths in the original tree exactly).

    States: (down, best) — heaviest downward path from the vertex, and the
    heaviest path anywhere in its subtree.
    """

    name = "longest-path"
    kind = "polylog"
    states = ("down", "best")
    sense = "max"

    def update(self, aux, children):
        alg = self.alg
        arms = [alg.best(0, alg.add(w, vec[0])) for _, vec, w in children]
        down = alg.best(0, *[alg.add(w, vec[0]) for _, vec, w in children])
        cands = [down] + [vec[1] for _, vec, _ in children]
        for i in range(len(arms)):
            for j in range(i + 1, len(arms)):
                cands.append(alg.add(arms[i], arms[j]))
        return (down, alg.best(*cands))

    def finalize(self, root_vector):
        return root_vector[1]


POLYLOG_PLUGINS = {cls.name: cls for cls in (
    MaxMatching, MaxIndependentSet, MinVertexCover, MinDominatingSet,
    LongestPath)}


def make_plugin(name: str) -> Plugin:
    if name not in POLYLOG_PLUGINS:
        raise KeyError(f"unknown problem {name!r}")
    return POLYLOG_PLUGINS[name]()


def solve_sequential(tree: Tree, problem: str, seed=0):
    """Single-machine reference: run the plugin over the binary extension."""
    btree, _ = build_extension(tree, 2, seed)
    return run_plugin_local(make_plugin(problem), btree)


def choose_machines(n: int) -> int:
    """Default cluster width; grows with n so component tables stay well
    under the per-machine space budget."""
    m = 2
    while m * 2 <= 16 and 60 * (m * 2) ** 2 <= n:
        m *= 2
    return m


# extensions at most this large are shipped whole to machine 0
LOCAL_CUTOFF = 256

# default budgets below this many words cannot hold even the bookkeeping
FLOOR_WORDS = 256


def comp_hash(m: int, seed):
    """Component-id hash; independent of the vertex shard hash."""
    return sample_hash(k_for_machines(m), m, seed_int(seed, "comp-shard"))


def _cat(blocks, width):
    blocks = [b for b in blocks if len(b)]
    if not blocks:
        return np.zeros((0, width), dtype=np.int64)
    return np.concatenate(blocks)


def _send_grouped(ctx, dests, block, wrap=None):
    for mu in range(ctx.m):
        mask = dests == mu
        if mask.any():
            part = np.ascontiguousarray(block[mask])
            ctx.send(mu, part if wrap is None else (wrap, part))


class PolylogSolveProgram:
    """Nine-round solve: binarize (1-6), ship labelled records (7),
    compress components (8), fold tables on machine 0 (9)."""

    def __init__(self, problems):
        self.plugins = [make_plugin(p) for p in problems]

    def setup(self, machine_id, m, shard, config):
        n, rows = shard
        return {
            "n": n,
            "rows": rows,
            "delta": max(1, -(-n // m)),
            "seed": config.seed,
            "h": sample_hash(k_for_machines(m), m,
                             seed_int(config.seed, "tree-shard")),
            "h2": comp_hash(m, config.seed),
            "root_row": np.zeros((0, 3), dtype=np.int64),
            "a1": 0,
            "mode": "",
        }

    def step(self, ctx):
        r, s = ctx.round, ctx.state
        if r == 1:
            r1_local_counts(s, ctx)
        elif r == 2:
            r2_total_counts(s, ctx)
        elif r == 3:
            r3_reparent_and_route(s, ctx)
        elif r == 4:
            r4_prefix_counts(s, ctx)
        elif r == 5:
            r5_build_gadgets(s, ctx, struct_cols=2)
        elif r == 6:
            self._r6_decompose(s, ctx)
        elif r == 7:
            self._r7_ship_records(s, ctx)
        elif r == 8:
            self._r8_compress(s, ctx)
        elif r == 9:
            self._r9_fold(s, ctx)
            ctx.finish()
        else:
            ctx.finish()

    # -- round bodies -------------------------------------------------

    def _r6_decompose(self, s, ctx):
        if ctx.machine_id != 0:
            r6_assemble(s, ctx)
            return
        blocks = [msg.payload for msg in ctx.inbox]
        own = _cat([b for b in blocks if b.shape[1] == 3], 3)
        s["rows"] = own[np.argsort(own[:, 0])] if len(own) else own
        struct = _cat([b for b in blocks if b.shape[1] == 2], 2)
        nb = int(struct[:, 0].max()) if len(struct) else 0
        parent = np.zeros(nb + 1, dtype=np.int64)
        parent[struct[:, 0]] = struct[:, 1]
        m = ctx.m
        if nb <= max(14 * m, LOCAL_CUTOFF):
            s["mode"] = "local"
            ctx.broadcast(("mode", "local"))
            return
        s["mode"] = "dist"
        d = decompose_core(parent, m, s["seed"])
        ids = np.arange(1, nb + 1, dtype=np.int64)
        lab = d.label[1:]
        plab = np.where(parent[ids] == 0, 0, d.label[parent[ids]])
        trip = np.stack([ids, lab, plab], axis=1)
        _send_grouped(ctx, s["h"].eval_array(ids.astype(np.uint64)), trip)
        s["comp_parent"] = {int(c): int(d.comp_parent[c]) for c in d.comp_ids}

    def _r7_ship_records(self, s, ctx):
        if any(isinstance(msg.payload, tuple) for msg in ctx.inbox):
            s["mode"] = "local"
            ctx.send(0, s["rows"])
            s["rows"] = None
            return
        s["mode"] = "dist"
        rows = s["rows"]
        lab_rows = _cat([msg.payload for msg in ctx.inbox], 3)
        lab_rows = lab_rows[np.argsort(lab_rows[:, 0])]
        v, par, w = rows[:, 0], rows[:, 1], rows[:, 2]
        lab, plab = lab_rows[:, 1], lab_rows[:, 2]
        aux = (v > s["n"]).astype(np.int64)
        member = np.stack([lab, v, par, w, aux], axis=1)
        _send_grouped(ctx, s["h2"].eval_array(lab.astype(np.uint64)),
                      member, wrap="mem")
        outer = (par != 0) & (lab != plab)
        stub = np.stack([plab, v, par, w, aux], axis=1)[outer]
        _send_grouped(ctx, s["h2"].eval_array(stub[:, 0].astype(np.uint64)),
                      stub, wrap="stub")
        s["rows"] = None

    def _r8_compress(self, s, ctx):
        if s["mode"] == "local":
            if ctx.machine_id == 0:
                rows = _cat([msg.payload for msg in ctx.inbox], 3)
                bt = rows_to_tree(rows, s["n"])
                s["answers"] = {pl.name: run_plugin_local(pl, bt)
                                for pl in self.plugins}
            ctx.finish()
            return
        mems, stubs = [], []
        for msg in ctx.inbox:
            tag, block = msg.payload
            (mems if tag == "mem" else stubs).append(block)
        comps: dict[int, ComponentData] = {}
        for row in _cat(mems, 5):
            cid = int(row[0])
            comp = comps.setdefault(cid, ComponentData(cid))
            comp.members.append((int(row[1]), int(row[2]), int(row[3]),
                                 bool(row[4])))
        for row in _cat(stubs, 5):
            cid = int(row[0])
            comp = comps.setdefault(cid, ComponentData(cid))
            comp.outer_children.append((int(row[1]), int(row[2]), int(row[3]),
                                        bool(row[4])))
        for pl in self.plugins:
            for comp in comps.values():
                ctx.send(0, (pl.name, compress_component(pl, comp)))
        if ctx.machine_id != 0:
            ctx.finish()

    def _r9_fold(self, s, ctx):
        if ctx.machine_id != 0 or s["mode"] != "dist":
            return
        tables: dict[str, dict] = {pl.name: {} for pl in self.plugins}
        for msg in ctx.inbox:
            name, t = msg.payload
            tables[name][t.comp_id] = t
        cp = s.pop("comp_parent")
        depth: dict[int, int] = {}
        for c in cp:
            chain = []
            x = c
            while x and x not in depth:
                chain.append(x)
                x = cp[x]
            d = depth.get(x, 0)
            for y in reversed(chain):
                d += 1
                depth[y] = d
        order = sorted(cp, key=lambda c: -depth[c])
        root = next(c for c in cp if cp[c] == 0)
        answers = {}
        for pl in self.plugins:
            resolved: dict[int, tuple] = {}
            for c in order:
                resolved[c] = evaluate_table(pl, tables[pl.name][c], resolved)
            answers[pl.name] = pl.finalize(resolved[root])
        s["answers"] = answers

    def output(self, machine_id, state):
        if machine_id == 0:
            return {"mode": state["mode"], "values": state["answers"]}
        return None


@dataclass
class SolveOutcome:
    values: dict
    mode: str
    machines: int
    rounds: int
    metrics: list

    def max_resident(self) -> int:
        return max(r.max_resident for r in self.metrics)


def solve_polylog(tree: Tree, problems, machines: int | None = None, seed=0,
                  cap_constant: int = 8,
                  enforce_caps: bool = True) -> SolveOutcome:
    names = [problems] if isinstance(problems, str) else list(problems)
    m = machines or choose_machines(tree.n)
    words = polylog_capacity(tree.n, m, cap_constant)
    if cap_constant >= 1:
        # sub-1 constants mean deliberate starvation: skip the floor
        words = max(words, FLOOR_WORDS)
    cluster = ClusterConfig(machines=m, words=words,
                            enforce_caps=enforce_caps, seed=seed)
    res = run_simulation(PolylogSolveProgram(names), cluster,
                         _tree_shards(tree, m, seed))
    out = next(o for o in res.outputs if o is not None)
    return SolveOutcome(values=out["values"], mode=out["mode"], machines=m,
                        rounds=res.rounds, metrics=res.metrics)
