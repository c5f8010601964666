"""Binary extension of a rooted tree: bound degrees, then binarize.

Stage 1 (degree bounding): every vertex v with more than delta = ceil(n/m)
children gets ceil(children/delta) auxiliary children, and each original
child re-parents to one of them chosen uniformly (keyed by the child's index,
so any machine can recompute the choice).  Auxiliary indexes for v start at
D[v] = n + (prefix sum of auxiliary counts over smaller indexes).

Stage 2 (binarize): all children of each parent are routed to machine
h(parent); a parent with more than two children gets a balanced binary gadget
built over its children sorted by index, adding (children - 2) inner
auxiliary vertices.  Gadget indexes are allocated from per-machine blocks
agreed via a prefix exchange, machines in index order and parents in index
order within a machine.

Both stages exist twice: `build_extension` runs locally (canonical reference,
also used by the facility-location solvers), and the simulated protocol runs
the same logic distributed in 6 rounds.  Because every random choice and
every allocation order is derived from (seed, index) the two constructions
emit the identical tree, which the tests exploit.

Edges above original vertices keep their original weight; edges above
auxiliary vertices carry weight 0 (problem plugins reinterpret auxiliary
edges as they need).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .hashing import k_for_machines, sample_hash
from .runtime import ClusterConfig, run_simulation
from .trees import Tree, shard_rows
from .values import seed_int


@dataclass(frozen=True)
class ExtensionMap:
    """Original indexes are preserved; auxiliaries are everything above."""

    original_n: int
    degree_aux: int      # stage-1 auxiliaries (n .. n+degree_aux]
    gadget_aux: int      # stage-2 auxiliaries above those
    delta: int

    @property
    def total(self) -> int:
        return self.original_n + self.degree_aux + self.gadget_aux

    def is_aux(self, v: int) -> bool:
        return v > self.original_n


def run_hash(m: int, seed) -> "HashFn":
    """The shard hash every pipeline stage shares, derived from the run seed."""
    return sample_hash(k_for_machines(m), m, seed_int(seed, "tree-shard"))


def spread_words(n: int, seed) -> np.ndarray:
    """Per-index raw randomness for stage-1 re-parenting (counter-based, so
    any subset of machines draws identical values for the same index)."""
    gen = np.random.Generator(np.random.Philox(key=seed_int(seed, "spread")))
    return gen.integers(0, 1 << 62, size=n + 1, dtype=np.uint64)


def stage1_plan(n: int, child_count: np.ndarray, delta: int):
    """High-degree dictionary: arrays of (vertex, aux count, block start)."""
    high = np.nonzero(child_count[1:n + 1] > delta)[0] + 1
    s = -(-child_count[high] // delta) if len(high) else np.zeros(0, dtype=np.int64)
    starts = n + np.concatenate([[0], np.cumsum(s)[:-1]]) if len(high) else high
    return high.astype(np.int64), s.astype(np.int64), starts.astype(np.int64)


def _gadget(parent: int, children, alloc) -> list:
    """Rows (id, parent, weight-keep flag) of a balanced binary gadget.

    children are (id, weight) pairs sorted by id; alloc is an iterator of
    fresh auxiliary indexes.  Returns (id, parent, weight) rows for every
    child and every new inner vertex; left-leaning halves keep the build
    deterministic.
    """
    rows = []

    def attach(top, group):
        if len(group) == 1:
            cid, w = group[0]
            rows.append((cid, top, w))
            return
        mid = -(-len(group) // 2)
        left, right = group[:mid], group[mid:]
        for part in (left, right):
            if len(part) == 1:
                cid, w = part[0]
                rows.append((cid, top, w))
            else:
                nid = next(alloc)
                rows.append((nid, top, 0))
                attach(nid, part)

    if len(children) <= 2:
        for cid, w in children:
            rows.append((cid, parent, w))
    else:
        attach(parent, children)
    return rows


def _alloc_counter(start):
    v = start
    while True:
        v += 1
        yield v


# ---------------------------------------------------------------------------
# local (canonical) construction
# ---------------------------------------------------------------------------

def build_extension(tree: Tree, m: int, seed=0) -> tuple[Tree, ExtensionMap]:
    n = tree.n
    delta = max(1, -(-n // m))
    w = tree.int_weights(default=1)
    h = run_hash(m, seed)

    child_count = np.bincount(tree.parent[1:].astype(np.int64), minlength=n + 1)
    high, s, starts = stage1_plan(n, child_count, delta)
    a1 = int(s.sum())
    hi_pos = {int(v): i for i, v in enumerate(high)}

    # T^d parent/weight arrays over ids 1..n+a1
    nd = n + a1
    parent_d = np.zeros(nd + 1, dtype=np.int64)
    weight_d = np.zeros(nd + 1, dtype=np.int64)
    parent_d[1:n + 1] = tree.parent[1:n + 1]
    weight_d[1:n + 1] = w[1:n + 1]
    for i, v in enumerate(high):
        lo = int(starts[i])
        parent_d[lo + 1: lo + 1 + int(s[i])] = v
    raw = spread_words(n, seed)
    for v in range(1, n + 1):
        p = int(tree.parent[v])
        if p in hi_pos:
            i = hi_pos[p]
            parent_d[v] = int(starts[i]) + 1 + int(raw[v] % np.uint64(int(s[i])))

    # stage 2: group children by parent, allocate gadget blocks in
    # (machine of parent, parent index) order
    kids: dict[int, list] = {}
    root = 0
    for v in range(1, nd + 1):
        p = int(parent_d[v])
        if p == 0:
            root = v
        else:
            kids.setdefault(p, []).append((v, int(weight_d[v])))
    parents = sorted(kids, key=lambda p: (int(h(p)), p))
    total_aux = sum(max(len(kids[p]) - 2, 0) for p in parents)
    nb = nd + total_aux
    parent_b = np.zeros(nb + 1, dtype=np.int64)
    weight_b = np.zeros(nb + 1, dtype=np.int64)
    alloc = _alloc_counter(nd)
    for p in parents:
        for (cid, cp, cw) in _gadget(p, sorted(kids[p]), alloc):
            parent_b[cid] = cp
            weight_b[cid] = cw
    parent_b[root] = 0

    ext = ExtensionMap(original_n=n, degree_aux=a1, gadget_aux=total_aux,
                       delta=delta)
    btree = Tree(n=nb, parent=parent_b, weights=[int(x) for x in weight_b],
                 original_n=n)
    return btree, ext


# ---------------------------------------------------------------------------
# simulated construction (shared round bodies; 6 rounds end to end)
# ---------------------------------------------------------------------------

def _pack(rows: list) -> np.ndarray:
    return np.asarray(rows, dtype=np.int64).reshape(-1, 3)


def _inbox_rows(ctx) -> np.ndarray:
    blocks = [msg.payload for msg in ctx.inbox if isinstance(msg.payload, np.ndarray)]
    if not blocks:
        return np.zeros((0, 3), dtype=np.int64)
    return np.concatenate([b.reshape(-1, b.shape[-1]) if b.ndim > 1 else b.reshape(-1, 3)
                           for b in blocks])


def r1_local_counts(state, ctx):
    """Count local children per parent; ship counts to each parent's home."""
    rows = state["rows"]
    h = state["h"]
    parents = rows[rows[:, 1] > 0, 1]
    if len(parents):
        uniq, cnt = np.unique(parents, return_counts=True)
        dests = h.eval_array(uniq.astype(np.uint64))
        for mu in range(ctx.m):
            mask = dests == mu
            if mask.any():
                ctx.send(mu, np.stack([uniq[mask], cnt[mask]], axis=1))


def r2_total_counts(state, ctx):
    """Sum child counts for owned vertices; broadcast the high-degree plan."""
    n, delta = state["n"], state["delta"]
    cnt = np.zeros(n + 1, dtype=np.int64)
    for msg in ctx.inbox:
        block = msg.payload
        np.add.at(cnt, block[:, 0], block[:, 1])
    mine = state["rows"][:, 0]
    high = mine[cnt[mine] > delta]
    s = -(-cnt[high] // delta)
    ctx.broadcast(np.stack([high, s], axis=1))


def r3_reparent_and_route(state, ctx):
    """Assemble the global plan, re-parent, create stage-1 auxiliaries, and
    route every non-root row to its parent's constructor machine."""
    n, h, seed = state["n"], state["h"], state["seed"]
    plan = _inbox_rows(ctx)[:, :2]
    order = np.argsort(plan[:, 0])
    high, s = plan[order, 0], plan[order, 1]
    starts = n + np.concatenate([[0], np.cumsum(s)[:-1]]) if len(high) else high
    state["a1"] = int(s.sum())

    rows = state["rows"]
    out = [rows]
    # stage-1 auxiliaries are created by the machine owning the high vertex
    mine = set(rows[:, 0].tolist())
    for i in range(len(high)):
        v = int(high[i])
        if v in mine:
            lo, cnt_i = int(starts[i]), int(s[i])
            ids = np.arange(lo + 1, lo + 1 + cnt_i, dtype=np.int64)
            out.append(np.stack([ids, np.full(cnt_i, v, dtype=np.int64),
                                 np.zeros(cnt_i, dtype=np.int64)], axis=1))
    allrows = np.concatenate(out)

    # re-parent children of high-degree vertices
    if len(high):
        pos = {int(v): i for i, v in enumerate(high)}
        raw = spread_words(n, seed)
        par = allrows[:, 1]
        for r in range(len(allrows)):
            p = int(par[r])
            if p in pos and allrows[r, 0] <= n:
                i = pos[p]
                allrows[r, 1] = int(starts[i]) + 1 + int(raw[allrows[r, 0]] % np.uint64(int(s[i])))

    rootmask = allrows[:, 1] == 0
    state["root_row"] = allrows[rootmask]
    moved = allrows[~rootmask]
    dests = h.eval_array(moved[:, 1].astype(np.uint64))
    for mu in range(ctx.m):
        mask = dests == mu
        if mask.any():
            ctx.send(mu, np.ascontiguousarray(moved[mask]))


def r4_prefix_counts(state, ctx):
    """Group arrivals by parent; tell higher machines my gadget-aux need."""
    rows = _inbox_rows(ctx)
    state["to_build"] = rows
    if len(rows):
        _, cnt = np.unique(rows[:, 1], return_counts=True)
        need = int(np.maximum(cnt - 2, 0).sum())
    else:
        need = 0
    state["aux_need"] = need
    for mu in range(ctx.machine_id + 1, ctx.m):
        ctx.send(mu, need)


def r5_build_gadgets(state, ctx, struct_cols=0):
    """Allocate my gadget block, build gadgets, reshard rows to h(id).

    With ``struct_cols=2`` a 2-column (id, parent) copy of every resharded
    block is also sent to machine 0; with ``struct_cols=3`` the full
    (id, parent, weight) copy goes there, tagged so the receiver can tell it
    apart from its own rows.
    """
    n, h = state["n"], state["h"]
    base = n + state["a1"] + sum(int(msg.payload) for msg in ctx.inbox)
    rows = state["to_build"]
    out = []
    if len(rows):
        order = np.lexsort((rows[:, 0], rows[:, 1]))
        rows = rows[order]
        alloc = _alloc_counter(base)
        bounds = np.nonzero(np.diff(rows[:, 1]))[0] + 1
        for grp in np.split(rows, bounds):
            p = int(grp[0, 1])
            children = [(int(r[0]), int(r[2])) for r in grp]
            out.extend(_gadget(p, children, alloc))
    built = _pack(out)
    if len(state["root_row"]):
        built = np.concatenate([built, state["root_row"]])
    state.pop("to_build")
    if len(built):
        dests = h.eval_array(built[:, 0].astype(np.uint64))
        for mu in range(ctx.m):
            mask = dests == mu
            if mask.any():
                block = np.ascontiguousarray(built[mask])
                ctx.send(mu, block)
                if struct_cols == 2:
                    ctx.send(0, np.ascontiguousarray(block[:, :2]))
                elif struct_cols == 3:
                    ctx.send(0, ("struct", block))


def r6_assemble(state, ctx):
    rows = _inbox_rows(ctx)
    state["rows"] = rows[np.argsort(rows[:, 0])] if len(rows) else rows


class BinarizeProgram:
    """Standalone 6-round binary-extension pipeline."""

    def setup(self, machine_id, m, shard, config):
        n, rows = shard
        return {
            "n": n,
            "rows": rows,
            "delta": max(1, -(-n // m)),
            "seed": config.seed,
            "h": run_hash(m, config.seed),
            "root_row": np.zeros((0, 3), dtype=np.int64),
            "a1": 0,
        }

    def step(self, ctx):
        r = ctx.round
        s = ctx.state
        if r == 1:
            r1_local_counts(s, ctx)
        elif r == 2:
            r2_total_counts(s, ctx)
        elif r == 3:
            r3_reparent_and_route(s, ctx)
        elif r == 4:
            r4_prefix_counts(s, ctx)
        elif r == 5:
            r5_build_gadgets(s, ctx)
        elif r == 6:
            r6_assemble(s, ctx)
            ctx.finish()
        else:
            ctx.finish()

    def output(self, machine_id, state):
        return state["rows"]


class DegreeCountProgram:
    """Standalone child-count protocol (2 rounds: count, sum)."""

    def setup(self, machine_id, m, shard, config):
        n, rows = shard
        return {"n": n, "rows": rows, "h": run_hash(m, config.seed),
                "delta": n + 1, "counts": None}

    def step(self, ctx):
        if ctx.round == 1:
            r1_local_counts(ctx.state, ctx)
        elif ctx.round == 2:
            cnt = np.zeros(ctx.state["n"] + 1, dtype=np.int64)
            for msg in ctx.inbox:
                np.add.at(cnt, msg.payload[:, 0], msg.payload[:, 1])
            mine = ctx.state["rows"][:, 0]
            ctx.state["counts"] = np.stack([mine, cnt[mine]], axis=1)
            ctx.finish()
        else:
            ctx.finish()

    def output(self, machine_id, state):
        return state["counts"]


def _tree_shards(tree: Tree, m: int, seed) -> list:
    h = run_hash(m, seed)
    return [(tree.n, block) for block in shard_rows(tree, h)]


def compute_degrees(tree: Tree, cluster: ClusterConfig) -> np.ndarray:
    """Simulated child counts; returns the full (n+1,) count vector."""
    res = run_simulation(DegreeCountProgram(), cluster,
                         _tree_shards(tree, cluster.machines, cluster.seed))
    counts = np.zeros(tree.n + 1, dtype=np.int64)
    for block in res.outputs:
        counts[block[:, 0]] = block[:, 1]
    return counts


def rows_to_tree(rows: np.ndarray, original_n: int) -> Tree:
    """Assemble (id, parent, weight) rows back into a Tree."""
    nb = int(rows[:, 0].max())
    parent = np.zeros(nb + 1, dtype=np.int64)
    weight = np.zeros(nb + 1, dtype=np.int64)
    parent[rows[:, 0]] = rows[:, 1]
    weight[rows[:, 0]] = rows[:, 2]
    return Tree(n=nb, parent=parent, weights=[int(x) for x in weight],
                original_n=original_n)


def binarize_sim(tree: Tree, cluster: ClusterConfig):
    """Run the 6-round pipeline; returns (T^b as a Tree, SimResult)."""
    res = run_simulation(BinarizeProgram(), cluster,
                         _tree_shards(tree, cluster.machines, cluster.seed))
    rows = np.concatenate([r for r in res.outputs if len(r)])
    return rows_to_tree(rows, tree.n), res


# ---------------------------------------------------------------------------
# verification helpers
# ---------------------------------------------------------------------------

def euler_intervals(tree: Tree):
    """(tin, tout) per vertex by iterative DFS; children sorted by index."""
    kids = tree.children_lists()
    tin = np.zeros(tree.n + 1, dtype=np.int64)
    tout = np.zeros(tree.n + 1, dtype=np.int64)
    clock = 0
    stack = [(tree.root, False)]
    while stack:
        v, done = stack.pop()
        if done:
            tout[v] = clock
            continue
        clock += 1
        tin[v] = clock
        stack.append((v, True))
        for c in reversed(kids[v]):
            stack.append((c, False))
    return tin, tout


def check_extension(tree: Tree, btree: Tree) -> None:
    """Assert the binary-extension contract; raises AssertionError on breach."""
    n = tree.n
    assert btree.original_n == n
    kids_b = np.bincount(btree.parent[1:], minlength=btree.n + 1)
    assert kids_b.max() <= 2, "not binary"
    tin, tout = euler_intervals(btree)
    # every original parent edge must map to an ancestor path; by
    # transitivity that preserves all ancestor pairs
    for v in range(1, n + 1):
        p = int(tree.parent[v])
        if p:
            assert tin[p] < tin[v] and tout[v] <= tout[p], f"ancestry broken at {v}"
    # weights above originals survive, auxiliaries carry 0
    w = tree.int_weights(default=1)
    bw = btree.int_weights()
    for v in range(1, n + 1):
        if int(tree.parent[v]):
            assert bw[v] == w[v], f"weight lost at {v}"
    for v in range(n + 1, btree.n + 1):
        assert int(bw[v]) == 0, f"auxiliary {v} carries weight"
