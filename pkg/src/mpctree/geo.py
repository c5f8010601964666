"""Closest pair and minimum spanning trees on the simulated cluster.

Three solvers share the group-splitting idea: scatter the n points into
k = ceil(sqrt(m)) random groups, give each group *pair* to a machine, and let
every machine work on its pair locally.

- ``closest_pair``: each pair machine scans its points and reports its best
  pair to machine 0; exactly three rounds.
- ``metric_mst``: each pair machine streams all pairs of its point union
  through a local MST filter, then the surviving edges (O(n * sqrt(m)) in
  total) go through ``sparse_mst``.
- ``sparse_mst``: Boruvka on hashed edge shards.  Each super-round picks the
  minimum outgoing edge per component by (weight, id), machine 0 contracts
  the resulting pseudo-forest (a 2-cycle collapses onto its smaller label)
  and broadcasts new labels.  Components at least double per super-round.

Edge weights are kept exact: point distances are *squared* euclidean
distances (monotone in the real distance, so the MST and closest pair agree
with the metric ones) and ties are broken by edge id everywhere.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .hashing import k_for_machines, sample_hash
from .runtime import ClusterConfig, linear_capacity, run_simulation
from .values import seed_int, seeded_rng

FLOOR_WORDS = 256

__all__ = [
    "GeoOutcome",
    "MstFilter",
    "choose_geo_machines",
    "closest_pair",
    "emit_edge_list",
    "emit_points",
    "gen_points",
    "gen_sparse_graph",
    "local_mst_filter",
    "metric_mst",
    "parse_edge_list",
    "parse_points",
    "sparse_mst",
]


# ---------------------------------------------------------------------------
# point sets and sparse graphs as text
# ---------------------------------------------------------------------------

def gen_points(n: int, d: int = 2, seed=0, spread: int | None = None) -> np.ndarray:
    """n integer points in d dimensions, coordinates in [0, spread)."""
    if n < 1 or d < 1:
        raise ValueError("need n >= 1 points and d >= 1 dimensions")
    rng = np.random.default_rng(seed_int(seed, "points", n, d))
    spread = spread if spread is not None else max(4, 4 * n * n)
    return rng.integers(0, spread, size=(n, d), dtype=np.int64)


def parse_points(text: str) -> np.ndarray:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise ValueError("empty points file")
    n, d = (int(x) for x in lines[0].split())
    if len(lines) != n + 1:
        raise ValueError(f"expected {n} point rows, got {len(lines) - 1}")
    pts = np.array([[int(x) for x in ln.split()] for ln in lines[1:]],
                   dtype=np.int64).reshape(n, -1)
    if pts.shape[1] != d:
        raise ValueError(f"expected {d} coordinates per row")
    return pts


def emit_points(points: np.ndarray) -> str:
    n, d = points.shape
    rows = [" ".join(str(int(x)) for x in row) for row in points]
    return "\n".join([f"{n} {d}"] + rows) + "\n"


def gen_sparse_graph(n: int, seed=0, degree: int = 3):
    """Connected graph on vertices 0..n-1 with about degree*n edges.

    A random attachment tree guarantees connectivity; extra edges are sampled
    uniformly without replacement.  Returns (n, [(u, v, weight, id), ...]).
    """
    if n < 1:
        raise ValueError("need n >= 1")
    rng = seeded_rng(seed, "sparse", n)
    pairs = []
    seen = set()
    for v in range(1, n):
        u = rng.randrange(v)
        pairs.append((u, v))
        seen.add((u, v))
    target = min(degree * n, n * (n - 1) // 2)
    while len(pairs) < target:
        u = rng.randrange(n)
        v = rng.randrange(n)
        if u == v:
            continue
        u, v = min(u, v), max(u, v)
        if (u, v) in seen:
            continue
        seen.add((u, v))
        pairs.append((u, v))
    edges = [(u, v, rng.randrange(1, 8 * max(target, 2)), i)
             for i, (u, v) in enumerate(pairs)]
    return n, edges


def parse_edge_list(text: str):
    """"n m" header then "u v weight" rows; edge ids are the row numbers."""
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise ValueError("empty edge file")
    n, m_edges = (int(x) for x in lines[0].split())
    if len(lines) != m_edges + 1:
        raise ValueError(f"expected {m_edges} edge rows, got {len(lines) - 1}")
    edges = []
    for i, ln in enumerate(lines[1:]):
        u, v, w = (int(x) for x in ln.split())
        if not (0 <= u < n and 0 <= v < n) or u == v:
            raise ValueError(f"bad edge {ln!r} for n={n}")
        edges.append((u, v, w, i))
    return n, edges


def emit_edge_list(n: int, edges) -> str:
    rows = [f"{u} {v} {w}" for (u, v, w, _eid) in sorted(edges, key=lambda e: e[3])]
    return "\n".join([f"{n} {len(rows)}"] + rows) + "\n"


# ---------------------------------------------------------------------------
# streaming MST filter (machine-local)
# ---------------------------------------------------------------------------

class MstFilter:
    """Keeps exactly the MST of every edge offered so far.

    The retained edges always form a forest; offering an edge that closes a
    cycle evicts the cycle's maximum edge under (weight, id) order.  An edge
    evicted once can therefore never belong to the MST of the full stream.
    """

    def __init__(self, capacity: int | None = None):
        self.adj: dict[int, dict[int, tuple[int, int]]] = {}
        self.count = 0
        self.capacity = capacity

    def __words__(self) -> int:
        return 2 + len(self.adj) + 4 * self.count

    def offer(self, u: int, v: int, w: int, eid: int):
        """Insert one edge; returns the evicted record, or None if all fit."""
        if u == v:
            return (u, v, w, eid)
        path = self._path(u, v)
        if path is None:
            if self.capacity is not None and self.count >= self.capacity:
                raise ValueError(f"filter capacity {self.capacity} exhausted")
            self._add(u, v, w, eid)
            return None
        worst = max(path, key=lambda e: (e[2], e[3]))
        if (w, eid) > (worst[2], worst[3]):
            return (u, v, w, eid)
        self._drop(worst[0], worst[1])
        self._add(u, v, w, eid)
        return worst

    def edges(self) -> list:
        out = []
        for u, nbrs in self.adj.items():
            for v, (w, eid) in nbrs.items():
                if u < v:
                    out.append((u, v, w, eid))
        return sorted(out, key=lambda e: e[3])

    def _add(self, u, v, w, eid):
        self.adj.setdefault(u, {})[v] = (w, eid)
        self.adj.setdefault(v, {})[u] = (w, eid)
        self.count += 1

    def _drop(self, u, v):
        del self.adj[u][v]
        del self.adj[v][u]
        self.count -= 1

    def _path(self, u, v):
        """Unique forest path between u and v, or None if disconnected."""
        if u not in self.adj or v not in self.adj:
            return None
        prev = {u: None}
        stack = [u]
        while stack and v not in prev:
            x = stack.pop()
            for y in self.adj[x]:
                if y not in prev:
                    prev[y] = x
                    stack.append(y)
        if v not in prev:
            return None
        path = []
        x = v
        while prev[x] is not None:
            p = prev[x]
            w, eid = self.adj[x][p]
            path.append((min(x, p), max(x, p), w, eid))
            x = p
        return path


def local_mst_filter(stream, capacity: int | None = None) -> list:
    """Run a fresh filter over a stream of (u, v, w, id); returns the MST."""
    filt = MstFilter(capacity)
    for (u, v, w, eid) in stream:
        filt.offer(u, v, w, eid)
    return filt.edges()


# ---------------------------------------------------------------------------
# shared plumbing
# ---------------------------------------------------------------------------

@dataclass
class GeoOutcome:
    value: object
    machines: int
    rounds: int
    metrics: list
    info: dict = field(default_factory=dict)

    def max_resident(self) -> int:
        return max((r.max_resident for r in self.metrics), default=0)


def choose_geo_machines(n: int) -> int:
    """Largest power of two <= 16 still compatible with m^3 <= n^2."""
    m = 16
    while m > 2 and m ** 3 > n * n:
        m //= 2
    return m


def _check_split_pre(n: int, m: int) -> None:
    if m > 2 and m ** 3 > n * n:
        raise ValueError(f"group splitting needs m <= n^(2/3); got m={m}, n={n}")


def _point_shards(points: np.ndarray, m: int) -> list:
    n, d = points.shape
    rows = np.hstack([np.arange(n, dtype=np.int64)[:, None], points])
    return [(n, d, np.ascontiguousarray(rows[i::m])) for i in range(m)]


def _group_of(seed, pid: int, k: int) -> int:
    return seed_int(seed, "geo-group", pid) % k


def _pair_machine(a: int, b: int, k: int, m: int) -> int:
    """Triangular index of the unordered group pair, wrapped onto machines."""
    a, b = min(a, b), max(a, b)
    return (a * k - a * (a - 1) // 2 + (b - a)) % m


def _ship_points(s, ctx) -> None:
    """Route every held point to the machines of all pairs its group is in."""
    k, m = s["k"], ctx.m
    rows = s.pop("pts")
    dests: dict[int, list] = {}
    for row in rows:
        g = _group_of(s["seed"], int(row[0]), k)
        for j in range(k):
            dests.setdefault(_pair_machine(g, j, k, m), []).append(row)
    for dst, batch in sorted(dests.items()):
        ctx.send(dst, np.vstack(batch))


def _gather_points(ctx) -> np.ndarray:
    """Collect shipped rows, drop duplicate point ids, sort by id."""
    blocks = [msg.payload for msg in ctx.inbox if len(msg.payload)]
    if not blocks:
        return np.zeros((0, 2), dtype=np.int64)
    rows = np.vstack(blocks)
    _, keep = np.unique(rows[:, 0], return_index=True)
    return rows[np.sort(keep)]


def _scan_best(rows: np.ndarray, f=None):
    """Best (d2, i, j) over all pairs of rows; rows are (id, coords...)."""
    best = None
    ids, pts = rows[:, 0], rows[:, 1:]
    for a in range(len(rows) - 1):
        if f is None:
            diff = pts[a + 1:] - pts[a]
            d2 = (diff * diff).sum(axis=1)
        else:
            d2 = np.array([f(pts[a], pts[b]) for b in range(a + 1, len(rows))],
                          dtype=np.int64)
        b = int(np.argmin(d2))
        i, j = int(ids[a]), int(ids[a + 1 + b])
        cand = (int(d2[b]), min(i, j), max(i, j))
        if best is None or cand < best:
            best = cand
    return best


# ---------------------------------------------------------------------------
# closest pair: exactly three rounds
# ---------------------------------------------------------------------------

class ClosestPairProgram:
    def __init__(self, f=None):
        self.f = f

    def setup(self, machine_id, m, shard, config):
        n, d, rows = shard
        return {"n": n, "pts": rows, "seed": config.seed,
                "k": math.isqrt(max(m - 1, 0)) + 1}

    def step(self, ctx):
        s = ctx.state
        if ctx.round == 1:
            _ship_points(s, ctx)
        elif ctx.round == 2:
            best = _scan_best(_gather_points(ctx), self.f)
            if best is not None:
                ctx.send(0, best)
        else:
            if ctx.machine_id == 0:
                cands = sorted(tuple(int(x) for x in msg.payload)
                               for msg in ctx.inbox)
                if not cands:
                    raise ValueError("need two points")
                s["out"] = cands[0]
            ctx.finish()

    def output(self, machine_id, state):
        if "out" not in state:
            return None
        d2, i, j = state["out"]
        return {"value": (i, j, d2)}


def closest_pair(points: np.ndarray, machines: int | None = None, seed=0,
                 cap_constant: int = 8, f=None, enforce_caps: bool = True) -> GeoOutcome:
    """Minimum (squared) distance pair, id-tiebroken, in three rounds."""
    n, d = points.shape
    if n < 2:
        raise ValueError("need two points")
    m = machines or choose_geo_machines(n)
    _check_split_pre(n, m)
    k = math.isqrt(max(m - 1, 0)) + 1
    words = math.ceil(cap_constant * ((2 * n // k + 1) * (d + 2) + 4 * m))
    if cap_constant >= 1:
        words = max(words, FLOOR_WORDS)
    words = max(words, m)
    config = ClusterConfig(machines=m, words=words, seed=seed,
                           enforce_caps=enforce_caps)
    res = run_simulation(ClosestPairProgram(f), config, _point_shards(points, m))
    out = next(o for o in res.outputs if o is not None)
    return GeoOutcome(out["value"], m, res.rounds, res.metrics,
                      {"groups": k, "words": words})


# ---------------------------------------------------------------------------
# Boruvka on hashed edge shards
# ---------------------------------------------------------------------------

def _edge_block(edges) -> np.ndarray:
    return np.array([e[:4] for e in edges], dtype=np.int64).reshape(-1, 4)


def _min_per_component(comp, w, eid, rest) -> np.ndarray:
    """Rows (comp, w, eid, *rest) keeping the (w, id)-minimum per component."""
    order = np.lexsort((eid, w, comp))
    comp, w, eid = comp[order], w[order], eid[order]
    rest = [col[order] for col in rest]
    _, first = np.unique(comp, return_index=True)
    return np.stack([comp[first], w[first], eid[first]]
                    + [col[first] for col in rest], axis=1)


def _boruvka_candidates(s, ctx) -> None:
    """Append arriving edge blocks, then offer one min outgoing edge per
    component this machine can see."""
    blocks = [msg.payload for msg in ctx.inbox if len(msg.payload)]
    if blocks:
        s["edges"] = np.vstack([s["edges"]] + blocks)
    e = s["edges"]
    if not len(e):
        return
    lab = s["label"]
    lu, lv = lab[e[:, 0]], lab[e[:, 1]]
    out = lu != lv
    if not out.any():
        return
    e, lu, lv = e[out], lu[out], lv[out]
    both = np.concatenate  # each endpoint's component sees the edge
    cand = _min_per_component(
        both([lu, lv]), both([e[:, 2], e[:, 2]]), both([e[:, 3], e[:, 3]]),
        [both([e[:, 0], e[:, 0]]), both([e[:, 1], e[:, 1]]),
         both([lv, lu])])
    ctx.send(0, cand)


def _boruvka_contract(s, ctx) -> None:
    """Machine 0 merges candidates, contracts the pseudo-forest, and
    broadcasts either a relabel map or the final answer."""
    if ctx.machine_id != 0:
        return
    blocks = [msg.payload for msg in ctx.inbox if len(msg.payload)]
    if not blocks:
        ids = sorted(s["chosen"])
        total = sum(s["chosen"][i] for i in ids)
        ctx.broadcast(("done", ids, total))
        return
    rows = np.vstack(blocks)
    win = _min_per_component(rows[:, 0], rows[:, 1], rows[:, 2],
                             [rows[:, 3], rows[:, 4], rows[:, 5]])
    s["super"] += 1
    arrow = {int(c): int(t) for c, _w, _i, _u, _v, t in win}
    for _c, w, eid, _u, _v, _t in win:
        s["chosen"][int(eid)] = int(w)
    # a mutual pick is the 2-cycle; its smaller label becomes the root
    parent = {}
    for c, t in arrow.items():
        parent[c] = min(c, t) if arrow.get(t) == c else t
    changed = True
    while changed:
        changed = False
        for c, p in parent.items():
            g = parent.get(p, p)
            if g != p:
                parent[c] = g
                changed = True
    pairs = np.array(sorted(parent.items()), dtype=np.int64).reshape(-1, 2)
    ctx.broadcast(("relabel", pairs))


def _boruvka_apply(s, ctx) -> bool:
    """Install new labels; True once the final answer has arrived."""
    msg = next((m.payload for m in ctx.inbox), None)
    if msg is None or msg[0] == "done":
        if msg is not None and ctx.machine_id == 0:
            s["out"] = (list(msg[1]), int(msg[2]))
        for key in ("edges", "label"):
            s.pop(key, None)
        ctx.finish()
        return True
    pairs = msg[1]
    lab = s["label"]
    idx = np.searchsorted(pairs[:, 0], lab)
    hit = (idx < len(pairs)) & (pairs[np.minimum(idx, len(pairs) - 1), 0] == lab)
    lab[hit] = pairs[idx[hit], 1]
    return False


class SparseMstProgram:
    """Candidates / contract / apply, three rounds per super-round."""

    def setup(self, machine_id, m, shard, config):
        n, block = shard
        state = {"n": n, "edges": block, "seed": config.seed,
                 "label": np.arange(n, dtype=np.int64), "super": 0}
        if machine_id == 0:
            state["chosen"] = {}
        return state

    def step(self, ctx):
        phase = (ctx.round - 1) % 3
        if phase == 0:
            _boruvka_candidates(ctx.state, ctx)
        elif phase == 1:
            _boruvka_contract(ctx.state, ctx)
        else:
            _boruvka_apply(ctx.state, ctx)

    def output(self, machine_id, state):
        if "out" not in state:
            return None
        ids, total = state["out"]
        return {"value": (ids, total), "super_rounds": state["super"]}


def _sparse_words(n: int, n_edges: int, m: int, c) -> int:
    if c < 1:  # deliberate starvation: no engineering floors
        return max(m, linear_capacity(n, m, c))
    label_bcast = m * (2 * n + 16)
    cand_fan_in = 6 * min(n * m, 2 * n_edges) + 2 * n + 64
    shard = 8 * (n_edges // m + 1) + 2 * n + 64
    return max(linear_capacity(n, m, c), FLOOR_WORDS,
               label_bcast, cand_fan_in, shard)


def sparse_mst(n: int, edges, machines: int | None = None, seed=0,
               cap_constant: int = 8, enforce_caps: bool = True) -> GeoOutcome:
    """Exact MST (edge ids, total weight) of an explicit edge list."""
    m = machines or (16 if n >= 64 else 4)
    h = sample_hash(k_for_machines(m), m, seed_int(seed, "edge-shard"))
    shards: list[list] = [[] for _ in range(m)]
    for e in edges:
        shards[h(int(e[3]))].append(e)
    config = ClusterConfig(machines=m, words=_sparse_words(n, len(edges), m, cap_constant),
                           seed=seed, enforce_caps=enforce_caps)
    res = run_simulation(SparseMstProgram(),
                         config, [(n, _edge_block(s)) for s in shards])
    out = next(o for o in res.outputs if o is not None)
    return GeoOutcome(out["value"], m, res.rounds, res.metrics,
                      {"super_rounds": out["super_rounds"], "words": config.words})


# ---------------------------------------------------------------------------
# metric MST: filter group pairs, then Boruvka the survivors
# ---------------------------------------------------------------------------

class MetricMstProgram:
    def __init__(self, f=None):
        self.f = f

    def setup(self, machine_id, m, shard, config):
        n, d, rows = shard
        state = {"n": n, "pts": rows, "seed": config.seed,
                 "k": math.isqrt(max(m - 1, 0)) + 1,
                 "label": np.arange(n, dtype=np.int64), "super": 0,
                 "edges": np.zeros((0, 4), dtype=np.int64)}
        if machine_id == 0:
            state["chosen"] = {}
        return state

    def step(self, ctx):
        s = ctx.state
        if ctx.round == 1:
            _ship_points(s, ctx)
        elif ctx.round == 2:
            self._filter_pairs(s, ctx)
        else:
            phase = (ctx.round - 3) % 3
            if phase == 0:
                _boruvka_candidates(s, ctx)
            elif phase == 1:
                _boruvka_contract(s, ctx)
            else:
                _boruvka_apply(s, ctx)

    def _filter_pairs(self, s, ctx):
        rows = _gather_points(ctx)
        n = s["n"]
        filt = MstFilter()
        ids, pts = rows[:, 0], rows[:, 1:]
        for a in range(len(rows) - 1):
            if self.f is None:
                diff = pts[a + 1:] - pts[a]
                dist = (diff * diff).sum(axis=1)
            else:
                dist = [self.f(pts[a], pts[b]) for b in range(a + 1, len(rows))]
            for off, w in enumerate(dist):
                i, j = int(ids[a]), int(ids[a + 1 + off])
                u, v = min(i, j), max(i, j)
                filt.offer(u, v, int(w), u * n + v)
        kept = filt.edges()
        h = sample_hash(k_for_machines(ctx.m), ctx.m,
                        seed_int(s["seed"], "edge-shard"))
        dests: dict[int, list] = {}
        for e in kept:
            dests.setdefault(h(int(e[3])), []).append(e)
        for dst, batch in sorted(dests.items()):
            ctx.send(dst, _edge_block(batch))

    def output(self, machine_id, state):
        if "out" not in state:
            return None
        ids, raw = state["out"]
        # default metric compares squared distances; report true lengths
        total = (sum(math.sqrt(state["chosen"][i]) for i in ids)
                 if self.f is None else raw)
        return {"value": (ids, total), "super_rounds": state["super"]}


def metric_mst(points: np.ndarray, machines: int | None = None, seed=0,
               cap_constant: int = 8, f=None, enforce_caps: bool = True) -> GeoOutcome:
    """Euclidean MST of the complete graph on the points.

    Edges are selected by (squared distance, id) -- exact integers, and the
    same tree as under real distances; the reported weight is the sum of the
    chosen edges' true lengths (or of ``f`` values when a metric is given).
    """
    n, d = points.shape
    if n < 1:
        raise ValueError("need a point")
    m = machines or choose_geo_machines(n)
    _check_split_pre(n, m)
    k = math.isqrt(max(m - 1, 0)) + 1
    survivors = (k * (k + 1) // 2) * (2 * n // k + 1)
    words = max(_sparse_words(n, survivors, m, cap_constant),
                math.ceil(cap_constant * ((2 * n // k + 1) * (d + 3) + 4 * m)))
    config = ClusterConfig(machines=m, words=words, seed=seed,
                           enforce_caps=enforce_caps)
    res = run_simulation(MetricMstProgram(f), config, _point_shards(points, m))
    out = next(o for o in res.outputs if o is not None)
    return GeoOutcome(out["value"], m, res.rounds, res.metrics,
                      {"super_rounds": out["super_rounds"], "groups": k,
                       "words": words})
