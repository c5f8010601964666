"""End-to-end acceptance gate: ten statistical/exactness criteria.

Each test prints one ``CRITERION k: PASS|FAIL -- detail`` line before its
assertion, so the verdict is visible in captured output either way.  Space
checks draw sizes from 32 upward: below that the fixed bookkeeping floor of
a machine exceeds the asymptotic per-machine budget being measured.
"""

import contextlib
import io
import math
import time

import numpy as np
import pytest

from mpctree import cli
from mpctree.binarize import binarize_sim, build_extension, euler_intervals
from mpctree.decompose import decompose_core, decompose_tree
from mpctree.geo import (
    closest_pair, gen_points, gen_sparse_graph, local_mst_filter, metric_mst,
    sparse_mst,
)
from mpctree.hashing import k_for_machines, load_vector, sample_hash
from mpctree.kmedian import facility_report
from mpctree.linear import (
    _comp_children, component_base, component_records, distributed_merge,
    make_rules, merge_partial, solve_linear, union_base,
)
from mpctree.oracles import (
    enum_kcenter, enum_kmedian, kruskal_mst, scan_closest_pair, seq_bisection,
    seq_dominating_set, seq_kst, seq_longest_path, seq_matching, seq_mis,
    seq_vertex_cover,
)
from mpctree.polylog import solve_polylog
from mpctree.runtime import ClusterConfig, polylog_capacity
from mpctree.trees import GENERATOR_KINDS, Tree, gen_tree
from mpctree.values import seeded_rng

FIVE = ("matching", "mis", "vc", "dominating-set", "longest-path")
SEQ = {
    "matching": seq_matching,
    "mis": seq_mis,
    "vc": seq_vertex_cover,
    "dominating-set": seq_dominating_set,
    "longest-path": seq_longest_path,
}


def verdict(num: int, ok: bool, detail: str) -> None:
    print(f"CRITERION {num}: {'PASS' if ok else 'FAIL'} -- {detail}")
    assert ok, f"criterion {num}: {detail}"


# ---------------------------------------------------------------------------
# criteria 1 + 2: one shared decomposition sweep


@pytest.fixture(scope="module")
def decomposition_sweep():
    """100-seed decomposition of an n=2^14 tree per generator and m."""
    records = []
    for kind in GENERATOR_KINDS:
        tree = gen_tree(kind, 1 << 14, seed=0)
        for m in (16, 64):
            rec = {"kind": kind, "m": m, "violations": 0, "size_bad": 0,
                   "path_bad": 0, "iter_bad": 0, "fraction_bad": 0}
            t0 = time.time()
            for seed in range(100):
                bt, _ = build_extension(tree, m, seed)
                try:
                    d = decompose_tree(bt, m, seed, check_invariants=True)
                except AssertionError:
                    rec["violations"] += 1
                    continue
                log = math.log2(bt.n)
                if d.comp_size[d.comp_ids].max() > 4 * (bt.n / m) * log:
                    rec["size_bad"] += 1
                if d.iterations > 6 * log:
                    rec["iter_bad"] += 1
                for row in d.stats:
                    if row.max_path > 2 * log:
                        rec["path_bad"] += 1
                    if row.selected > (5 / 6) * row.candidates:
                        rec["fraction_bad"] += 1
            rec["elapsed"] = time.time() - t0
            records.append(rec)
    return records


def test_criterion_01_decomposition_exactness(decomposition_sweep):
    violations = sum(r["violations"] for r in decomposition_sweep)
    slowest = max(r["elapsed"] for r in decomposition_sweep)
    ok = violations == 0 and slowest <= 60
    verdict(1, ok, f"{len(decomposition_sweep)} configs x 100 seeds, "
            f"{violations} invariant violations, slowest {slowest:.1f}s")


def test_criterion_02_decomposition_bounds(decomposition_sweep):
    keys = ("size_bad", "path_bad", "iter_bad", "fraction_bad")
    totals = {k: sum(r[k] for r in decomposition_sweep) for k in keys}
    ok = all(v == 0 for v in totals.values())
    verdict(2, ok, "bound breaches " + ", ".join(
        f"{k[:-4]}={v}" for k, v in totals.items()))


# ---------------------------------------------------------------------------
# criterion 3: binary extension


def _same_ancestry(tree: Tree, bt: Tree, chunk: int = 1024) -> bool:
    tin, tout = euler_intervals(tree)
    btin, btout = euler_intervals(bt)
    ids = np.arange(1, tree.n + 1)
    for lo in range(0, tree.n, chunk):
        u = ids[lo:lo + chunk, None]
        orig = (tin[u] <= tin[ids]) & (tout[ids] <= tout[u])
        ext = (btin[u] <= btin[ids]) & (btout[ids] <= btout[u])
        if not np.array_equal(orig, ext):
            return False
    return True


def test_criterion_03_binary_extension():
    bad = []
    worst_rounds = 0
    for kind in GENERATOR_KINDS:
        for n in (16, 160, 1500, 10_000):
            tree = gen_tree(kind, n, seed=5, weight_dist="uniform:1:9")
            bt, _ = build_extension(tree, 8, seed=5)
            if bt.n > 4 * n:
                bad.append((kind, n, "size"))
            if not _same_ancestry(tree, bt):
                bad.append((kind, n, "ancestry"))
        tree = gen_tree(kind, 600, seed=5)
        local, _ = build_extension(tree, 8, seed=5)
        words = max(polylog_capacity(600, 8, 8), 256)
        sim, res = binarize_sim(tree, ClusterConfig(machines=8, words=words,
                                                    seed=5))
        worst_rounds = max(worst_rounds, res.rounds)
        if not np.array_equal(sim.parent, local.parent):
            bad.append((kind, 600, "simulation drift"))
    ok = not bad and worst_rounds <= 7
    verdict(3, ok, f"24 trees up to n=10^4, breaches={bad or 'none'}, "
            f"pipeline rounds <= {worst_rounds}")


# ---------------------------------------------------------------------------
# criterion 4: one-machine-mergeable problems


def test_criterion_04_polylog_solvers():
    mismatch = rounds_bad = space_bad = 0
    for kind in GENERATOR_KINDS:
        for i in range(200):
            rng = seeded_rng(i, "accept4", kind)
            n = rng.randint(32, 4096)
            wd = rng.choice(("none", "unit", "uniform:1:9", "uniform:1:50"))
            tree = gen_tree(kind, n, seed=i, weight_dist=wd)
            out = solve_polylog(tree, list(FIVE), seed=i)
            mismatch += sum(out.values[p] != SEQ[p](tree) for p in FIVE)
            if out.rounds > 3 * math.log2(n) + 10:
                rounds_bad += 1
            if out.max_resident() > 8 * (n / out.machines) * math.log2(n) ** 2:
                space_bad += 1
    ok = mismatch == rounds_bad == space_bad == 0
    verdict(4, ok, f"1200 trees x 5 problems: mismatches={mismatch}, "
            f"round breaches={rounds_bad}, space breaches={space_bad}")


# ---------------------------------------------------------------------------
# criterion 5: distributed-merge problems


def test_criterion_05_linear_solvers():
    mismatch = depth_bad = border_bad = space_bad = 0
    split_bad = split_total = 0
    example = None
    for i in range(200):
        rng = seeded_rng(i, "accept5")
        kind = rng.choice(GENERATOR_KINDS)
        n = rng.randint(32, 1024)
        tree = gen_tree(kind, n, seed=i,
                        weight_dist=rng.choice(("unit", "uniform:1:40")))
        k = rng.randint(1, n)
        outs = [solve_linear(tree, "bisection", machines=16, seed=i),
                solve_linear(tree, "kst", k=k, machines=16, seed=i)]
        mismatch += outs[0].value != seq_bisection(tree)
        mismatch += outs[1].value != seq_kst(tree, k)
        budget = 8 * (n ** (4 / 3) / 16) * math.log2(n) ** 2
        for out in outs:
            if out.max_resident() > budget:
                space_bad += 1
            comps = out.info["components"]
            if out.info["depth"] > 2 * math.ceil(math.log(comps, 1.5)):
                depth_bad += 1
            if out.info["max_borders"] > 3:
                border_bad += 1
            for size, a, b in out.info["splits"]:
                split_total += 1
                if min(a, b) < size / 3:
                    split_bad += 1
                    example = example or f"piece of {size} split {a}|{b}"
    ok = (mismatch == depth_bad == border_bad == space_bad == 0
          and split_bad == 0)
    verdict(5, ok, f"200 trees x 2 problems: mismatches={mismatch}, "
            f"space breaches={space_bad}, depth breaches={depth_bad}, "
            f"border breaches={border_bad}; first-cut range broken on "
            f"{split_bad}/{split_total} cuts ({example or 'none'})")


# ---------------------------------------------------------------------------
# criterion 6: merge-route equivalence


def _component_pairs(tree: Tree, machines: int = 8, seed: int = 3):
    bt, _ = build_extension(tree, machines, seed)
    d = decompose_core(np.asarray(bt.parent, dtype=np.int64), machines, seed)
    children, root = _comp_children(d)
    comps = component_records(bt, d.label)
    wl = bt.int_weights(default=1)
    for pc, kids in children.items():
        for cc in kids:
            edge = (int(bt.parent[cc]), cc, int(wl[cc]), cc > tree.n)
            yield comps, pc, cc, root, edge


def test_criterion_06_merge_route_equivalence():
    checked = {}
    bad = 0
    for problem in ("bisection", "kst"):
        rules = make_rules(problem)
        pairs = 0
        tree_seed = 0
        while pairs < 500:
            rng = seeded_rng(tree_seed, "accept6", problem)
            tree = gen_tree(rng.choice(GENERATOR_KINDS), rng.randint(180, 400),
                            seed=tree_seed, weight_dist="uniform:1:25")
            for comps, pc, cc, root, edge in _component_pairs(tree):
                if pairs >= 500:
                    break
                pairs += 1

                def fresh():
                    return (component_base(rules, comps[pc],
                                           has_parent=pc != root),
                            component_base(rules, comps[cc], has_parent=True))

                A, B = fresh()
                direct = merge_partial(rules, A, B, edge)
                if union_base(rules, comps[pc], comps[cc],
                              has_parent=pc != root) != direct:
                    bad += 1
                for t in range(10):
                    A, B = fresh()
                    if distributed_merge(rules, A, B, edge, chunks=2 + t % 4,
                                         seed=t) != direct:
                        bad += 1
            tree_seed += 1
        checked[problem] = pairs
    ok = bad == 0
    verdict(6, ok, f"{checked} pairs x (direct, union, 10 chunked routes), "
            f"{bad} disagreements")


# ---------------------------------------------------------------------------
# criterion 7: facility placement


def _rooted_shapes(n: int):
    """All rooted trees on n vertices as canonical level sequences."""
    s = list(range(1, n + 1))
    while True:
        yield tuple(s)
        p = -1
        for i in range(n - 1, -1, -1):
            if s[i] > 2:
                p = i
                break
        if p < 0:
            return
        q = p - 1
        while s[q] != s[p] - 1:
            q -= 1
        for i in range(p, n):
            s[i] = s[i - (p - q)]


SHAPE_COUNTS = {1: 1, 2: 1, 3: 2, 4: 4, 5: 9, 6: 20, 7: 48, 8: 115, 9: 286,
                10: 719, 11: 1842, 12: 4766}


def _shape_tree(levels, weights=None) -> Tree:
    n = len(levels)
    parent = np.zeros(n + 1, dtype=np.int64)
    latest = {1: 1}
    for i in range(1, n):
        parent[i + 1] = latest[levels[i] - 1]
        latest[levels[i]] = i + 1
    return Tree(n=n, parent=parent, weights=weights)


def test_criterion_07_facility_dp():
    bad = trees = 0
    for n in range(1, 13):
        shapes = 0
        for levels in _rooted_shapes(n):
            shapes += 1
            cases = [None]
            if n <= 9:
                rng = seeded_rng(n, shapes, "accept7")
                cases.append([0, 0] + [rng.randint(1, 9) for _ in range(n - 1)])
            for weights in cases:
                tree = _shape_tree(levels, weights)
                trees += 1
                kmax = min(3, n)
                med = facility_report(tree, kmax, "median")
                cen = facility_report(tree, kmax, "center")
                for k in range(1, kmax + 1):
                    bad += med.values[k] != enum_kmedian(tree, k)
                    bad += cen.values[k] != enum_kcenter(tree, k)
        assert shapes == SHAPE_COUNTS[n], "shape enumeration broken"

    flags_bad = 0
    for kind in GENERATOR_KINDS:
        tree = gen_tree(kind, 1024, seed=3, weight_dist="uniform:1:99")
        for objective in ("median", "center"):
            rep = facility_report(tree, 4, objective, seed=3)
            flags_bad += not (rep.f_monotone and rep.g_monotone
                              and rep.agree_at_infinity)
    ok = bad == 0 and flags_bad == 0
    verdict(7, ok, f"{trees} trees (all {sum(SHAPE_COUNTS.values())} shapes "
            f"to n=12) vs enumeration: {bad} mismatches; curve-shape "
            f"breaches at n=1024: {flags_bad}")


# ---------------------------------------------------------------------------
# criterion 8: geometry


def _complete_graph(points):
    n = len(points)
    return [(u, v, int(((points[u] - points[v]) ** 2).sum()), u * n + v)
            for u in range(n) for v in range(u + 1, n)]


def test_criterion_08_geometry():
    pair_bad = 0
    for seed in range(50):
        pts = gen_points(512, 2, seed=seed)
        out = closest_pair(pts, seed=seed)
        if out.value != scan_closest_pair(pts) or out.rounds != 3:
            pair_bad += 1

    metric_bad = 0
    for seed in range(5):
        pts = gen_points(256, 2, seed=100 + seed)
        edges = _complete_graph(pts)
        ids, _ = kruskal_mst(len(pts), edges)
        weight = {eid: w for (_u, _v, w, eid) in edges}
        want = (ids, sum(math.sqrt(weight[i]) for i in ids))
        if metric_mst(pts, seed=seed).value != want:
            metric_bad += 1

    evict_bad = 0
    for seed in range(200):
        rng = seeded_rng(seed, "accept8")
        n, edges = gen_sparse_graph(rng.randint(24, 96), seed=seed)
        mst_ids, _ = kruskal_mst(n, edges)
        kept = {e[3] for e in local_mst_filter(edges)}
        evict_bad += not set(mst_ids) <= kept

    sparse_bad = 0
    for n in (16, 64, 256, 1024):
        for seed in range(3):
            n_v, edges = gen_sparse_graph(n, seed=seed)
            out = sparse_mst(n_v, edges, seed=seed)
            if (out.value != kruskal_mst(n_v, edges)
                    or out.info["super_rounds"] > math.ceil(math.log2(n_v))):
                sparse_bad += 1

    ok = pair_bad == metric_bad == evict_bad == sparse_bad == 0
    verdict(8, ok, f"closest-pair bad={pair_bad}/50, metric bad={metric_bad}/5, "
            f"filter evictions={evict_bad}/200, sparse bad={sparse_bad}/12")


# ---------------------------------------------------------------------------
# criterion 9: hash load balancing


def test_criterion_09_hash_load():
    n, m = 1 << 14, 64
    tree = gen_tree("random_recursive", n, seed=0)
    bound = 4 * (n / m) * math.log2(n) ** 2
    load_bad = 0
    worst = 0.0
    for seed in range(100):
        bt, _ = build_extension(tree, m, seed)
        d = decompose_tree(bt, m, seed)
        h = sample_hash(k_for_machines(m), m, seed)
        loads = load_vector(d.comp_ids.astype(np.uint64),
                            d.comp_size[d.comp_ids], h)
        worst = max(worst, loads.max() / bound)
        load_bad += loads.max() > bound

    bb_bound = 2 * (n / m) * math.ceil(math.log2(n))
    bb_bad = 0
    keys = np.arange(1, n + 1, dtype=np.uint64)
    unit = np.ones(n, dtype=np.int64)
    for seed in range(200):
        h = sample_hash(k_for_machines(m), m, 10_000 + seed)
        bb_bad += load_vector(keys, unit, h).max() > bb_bound
    ok = load_bad == 0 and bb_bad == 0
    verdict(9, ok, f"component loads: {load_bad}/100 over budget (worst "
            f"{worst:.2f} of budget); balls-and-bins: {bb_bad}/200 over")


# ---------------------------------------------------------------------------
# criterion 10: determinism


def _run_cli(argv):
    buf = io.StringIO()
    with contextlib.redirect_stdout(buf):
        code = cli.main(argv)
    return code, buf.getvalue()


def test_criterion_10_determinism(tmp_path):
    tree = str(tmp_path / "t.tree")
    small = str(tmp_path / "s.tree")
    pts = str(tmp_path / "p.pts")
    graph = str(tmp_path / "g.edges")
    assert _run_cli(["gen", "--kind", "broom", "--n", "300", "--seed", "6",
                     "--weights", "uniform:1:20", "--out", tree])[0] == 0
    assert _run_cli(["gen", "--kind", "random_recursive", "--n", "40",
                     "--seed", "6", "--weights", "uniform:1:9",
                     "--out", small])[0] == 0
    assert _run_cli(["gen", "--kind", "points", "--n", "64", "--seed", "6",
                     "--out", pts])[0] == 0
    assert _run_cli(["gen", "--kind", "sparse", "--n", "80", "--seed", "6",
                     "--out", graph])[0] == 0

    commands = [
        ["solve", "--problem", "matching", "--in", tree, "--seed", "6",
         "--verify"],
        ["solve", "--problem", "bisection", "--in", tree, "--seed", "6",
         "--verify"],
        ["solve", "--problem", "kst", "--in", tree, "--k", "40", "--seed", "6"],
        ["solve", "--problem", "kmedian", "--in", small, "--k", "3",
         "--seed", "6", "--verify"],
        ["solve", "--problem", "closest-pair", "--in", pts, "--seed", "6",
         "--verify"],
        ["solve", "--problem", "mst-metric", "--in", pts, "--seed", "6"],
        ["solve", "--problem", "mst-sparse", "--in", graph, "--seed", "6",
         "--verify"],
    ]
    unstable = 0
    for idx, argv in enumerate(commands):
        outs, metrics = [], []
        for rep in range(2):
            mpath = tmp_path / f"m{idx}-{rep}.json"
            code, out = _run_cli(argv + ["--metrics-out", str(mpath)])
            assert code == 0, (argv, out)
            outs.append(out)
            metrics.append(mpath.read_bytes())
        unstable += outs[0] != outs[1] or metrics[0] != metrics[1]
    ok = unstable == 0
    verdict(10, ok, f"{len(commands)} commands run twice: {unstable} unstable")
