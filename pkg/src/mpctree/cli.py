"""``mpctree`` command line.

Three subcommands:

- ``gen``   write a tree, point set, or sparse graph to a file
- ``solve`` run one problem under the simulator and print a one-line JSON
            report (optionally checked against the sequential oracle)
- ``stats`` aggregate metrics files from ``solve --metrics-out``

Exit codes: 0 success (and oracle match), 2 verify mismatch, 3 space cap
exceeded, 4 usage error.
"""

from __future__ import annotations

import argparse
import json
import math
import statistics
import sys
import time

from .geo import (
    closest_pair, emit_edge_list, emit_points, gen_points, gen_sparse_graph,
    metric_mst, parse_edge_list, parse_points, sparse_mst,
)
from .kmedian import solve_kcenter, solve_kmedian
from .linear import InfeasibleK, LINEAR_RULES, solve_linear
from .oracles import kruskal_mst, oracle_solve
from .polylog import POLYLOG_PLUGINS, solve_polylog
from .runtime import CapExceeded, metrics_json
from .trees import GENERATOR_KINDS, TreeError, emit_tree, gen_tree, parse_tree

EXIT_OK = 0
EXIT_MISMATCH = 2
EXIT_CAP = 3
EXIT_USAGE = 4

FACILITY = ("kmedian", "kcenter")
GEOMETRY = ("closest-pair", "mst-metric", "mst-sparse")
PROBLEMS = tuple(sorted(POLYLOG_PLUGINS)) + tuple(sorted(LINEAR_RULES)) \
    + FACILITY + GEOMETRY


class _Parser(argparse.ArgumentParser):
    """argparse that reports usage problems with our exit code."""

    def error(self, message):
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> _Parser:
    top = _Parser(prog="mpctree", description=__doc__.splitlines()[0])
    sub = top.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", parents=[], help="generate an instance file",
                         add_help=True)
    gen.add_argument("--kind", required=True,
                     choices=tuple(GENERATOR_KINDS) + ("points", "sparse"))
    gen.add_argument("--n", type=int, required=True)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--weights", default="none",
                     help="tree edge weights: none | unit | uniform:LO:HI")
    gen.add_argument("--dim", type=int, default=2, help="point dimension")
    gen.add_argument("--out", help="output path (default stdout)")

    solve = sub.add_parser("solve", help="run one problem under the simulator")
    solve.add_argument("--problem", required=True, choices=PROBLEMS)
    solve.add_argument("--in", dest="input", required=True,
                       help="instance file from `mpctree gen`")
    solve.add_argument("--machines", type=int, default=None)
    solve.add_argument("--seed", type=int, default=0)
    solve.add_argument("--k", type=int, default=None,
                       help="parameter for kst / kmedian / kcenter")
    solve.add_argument("--cap-constant", type=float, default=8)
    solve.add_argument("--verify", action="store_true",
                       help="also run the oracle; exit 2 on mismatch")
    solve.add_argument("--metrics-out", help="write per-round metrics JSON")
    solve.add_argument("--timing", action="store_true",
                       help="include wall_time in the report")

    stats = sub.add_parser("stats", help="aggregate metrics files")
    stats.add_argument("metrics", nargs="+", help="files from --metrics-out")
    return top


# ---------------------------------------------------------------------------
# gen
# ---------------------------------------------------------------------------

def cmd_gen(args) -> int:
    if args.kind == "points":
        text = emit_points(gen_points(args.n, args.dim, args.seed))
    elif args.kind == "sparse":
        text = emit_edge_list(*gen_sparse_graph(args.n, args.seed))
    else:
        text = emit_tree(gen_tree(args.kind, args.n, args.seed, args.weights))
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


# ---------------------------------------------------------------------------
# solve
# ---------------------------------------------------------------------------

def _solve_dispatch(args):
    """Returns (instance size, machines, answer, metrics)."""
    text = open(args.input).read()
    p = args.problem
    if p in POLYLOG_PLUGINS:
        tree = parse_tree(text)
        out = solve_polylog(tree, [p], machines=args.machines, seed=args.seed,
                            cap_constant=args.cap_constant)
        return tree, tree.n, out.machines, int(out.values[p]), out.metrics
    if p in LINEAR_RULES:
        tree = parse_tree(text)
        out = solve_linear(tree, p, k=args.k, machines=args.machines,
                           seed=args.seed, cap_constant=args.cap_constant)
        return tree, tree.n, out.machines, int(out.value), out.metrics
    if p in FACILITY:
        tree = parse_tree(text)
        fn = solve_kmedian if p == "kmedian" else solve_kcenter
        return tree, tree.n, 1, int(fn(tree, args.k, seed=args.seed)), []
    if p == "closest-pair":
        pts = parse_points(text)
        out = closest_pair(pts, machines=args.machines, seed=args.seed,
                           cap_constant=args.cap_constant)
        return pts, len(pts), out.machines, list(out.value), out.metrics
    if p == "mst-metric":
        pts = parse_points(text)
        out = metric_mst(pts, machines=args.machines, seed=args.seed,
                         cap_constant=args.cap_constant)
        ids, weight = out.value
        return pts, len(pts), out.machines, \
            {"edge_ids": ids, "weight": weight}, out.metrics
    n, edges = parse_edge_list(text)
    out = sparse_mst(n, edges, machines=args.machines, seed=args.seed,
                     cap_constant=args.cap_constant)
    ids, weight = out.value
    return (n, edges), n, out.machines, \
        {"edge_ids": ids, "weight": weight}, out.metrics


def _oracle_answer(args, instance):
    p = args.problem
    if p == "mst-sparse":
        n, edges = instance
        ids, weight = kruskal_mst(n, edges)
        return {"edge_ids": ids, "weight": weight}
    if p == "mst-metric":
        pts = instance
        n = len(pts)
        full = [(u, v, int(((pts[u] - pts[v]) ** 2).sum()), u * n + v)
                for u in range(n) for v in range(u + 1, n)]
        ids, _ = kruskal_mst(n, full)
        wmap = {eid: w for (_u, _v, w, eid) in full}
        return {"edge_ids": ids,
                "weight": sum(math.sqrt(wmap[i]) for i in ids)}
    if p == "closest-pair":
        return list(oracle_solve(p, instance).value)
    return oracle_solve(p, instance, k=args.k).value


def cmd_solve(args) -> int:
    t0 = time.perf_counter()
    try:
        instance, n, m, answer, metrics = _solve_dispatch(args)
    except CapExceeded as e:
        report = {"problem": args.problem, "seed": args.seed,
                  "error": "CapExceeded", "machine": e.machine,
                  "round": e.round, "kind": e.kind,
                  "words": e.words, "cap": e.cap}
        print(json.dumps(report, separators=(",", ":")))
        return EXIT_CAP

    report = {"problem": args.problem, "n": n, "m": m, "seed": args.seed,
              "answer": answer,
              "rounds": len(metrics),
              "max_resident": max((r.max_resident for r in metrics), default=0)}
    code = EXIT_OK
    if args.verify:
        oracle = _oracle_answer(args, instance)
        report["oracle"] = oracle
        report["match"] = answer == oracle
        if not report["match"]:
            code = EXIT_MISMATCH
    if args.timing:
        report["wall_time"] = round(time.perf_counter() - t0, 6)
    if args.metrics_out:
        with open(args.metrics_out, "w") as fh:
            fh.write(metrics_json(metrics) + "\n")
    print(json.dumps(report, separators=(",", ":")))
    return code


# ---------------------------------------------------------------------------
# stats
# ---------------------------------------------------------------------------

def _percentile95(values):
    ordered = sorted(values)
    return ordered[max(0, math.ceil(0.95 * len(ordered)) - 1)]


def cmd_stats(args) -> int:
    samples = {"rounds": [], "max_resident": [], "max_sent": [],
               "max_received": [], "total_moved": []}
    for path in args.metrics:
        doc = json.loads(open(path).read())
        rows = doc["per_round"]
        samples["rounds"].append(doc["rounds"])
        for key in ("max_resident", "max_sent", "max_received"):
            samples[key].append(max((r[key] for r in rows), default=0))
        samples["total_moved"].append(sum(r["total_moved"] for r in rows))
    agg = {
        key: {"max": max(vals),
              "median": statistics.median(vals),
              "p95": _percentile95(vals)}
        for key, vals in samples.items()
    }
    print(json.dumps({"files": len(args.metrics), **agg},
                     separators=(",", ":")))
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "gen":
            return cmd_gen(args)
        if args.command == "solve":
            return cmd_solve(args)
        return cmd_stats(args)
    except (TreeError, InfeasibleK, ValueError, KeyError, TypeError,
            OSError) as exc:
        print(f"mpctree: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
