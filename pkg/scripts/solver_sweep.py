"""Run every solver over random trees and print rounds/space vs budgets.

Each trial draws one tree per generator, solves the five one-machine-
mergeable problems in a single simulated run, then bisection and heaviest-k
subtree, and checks all answers against the sequential oracles.

Example:
    python3 scripts/solver_sweep.py --trials 5 --max-n 2048
"""

import argparse
import math

from mpctree.linear import solve_linear
from mpctree.oracles import (
    seq_bisection, seq_dominating_set, seq_kst, seq_longest_path,
    seq_matching, seq_mis, seq_vertex_cover,
)
from mpctree.polylog import POLYLOG_PLUGINS, solve_polylog
from mpctree.trees import GENERATOR_KINDS, gen_tree
from mpctree.values import seeded_rng

SEQ = {"matching": seq_matching, "mis": seq_mis, "vc": seq_vertex_cover,
       "dominating-set": seq_dominating_set, "longest-path": seq_longest_path}


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--trials", type=int, default=5)
    ap.add_argument("--min-n", type=int, default=64)
    ap.add_argument("--max-n", type=int, default=2048)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--skip-linear", action="store_true",
                    help="only run the single-round-budget problems")
    args = ap.parse_args()

    names = sorted(POLYLOG_PLUGINS)
    print(f"{'kind':<18}{'n':>6}{'m':>4}{'rounds':>8}{'resident':>10}"
          f"{'budget':>10}  verified")
    mismatches = 0
    for trial in range(args.trials):
        for kind in GENERATOR_KINDS:
            rng = seeded_rng(args.seed, "sweep", trial, kind)
            n = rng.randint(args.min_n, args.max_n)
            tree = gen_tree(kind, n, seed=trial, weight_dist="uniform:1:30")
            out = solve_polylog(tree, names, seed=trial)
            bad = [p for p in names if out.values[p] != SEQ[p](tree)]
            budget = 8 * (n / out.machines) * math.log2(n) ** 2
            row = "all ok" if not bad else f"MISMATCH {bad}"
            print(f"{kind:<18}{n:>6}{out.machines:>4}{out.rounds:>8}"
                  f"{out.max_resident():>10}{budget:>10.0f}  {row}")
            mismatches += len(bad)

            if args.skip_linear:
                continue
            k = rng.randint(1, n)
            bis = solve_linear(tree, "bisection", machines=16, seed=trial)
            kst = solve_linear(tree, "kst", k=k, machines=16, seed=trial)
            ok = (bis.value == seq_bisection(tree)
                  and kst.value == seq_kst(tree, k))
            budget = 8 * (n ** (4 / 3) / 16) * math.log2(n) ** 2
            resident = max(bis.max_resident(), kst.max_resident())
            print(f"{'  bisection+kst':<18}{n:>6}{16:>4}"
                  f"{max(bis.rounds, kst.rounds):>8}{resident:>10}"
                  f"{budget:>10.0f}  {'all ok' if ok else 'MISMATCH'}")
            mismatches += not ok
    print(f"\nmismatches: {mismatches}")


if __name__ == "__main__":
    main()
