"""Sweep the randomized decomposition and report observed vs budgeted stats.

Example:
    python3 scripts/decomposition_stats.py --n 4096 --machines 16 64 --seeds 25
"""

import argparse
import math
import time

from mpctree.binarize import build_extension
from mpctree.decompose import decompose_tree
from mpctree.trees import GENERATOR_KINDS, gen_tree


def sweep(kind: str, n: int, m: int, seeds: int, check: bool) -> dict:
    tree = gen_tree(kind, n, seed=0)
    agg = {"iters": 0, "comps": 0, "size": 0, "size_budget": 0.0,
           "path": 0, "path_budget": 0.0, "frac": 0.0}
    t0 = time.time()
    for seed in range(seeds):
        bt, _ = build_extension(tree, m, seed)
        d = decompose_tree(bt, m, seed, check_invariants=check)
        log = math.log2(bt.n)
        agg["iters"] = max(agg["iters"], d.iterations)
        agg["comps"] = max(agg["comps"], len(d.comp_ids))
        agg["size"] = max(agg["size"], int(d.comp_size[d.comp_ids].max()))
        agg["size_budget"] = max(agg["size_budget"], 4 * (bt.n / m) * log)
        agg["path"] = max(agg["path"], max((r.max_path for r in d.stats),
                                           default=0))
        agg["path_budget"] = max(agg["path_budget"], 2 * log)
        agg["frac"] = max(agg["frac"],
                          max((r.selected / r.candidates for r in d.stats
                               if r.candidates), default=0.0))
    agg["elapsed"] = time.time() - t0
    return agg


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=1 << 12)
    ap.add_argument("--machines", type=int, nargs="+", default=[16, 64])
    ap.add_argument("--seeds", type=int, default=25)
    ap.add_argument("--kinds", nargs="+", default=list(GENERATOR_KINDS))
    ap.add_argument("--check", action="store_true",
                    help="run the per-iteration invariant checker too")
    args = ap.parse_args()

    print(f"{'kind':<18}{'m':>4}{'iters':>7}{'comps':>7}"
          f"{'max size':>10}{'budget':>9}{'path':>6}{'budget':>8}"
          f"{'sel frac':>10}{'sec':>7}")
    for kind in args.kinds:
        for m in args.machines:
            a = sweep(kind, args.n, m, args.seeds, args.check)
            print(f"{kind:<18}{m:>4}{a['iters']:>7}{a['comps']:>7}"
                  f"{a['size']:>10}{a['size_budget']:>9.0f}{a['path']:>6}"
                  f"{a['path_budget']:>8.1f}{a['frac']:>10.3f}"
                  f"{a['elapsed']:>7.1f}")


if __name__ == "__main__":
    main()
