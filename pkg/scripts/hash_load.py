"""Empirical max-load curves for the k-wise polynomial hash family.

Two experiments: unit keys (balls and bins) and the component-size sets
produced by tree decomposition, each against its budget line.

Example:
    python3 scripts/hash_load.py --n 16384 --machines 64 --seeds 100
"""

import argparse
import math

import numpy as np

from mpctree.binarize import build_extension
from mpctree.decompose import decompose_tree
from mpctree.hashing import k_for_machines, load_vector, sample_hash
from mpctree.trees import gen_tree


def quantiles(loads: list) -> str:
    arr = np.sort(np.array(loads))
    pick = [arr[0], arr[len(arr) // 2], arr[int(0.95 * (len(arr) - 1))],
            arr[-1]]
    return "min/med/p95/max = " + "/".join(str(int(x)) for x in pick)


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=1 << 14)
    ap.add_argument("--machines", type=int, default=64)
    ap.add_argument("--seeds", type=int, default=100)
    ap.add_argument("--kind", default="random_recursive")
    args = ap.parse_args()
    n, m = args.n, args.machines
    k = k_for_machines(m)

    keys = np.arange(1, n + 1, dtype=np.uint64)
    unit = np.ones(n, dtype=np.int64)
    loads = [int(load_vector(keys, unit, sample_hash(k, m, s)).max())
             for s in range(args.seeds)]
    budget = 2 * (n / m) * math.ceil(math.log2(n))
    print(f"balls-and-bins (n={n}, m={m}, k={k}): {quantiles(loads)}"
          f"  budget {budget:.0f}")

    tree = gen_tree(args.kind, n, seed=0)
    loads = []
    for seed in range(args.seeds):
        bt, _ = build_extension(tree, m, seed)
        d = decompose_tree(bt, m, seed)
        h = sample_hash(k, m, seed)
        loads.append(int(load_vector(d.comp_ids.astype(np.uint64),
                                     d.comp_size[d.comp_ids], h).max()))
    budget = 4 * (n / m) * math.log2(n) ** 2
    print(f"component sizes ({args.kind}): {quantiles(loads)}"
          f"  budget {budget:.0f}")


if __name__ == "__main__":
    main()
