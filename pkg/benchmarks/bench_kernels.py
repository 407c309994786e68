#!/usr/bin/env python3
"""Time the compiled kernels against the numpy fallback.

Workloads mirror the parameter-search hot path: merging ~1e5 atoms,
scoring thousands of rules over a test set, and batch forest traversal.

    python benchmarks/bench_kernels.py [--rows 500] [--repeat 5]
"""

import argparse
import time

import numpy as np

import forestrules as fr
from forestrules import _kernels_py, kernels
from forestrules.datasets import synthetic_diabetes

try:
    from forestrules import _speedups
except ImportError:
    _speedups = None


def timeit(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--rows", type=int, default=500)
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()

    if _speedups is None:
        print("compiled extension not built; showing the numpy backend only")

    print("preparing workload (100-tree forest on the synthetic clinical set)...")
    data = synthetic_diabetes()
    train, test = fr.split_dataset(data, 100 / 768, seed=5)
    model = fr.train_forest(train, fr.TrainConfig(n_trees=100, seed=1))
    rules = fr.extract_rules(model)
    simplifier = fr.Simplifier(rules, model)
    pack = simplifier.pack
    keep = (simplifier.atom_nq >= 0.05).astype(np.uint8)
    rng = np.random.default_rng(0)
    X = test.X[rng.integers(0, test.n_rows, size=args.rows)]
    contrib = np.stack([r.votes for r in rules.rules])
    fpack = kernels.pack_forest(model)

    workloads = {
        f"merge {pack.n_atoms} atoms / {pack.n_rules} rules": lambda impl: impl.merge_sorted_atoms(
            pack.offsets, pack.feat, pack.kind, pack.lo, pack.hi, pack.mask, keep
        ),
        f"score {pack.n_rules} rules x {args.rows} rows": lambda impl: impl.rule_scores(
            pack.offsets, pack.feat, pack.kind, pack.lo, pack.hi, pack.mask, X, contrib
        ),
        f"traverse 100 trees x {args.rows} rows": lambda impl: impl.forest_votes(
            fpack.node_kind, fpack.node_feat, fpack.node_thr, fpack.node_mask,
            fpack.node_left, fpack.node_right, fpack.leaf_votes, fpack.roots, X,
        ),
    }

    header = f"{'workload':<42}{'numpy':>12}{'compiled':>12}{'speedup':>10}"
    print(header)
    print("-" * len(header))
    for name, call in workloads.items():
        t_py, out_py = timeit(lambda: call(_kernels_py), args.repeat)
        if _speedups is not None:
            t_c, out_c = timeit(lambda: call(_speedups), args.repeat)
            a = out_py[0] if isinstance(out_py, tuple) else out_py
            b = out_c[0] if isinstance(out_c, tuple) else out_c
            assert np.allclose(np.asarray(a, dtype=float), np.asarray(b, dtype=float)), name
            print(f"{name:<42}{t_py * 1e3:>10.1f}ms{t_c * 1e3:>10.1f}ms{t_py / t_c:>9.1f}x")
        else:
            print(f"{name:<42}{t_py * 1e3:>10.1f}ms{'-':>12}{'-':>10}")


if __name__ == "__main__":
    main()
