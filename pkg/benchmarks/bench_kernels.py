"""Time the compiled kernels against the NumPy fallback.

    python3 benchmarks/bench_kernels.py [--sizes 14,16,18,20] [--repeat 5] [--out kernels.csv]

Prints one CSV row per (kernel, I, backend) with the best wall time and the
speedup of the compiled backend. Both backends are checked for equal output.
"""

import argparse
import csv
import sys
import timeit

import numpy as np

from dushap import _kernels_py

try:
    from dushap import _kernels
except ImportError:
    sys.exit("the compiled extension is not built; run `pip install -e . --no-build-isolation`")


def cases(n, rng):
    sizes = rng.integers(1, 1000, n)
    table = rng.normal(size=1 << n)
    perms = np.array([rng.permutation(n) for _ in range(20_000)])
    u, taus = rng.random((20_000, n)), rng.random(20_000)
    return {
        "subset_sums": lambda m: m.subset_sums(sizes),
        "layer_marginal_sums": lambda m: m.layer_marginal_sums(table, n),
        "predecessor_masks": lambda m: m.predecessor_masks(perms, 0),
        "bernoulli_masks": lambda m: m.bernoulli_masks(u, taus, 0),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", default="14,16,18,20")
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--out", default=None)
    args = ap.parse_args()
    rng = np.random.default_rng(0)
    rows = []
    for n in (int(s) for s in args.sizes.split(",")):
        for name, call in cases(n, rng).items():
            if not np.array_equal(call(_kernels), call(_kernels_py)):
                raise SystemExit(f"{name} differs between backends at I={n}")
            best = {}
            for label, mod in (("cython", _kernels), ("numpy", _kernels_py)):
                best[label] = min(timeit.repeat(lambda: call(mod), number=1, repeat=args.repeat))
            for label, t in best.items():
                rows.append((name, n, label, f"{t:.6f}", f"{best['numpy'] / best['cython']:.2f}"))
    fh = open(args.out, "w", newline="") if args.out else sys.stdout
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(("kernel", "I", "backend", "seconds", "speedup"))
    writer.writerows(rows)
    if args.out:
        fh.close()


if __name__ == "__main__":
    main()
