"""Compare the compiled and pure-Python evidence kernels.

    python benchmarks/bench_backends.py --n-list 1000,10000,100000

Both kernels run the same recursion on the same sorted sample; the table
shows the best of ``--repeat`` timings, the speedup and a check that the
two log evidences agree.
"""

import argparse
import math
import sys
import time

import numpy as np

from bayestree import _backend, distributions
from bayestree.engine import DEFAULT_DEPTH_CAP, prior_dim_coefficients
from bayestree.model import ModelParams


def best_time(kernel, pts, a, p, repeat):
    best = math.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        res = kernel.bayes_tree(pts, 0.4, a, p.s, p.alpha, 0, -1, DEFAULT_DEPTH_CAP)
        best = min(best, time.perf_counter() - t0)
    return best, res


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--dist", default="Linear")
    ap.add_argument("--n-list", default="1000,10000,100000")
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--dim-max", type=int, default=16)
    args = ap.parse_args(argv)

    if _backend.compiled_kernel is None:
        print("compiled kernel not available; build it with `pip install -e .`", file=sys.stderr)
        return 1
    p = ModelParams()
    a = prior_dim_coefficients(args.dim_max, p)
    print(f"{'n':>8} {'compiled [s]':>13} {'python [s]':>11} {'speedup':>8} {'|dlogp|':>9}")
    for n in (int(float(t)) for t in args.n_list.split(",")):
        pts = np.ascontiguousarray(distributions.sample(args.dist, n, args.seed).points)
        tc, rc = best_time(_backend.compiled_kernel, pts, a, p, args.repeat)
        tp, rp = best_time(_backend.python_kernel, pts, a, p, args.repeat)
        print(f"{n:>8} {tc:>13.4f} {tp:>11.4f} {tp / tc:>8.1f} {abs(rc[0] - rp[0]):>9.1e}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
