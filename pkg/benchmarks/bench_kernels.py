"""Compare the compiled and numpy kernels on a realistic zero-circle product.

Usage: python benchmarks/bench_kernels.py [--repeat N]
"""

import argparse
import math
import timeit

import numpy as np

from wvdisks import _kernels_py, counterexample, scales
from wvdisks.weights import WeightFunction

try:
    from wvdisks._ext import _kernels as compiled
except ImportError:  # pragma: no cover
    compiled = None


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()

    sc = scales.build(WeightFunction(1, 1.0, math.exp(5)), 3.6)
    pf = counterexample.construct(sc, 3.0)
    r = 2.9
    K, _ = counterexample._cut(pf, r)
    log_h = np.ascontiguousarray(pf.log_h[:K])
    m = np.ascontiguousarray(pf.m[:K])
    th_sum = 2 * math.pi * np.arange(4096) / 4096
    sl = counterexample._candidate_circles(pf, r)
    radii, mc = np.ascontiguousarray(pf.radii[sl]), np.ascontiguousarray(pf.m[sl])
    th_dist = np.linspace(0, math.pi, 8 * int(mc.max()) + 1)

    cases = [
        (f"log_abs_sum  ({len(th_sum)} angles x {K} circles)", "log_abs_sum",
         (math.log(r), th_sum, log_h, m)),
        (f"min_zero_distance ({len(th_dist)} angles x {len(mc)} circles)", "min_zero_distance",
         (r, th_dist, radii, mc)),
    ]
    print(f"{'kernel':58s} {'numpy [ms]':>11s} {'cython [ms]':>12s} {'speedup':>8s} {'max |diff|':>11s}")
    for label, name, argv in cases:
        py_fn = getattr(_kernels_py, name)
        t_py = min(timeit.repeat(lambda: py_fn(*argv), number=1, repeat=args.repeat)) * 1e3
        if compiled is None:
            print(f"{label:58s} {t_py:11.2f} {'n/a':>12s}")
            continue
        c_fn = getattr(compiled, name)
        t_c = min(timeit.repeat(lambda: c_fn(*argv), number=1, repeat=args.repeat)) * 1e3
        diff = float(np.max(np.abs(py_fn(*argv) - c_fn(*argv))))
        print(f"{label:58s} {t_py:11.2f} {t_c:12.2f} {t_py / t_c:8.1f} {diff:11.2e}")


if __name__ == "__main__":
    main()
