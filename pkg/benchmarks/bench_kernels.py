"""Time the Cython kernels against the numpy fallback.

    python benchmarks/bench_kernels.py --points 200000 --repeat 3

Both backends run on identical inputs; the script also checks that they
return the same pairs and hit masks.
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from polypack import kernels


def best_of(fn, repeat):
    times = []
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    ap.add_argument("--points", type=int, default=200_000)
    ap.add_argument("--dim", type=int, default=2)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    rng = np.random.default_rng(args.seed)
    n, m = args.dim, args.points
    period = np.ones(n)
    # radius chosen so each point has a handful of neighbours
    r = 0.5 * (4.0 / m) ** (1.0 / n)
    pts = rng.random((m, n))
    queries = rng.random((m, n))
    zero = np.zeros(n)
    backends = ["python"] + (["cython"] if kernels.HAVE_CYTHON else [])
    print(f"points={m} dim={n} radius={r:.3g} backends={','.join(backends)}")
    results = {}
    for be in backends:
        t_pairs, pairs = best_of(
            lambda: kernels.pairs_within(pts, pts, period, np.full(n, 2 * r), same=True,
                                           sort=False, backend=be),
            args.repeat)
        t_hit, hits = best_of(
            lambda: kernels.any_hit(queries, zero, pts, zero, r, period, kernels.MODE_POINT_BALL,
                                    backend=be),
            args.repeat)
        order = np.lexsort(pairs[::-1])
        results[be] = ((pairs[0][order], pairs[1][order]), hits)
        print(f"{be:>7}: pairs_within {t_pairs * 1e3:9.1f} ms ({len(pairs[0])} pairs)   "
              f"any_hit {t_hit * 1e3:9.1f} ms ({int(hits.sum())} hits)")
    if len(results) == 2:
        (pa, ha), (pb, hb) = results["python"], results["cython"]
        same = all(np.array_equal(x, y) for x, y in zip(pa, pb)) and np.array_equal(ha, hb)
        print("backends agree" if same else "BACKENDS DISAGREE")


if __name__ == "__main__":
    main()
