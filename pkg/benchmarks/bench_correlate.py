"""Coincidence-correlator throughput: numba kernel vs numpy fallback.

    python benchmarks/bench_correlate.py --tags 1e7 --repeat 3

Both backends are timed on the same synthetic streams (one pair-correlated
stream per arm with jitter and uncorrelated background) and must report
identical coincidence counts.
"""

import argparse
import time

import numpy as np

from biphoton import _accel
from biphoton._kernels import count_coincidences
from biphoton.tagstream import GenSpec, generate_tags, seconds_to_ps


def best_of(fn, repeat):
    times, result = [], None
    for _ in range(repeat):
        start = time.perf_counter()
        result = fn()
        times.append(time.perf_counter() - start)
    return min(times), result


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--tags", type=float, default=1e7, help="approximate tags per arm (default 1e7)")
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--window", type=float, default=1e-9, help="coincidence half-window, s")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    duration = 10.0
    rate = args.tags / duration
    spec = GenSpec(0.8 * rate, duration, seed=args.seed, background_rate_A=0.2 * rate,
                   background_rate_B=0.2 * rate, jitter=3e-10)
    t0 = time.perf_counter()
    a, b = generate_tags(spec)
    print(f"generated {len(a):,} + {len(b):,} tags in {time.perf_counter() - t0:.2f} s")
    w = seconds_to_ps(args.window)

    rows = []
    if _accel.HAVE_NUMBA:
        t0 = time.perf_counter()
        count_coincidences(a.timestamps[:1000], b.timestamps[:1000], w, use_numba=True)
        print(f"numba warm-up (compile or cache load): {time.perf_counter() - t0:.2f} s")
        rows.append(("numba",) + best_of(lambda: count_coincidences(a.timestamps, b.timestamps, w, use_numba=True),
                                         args.repeat))
    rows.append(("numpy",) + best_of(lambda: count_coincidences(a.timestamps, b.timestamps, w, use_numba=False),
                                     args.repeat))

    total = len(a) + len(b)
    print(f"{'backend':<8} {'best s':>9} {'Mtags/s':>9} {'coincidences':>14}")
    for name, t, n in rows:
        print(f"{name:<8} {t:9.3f} {total / t / 1e6:9.1f} {n:14,}")
    counts = {n for _, _, n in rows}
    if len(counts) != 1:
        raise SystemExit(f"backends disagree: {rows}")
    if len(rows) == 2:
        print(f"speed-up: {rows[1][1] / rows[0][1]:.1f}x")
    print("target: 1e7 tags per arm in < 10 s;",
          "met" if min(t for _, t, _ in rows) < 10.0 else "NOT met")


if __name__ == "__main__":
    np.seterr(all="raise")
    main()
