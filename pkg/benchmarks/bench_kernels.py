"""Time the numba kernels against their numpy fallbacks.

    python benchmarks/bench_kernels.py [--repeat 5]

Set LSCONF_DISABLE_NUMBA=1 to check that the package itself runs on the numpy
path; this script always times both when numba is importable.
"""
import argparse
import time

import numpy as np

from lsconf import _kernels
from lsconf.assignment import assign
from lsconf.vector_systems import build_system


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if not _kernels.HAVE_NUMBA:
        print("numba unavailable or disabled; nothing to compare")
        return

    rng = np.random.default_rng(0)
    pairs = build_system("22", 9).vectors()  # 756 members
    table = assign(build_system("21", 23), 5000)
    emb = rng.standard_normal((4096, 23))
    e = rng.standard_normal((4096, 23))
    t = table.coords[rng.integers(0, 5000, 4096)]

    cases = [
        (f"pair_stats {pairs.shape[0]} vectors", lambda: _kernels.pair_stats_numba(pairs),
         lambda: _kernels.pair_stats_numpy(pairs)),
        ("nearest 4096 x 5000 targets", lambda: _kernels.nearest_numba(emb, table.coords),
         lambda: _kernels.nearest_numpy(emb, table.coords)),
        ("cosine_loss 4096 x 23", lambda: _kernels.cosine_loss_numba(e, t),
         lambda: _kernels.cosine_loss_numpy(e, t)),
    ]
    print(f"{'kernel':34s} {'numba ms':>10s} {'numpy ms':>10s} {'ratio':>7s}")
    for name, jit_fn, np_fn in cases:
        jit_fn()  # compile
        a = best_of(jit_fn, args.repeat) * 1e3
        b = best_of(np_fn, args.repeat) * 1e3
        print(f"{name:34s} {a:10.2f} {b:10.2f} {b / a:7.2f}")

    hi_a, lo_a = _kernels.pair_stats_numba(pairs)
    hi_b, lo_b = _kernels.pair_stats_numpy(pairs)
    print(f"agreement: |dmax|={abs(hi_a - hi_b):.1e} |dmin|={abs(lo_a - lo_b):.1e}")


if __name__ == "__main__":
    main()
