"""Compare the compiled window-scoring kernel against the numpy fallback.

Run:  python benchmarks/bench_kernels.py [--trees N] [--repeat K]

Scores a realistic channel stack with a synthetic ensemble through both
backends, checks bit-equality, and reports wall-clock per call.
"""

import argparse
import time

import numpy as np

from pednav import kernels
from pednav.kernels import reference


def make_case(n_trees, seed=0):
    rng = np.random.default_rng(seed)
    stack = rng.normal(size=(10, 60, 80))
    wc = hc = 16
    n_feat = 10 * wc * hc
    feats = rng.integers(0, n_feat, size=(n_trees, 3)).astype(np.int64)
    ths = rng.normal(size=(n_trees, 3))
    leaves = rng.normal(scale=0.5, size=(n_trees, 4))
    return stack, (wc, hc), feats, ths, leaves


def time_backend(fn, case, reject, repeat):
    stack, win, feats, ths, leaves = case
    fn(stack, win, 1, feats, ths, leaves, reject)  # warm up
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn(stack, win, 1, feats, ths, leaves, reject)
        best = min(best, time.perf_counter() - t0)
    return best, out


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--trees", type=int, default=512)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()

    case = make_case(args.trees)
    n_windows = (60 - 16 + 1) * (80 - 16 + 1)
    print(f"{args.trees} trees, {n_windows} windows, backend loaded: {kernels.BACKEND}")

    for reject, label in [(-np.inf, "no early reject"), (-2.0, "soft cascade")]:
        t_ref, (s_ref, a_ref) = time_backend(reference.score_windows, case, reject, args.repeat)
        t_fast, (s_fast, a_fast) = time_backend(kernels.score_windows, case, reject, args.repeat)
        identical = np.array_equal(s_ref, s_fast) and np.array_equal(a_ref, a_fast)
        speedup = t_ref / t_fast if t_fast > 0 else float("inf")
        print(
            f"{label:>16}: numpy {t_ref * 1e3:8.2f} ms | {kernels.BACKEND} "
            f"{t_fast * 1e3:8.2f} ms | speedup {speedup:5.1f}x | "
            f"bit-identical: {identical}"
        )
        if not identical:
            raise SystemExit("backend outputs diverged")


if __name__ == "__main__":
    main()
