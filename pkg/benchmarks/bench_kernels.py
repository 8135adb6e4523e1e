"""Timing comparison of the compiled and numpy kernel backends.

Runs each hot kernel on sizes typical for training (batch 64, lists of
20 candidates, hidden widths 16-64) and a larger stress shape, and
prints per-call microseconds for both backends side by side.

Usage: python3 benchmarks/bench_kernels.py [--repeat 200] [--backend both]
"""

import argparse
import time

import numpy as np

from steerank import kernels


def make_cases(rng):
    """(name, kernel-fn-name, args...) for every benchmarked shape."""
    b, m, h = 64, 20, 32
    big = 256

    def f64(*shape):
        return np.ascontiguousarray(rng.normal(size=shape))

    cases = []
    for tag, (r, k, c) in (("small", (b * m, h, h)), ("large", (big * m, h, 2 * h))):
        a, w = f64(r, k), f64(k, c)
        g = f64(r, c)
        cases += [
            (f"mm_nn {tag} ({r}x{k})@({k}x{c})", "mm_nn", (a, w)),
            (f"mm_nt {tag}", "mm_nt", (g, w)),
            (f"mm_tn {tag}", "mm_tn", (a, g)),
        ]

    x = f64(b, m, h)
    y = f64(b, h, m)
    cases += [
        ("bmm_nn (64,20,32)@(64,32,20)", "bmm_nn", (x, y)),
        ("bmm_nt", "bmm_nt", (x, f64(b, m, h))),
        ("bmm_tn", "bmm_tn", (x, f64(b, m, m))),
    ]

    z = f64(b * m, h)
    cases += [
        ("add (1280x32)", "add", (z, f64(b * m, h))),
        ("mul", "mul", (z, f64(b * m, h))),
        ("add_bias", "add_bias", (z, f64(h))),
        ("col_sum", "col_sum", (z,)),
        ("tanh_fwd", "tanh_fwd", (z,)),
        ("tanh_bwd", "tanh_bwd", (np.tanh(z), f64(b * m, h))),
        ("sigmoid_fwd", "sigmoid_fwd", (z,)),
        ("exp_fwd", "exp_fwd", (z,)),
        ("log_fwd", "log_fwd", (np.abs(z) + 0.5,)),
    ]

    scores = f64(b, m)
    allowed = (rng.random((b, m)) < 0.6).astype(np.uint8)
    allowed[:, 0] = 1  # every row keeps at least one legal slot
    probs = kernels.masked_softmax_fwd(scores, allowed)
    cases += [
        ("masked_softmax_fwd (64x20)", "masked_softmax_fwd", (scores, allowed)),
        ("masked_softmax_bwd", "masked_softmax_bwd", (probs, f64(b, m), allowed)),
    ]

    idx = rng.integers(0, b * m, size=b * m).astype(np.int64)
    per_row = rng.integers(0, m, size=b).astype(np.int64)
    cases += [
        ("gather_rows", "gather_rows", (z, idx)),
        ("scatter_add_rows", "scatter_add_rows", (z, idx, b * m)),
        ("take_per_row (64x20)", "take_per_row", (scores, per_row)),
        ("put_per_row", "put_per_row", (f64(b), per_row, m)),
    ]
    return cases


def time_call(fn, args, repeat):
    fn(*args)  # warm up
    t0 = time.perf_counter()
    for _ in range(repeat):
        fn(*args)
    return (time.perf_counter() - t0) / repeat * 1e6


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=200)
    ap.add_argument("--backend", choices=["both", "numpy", "cython"],
                    default="both")
    args = ap.parse_args()

    rng = np.random.default_rng(0)
    cases = make_cases(rng)

    backends = []
    wanted = (("numpy", "cython") if args.backend == "both"
              else (args.backend,))
    for name in wanted:
        try:
            backends.append((name, kernels.get_module(name)))
        except ValueError as e:
            print(f"skipping {name}: {e}")
    if not backends:
        raise SystemExit("no backend available to benchmark")

    header = f"{'kernel':42s}" + "".join(f"{n + ' us':>12s}" for n, _ in backends)
    if len(backends) == 2:
        header += f"{'speedup':>10s}"
    print(f"active backend: {kernels.get_backend()}   repeat={args.repeat}")
    print(header)
    print("-" * len(header))

    totals = [0.0] * len(backends)
    for label, fn_name, call_args in cases:
        row = f"{label:42s}"
        times = []
        for i, (_, mod) in enumerate(backends):
            us = time_call(getattr(mod, fn_name), call_args, args.repeat)
            times.append(us)
            totals[i] += us
            row += f"{us:12.2f}"
        if len(times) == 2 and times[1] > 0:
            row += f"{times[0] / times[1]:9.2f}x"
        print(row)

    print("-" * len(header))
    row = f"{'total':42s}" + "".join(f"{t:12.2f}" for t in totals)
    if len(totals) == 2 and totals[1] > 0:
        row += f"{totals[0] / totals[1]:9.2f}x"
    print(row)


if __name__ == "__main__":
    main()
