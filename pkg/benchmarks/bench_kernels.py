"""Time the compiled kernels against the numpy fallback.

    python benchmarks/bench_kernels.py [--n 1000000] [--repeat 3]

Each kernel runs on both backends; outputs are compared before timing is reported.
"""
import argparse
import time

import numpy as np

from toyobserver import kernels


def best_of(fn, repeat):
    best = float("inf")
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def cases(n):
    rows = np.stack([np.arange(n), np.ones(n, dtype=np.int64), np.arange(n) % 7], axis=1)
    vals = np.random.default_rng(0).integers(0, 1 << 40, n)
    thr = (1 << np.arange(1, 40, dtype=np.int64)) - 2
    return {
        "derive_rows": lambda: kernels.derive_rows(7, "branch", rows),
        "mc_cascades": lambda: kernels.mc_cascades(7, 0, n, B=2, T=1 << 20, W=64, L=64),
        "mc_stream_stats": lambda: kernels.mc_stream_stats(7, 0, n, B=2, T=1 << 20, W=64, L=64,
                                                           thresholds=thr),
        "top_two_array": lambda: kernels.top_two_array(vals),
    }


def same(a, b):
    if isinstance(a, tuple):
        return len(a) == len(b) and all(same(x, y) for x, y in zip(a, b))
    if isinstance(a, np.ndarray):
        return np.array_equal(a, b)
    return a == b


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--n", type=int, default=1_000_000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)

    have = kernels.available_backends()
    if "compiled" not in have:
        print("compiled extension not built; only the numpy backend is available")
    print(f"{'kernel':<18}" + "".join(f"{b:>12}" for b in have) + ("     speedup" if len(have) > 1 else ""))
    prev = kernels.backend()
    try:
        for name in cases(args.n):
            times, outs = [], []
            for b in have:
                kernels.use_backend(b)
                t, out = best_of(cases(args.n)[name], args.repeat)
                times.append(t)
                outs.append(out)
            line = f"{name:<18}" + "".join(f"{t * 1e3:>10.1f}ms" for t in times)
            if len(have) > 1:
                line += f"{times[1] / times[0]:>11.1f}x"
                if not same(outs[0], outs[1]):
                    line += "  MISMATCH"
            print(line)
    finally:
        kernels.use_backend(prev)


if __name__ == "__main__":
    main()
