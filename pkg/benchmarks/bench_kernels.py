"""Benchmark the compiled kernels against the pure-python fallback.

Times the three hot operations (prediction, objective, one update pass)
on one synthetic instance and prints per-op timings plus speedups. Also
cross-checks that both backends agree on the numbers they produce.

Usage:
    python benchmarks/bench_kernels.py [--sensors N] [--days N] [--slots N]
                                       [--entries N] [--rank R] [--repeats K]
"""

import argparse
import time

import numpy as np

from trafficfill import available_backends


def build_instance(args):
    rng = np.random.default_rng(7)
    dims = (args.sensors, args.days, args.slots)
    total = dims[0] * dims[1] * dims[2]
    n = min(args.entries, total)
    flat = rng.choice(total, size=n, replace=False)
    ii = (flat // (dims[1] * dims[2])).astype(np.int64)
    jj = ((flat // dims[2]) % dims[1]).astype(np.int64)
    kk = (flat % dims[2]).astype(np.int64)
    values = rng.uniform(0.0, 10.0, size=n)
    factors = tuple(0.1 * (1.0 - rng.random((d, args.rank))) for d in dims)
    return dims, factors, ii, jj, kk, values


def best_of(repeats, fn):
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def run_backend(impl, factors, ii, jj, kk, values, repeats):
    fs, fd, ft = (f.copy() for f in factors)
    lam, guard, kind, gamma = 2.0 ** -10, 1e-12, 0, 1.0

    timings = {
        "predict": best_of(
            repeats, lambda: impl.predict_entries(fs, fd, ft, ii, jj, kk)
        ),
        "objective": best_of(
            repeats,
            lambda: impl.objective_sum(
                fs, fd, ft, ii, jj, kk, values, lam, kind, gamma
            ),
        ),
        "update (3 modes)": best_of(
            repeats,
            lambda: [
                impl.update_pass(
                    fs, fd, ft, ii, jj, kk, values, mode, lam, guard, kind, gamma
                )
                for mode in (0, 1, 2)
            ],
        ),
    }
    outputs = {
        "predict": impl.predict_entries(fs, fd, ft, ii, jj, kk),
        "objective": impl.objective_sum(
            fs, fd, ft, ii, jj, kk, values, lam, kind, gamma
        ),
        "factors": (fs, fd, ft),
    }
    return timings, outputs


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--sensors", type=int, default=100)
    parser.add_argument("--days", type=int, default=40)
    parser.add_argument("--slots", type=int, default=60)
    parser.add_argument("--entries", type=int, default=24_000)
    parser.add_argument("--rank", type=int, default=20)
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()

    backends = available_backends()
    dims, factors, ii, jj, kk, values = build_instance(args)
    print(
        f"instance: dims {dims}, {ii.size} entries, rank {args.rank}, "
        f"best of {args.repeats}"
    )
    print(f"backends available: {', '.join(sorted(backends))}")

    results = {}
    for name in sorted(backends):
        timings, outputs = run_backend(
            backends[name], factors, ii, jj, kk, values, args.repeats
        )
        results[name] = (timings, outputs)

    ops = ("predict", "objective", "update (3 modes)")
    header = f"{'op':<18}" + "".join(f"{name:>14}" for name in sorted(results))
    if len(results) == 2:
        header += f"{'speedup':>10}"
    print(header)
    for op in ops:
        row = f"{op:<18}"
        for name in sorted(results):
            row += f"{results[name][0][op] * 1e3:>12.3f}ms"
        if len(results) == 2:
            t_py = results["python"][0][op]
            t_c = results["compiled"][0][op]
            row += f"{t_py / t_c:>9.1f}x"
        print(row)

    if len(results) == 2:
        out_c, out_p = results["compiled"][1], results["python"][1]
        pred_gap = float(
            np.max(np.abs(out_c["predict"] - out_p["predict"]))
            / max(float(np.max(np.abs(out_p["predict"]))), 1e-300)
        )
        obj_gap = abs(out_c["objective"] - out_p["objective"]) / max(
            abs(out_p["objective"]), 1e-300
        )
        fac_gap = max(
            float(np.max(np.abs(fc - fp) / np.maximum(np.abs(fp), 1e-300)))
            for fc, fp in zip(out_c["factors"], out_p["factors"])
        )
        print(
            f"cross-backend agreement: predict {pred_gap:.2e}, "
            f"objective {obj_gap:.2e}, updated factors {fac_gap:.2e} (rel)"
        )


if __name__ == "__main__":
    main()
