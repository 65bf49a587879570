"""Side-by-side timing of the compiled and pure kernel backends.

Runs the three hot kernels on separation-sized inputs and prints the
best wall time per backend plus the speedup. The two backends are
checked to agree on every input before any timing, so a reported
speedup is never a speedup over different answers.

Usage: python3 benchmarks/bench_kernels.py [--rows N] [--cols N]
       [--repeats K]
"""

import argparse
import time

import numpy as np

from spcbss import backend


def best_time(fn, repeats):
    fn()
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def run_case(name, call, repeats):
    out_pure = call(backend.pure)
    if backend.compiled is not None:
        out_comp = call(backend.compiled)
        if not np.allclose(out_pure, out_comp, rtol=1e-12, atol=1e-12):
            raise AssertionError("%s: backends disagree" % name)
    t_pure = best_time(lambda: call(backend.pure), repeats)
    if backend.compiled is None:
        print("%-34s %8.3f ms       (no compiled backend)"
              % (name, 1e3 * t_pure))
        return
    t_comp = best_time(lambda: call(backend.compiled), repeats)
    print("%-34s %8.3f ms %8.3f ms %6.1fx"
          % (name, 1e3 * t_pure, 1e3 * t_comp, t_pure / t_comp))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--rows", type=int, default=10)
    ap.add_argument("--cols", type=int, default=12288)
    ap.add_argument("--repeats", type=int, default=20)
    args = ap.parse_args(argv)

    rng = np.random.default_rng(0)
    X = rng.normal(size=(args.rows, args.cols))
    filt = rng.normal(size=4)
    mu = np.abs(rng.normal(size=args.rows))

    print("kernel (%dx%d)%*s pure    compiled  speedup"
          % (args.rows, args.cols, 24 - len(str(args.rows))
             - len(str(args.cols)), ""))
    for dil in (1, 8):
        run_case(
            "dilated_filter_rows dilation=%d" % dil,
            lambda k, d=dil: k.dilated_filter_rows(X, filt, d),
            args.repeats,
        )
    run_case(
        "dilated_filter_rows adjoint",
        lambda k: k.dilated_filter_rows(X, filt, 2, adjoint=True),
        args.repeats,
    )
    for mode, label in ((0, "hard"), (1, "soft")):
        run_case(
            "threshold_rows %s" % label,
            lambda k, m=mode: k.threshold_rows(X, mu, m),
            args.repeats,
        )
    for q in (1.0, 0.1):
        run_case(
            "lq_column_norms q=%g" % q,
            lambda k, qq=q: k.lq_column_norms(X, qq, -700.0),
            args.repeats,
        )


if __name__ == "__main__":
    main()
