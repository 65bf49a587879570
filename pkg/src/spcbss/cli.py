"""Command-line front end.

Four subcommands covering the whole pipeline: `gen` draws a synthetic
mixture to disk, `separate` runs one algorithm on an observation
matrix, `eval` scores a result directory against a truth directory,
and `sweep` drives the Monte-Carlo harness. Matrices travel as the
plain-text format of matio; everything else is JSON or CSV.
"""

import argparse
import json
import math
import os
import sys
from dataclasses import replace
from types import SimpleNamespace

from . import harness
from .errors import InvalidConfigError
from .matio import load_matrix, save_matrix
from .metrics import score_result
from .separation import AlgoParams, run
from .spcgen import SpcConfig, generate
from .transforms import parse_frame

_EXPERIMENTS = {
    "coherence": "coherence",
    "dynamic-range": "dynamic_range",
    "nsources": "n_sources",
    "noise": "noise",
    "custom": "custom",
}


def _cmd_gen(args):
    snr = None if args.noiseless else args.snr
    cfg = SpcConfig(
        n=args.n,
        m=args.m,
        T=args.T,
        coherence=args.coherence,
        tau=args.tau,
        seed=args.seed,
        sparsity=args.sparsity,
        fwhm=args.fwhm,
        snr_db=snr,
    )
    truth = generate(cfg)
    os.makedirs(args.out, exist_ok=True)
    save_matrix(os.path.join(args.out, "S.mat"), truth.sources)
    save_matrix(os.path.join(args.out, "A.mat"), truth.mixing)
    save_matrix(os.path.join(args.out, "Z.mat"), truth.noise)
    save_matrix(os.path.join(args.out, "X.mat"), truth.observations)
    supports = {
        "shared": [int(i) for i in truth.supports.shared],
        "independent": [
            [int(i) for i in idx] for idx in truth.supports.independent
        ],
    }
    with open(os.path.join(args.out, "supports.json"), "w") as fh:
        json.dump(supports, fh, indent=1)
        fh.write("\n")
    print("wrote S.mat A.mat Z.mat X.mat supports.json to %s" % args.out)
    return 0


def _load_truth_dir(path):
    return SimpleNamespace(
        sources=load_matrix(os.path.join(path, "S.mat")),
        mixing=load_matrix(os.path.join(path, "A.mat")),
        noise=load_matrix(os.path.join(path, "Z.mat")),
    )


def _cmd_separate(args):
    X = load_matrix(args.input)
    frame = parse_frame(args.frame)
    params = AlgoParams(
        algorithm=args.algo,
        p_max=args.pmax,
        epsilon=args.eps,
        q_start=args.qstart,
        q_final=args.qfinal,
        final_sigma_mult=args.sigma_mult,
        threshold_mode=args.mode,
        threshold_law=args.law,
        support_cap=args.cap,
        noise_sigma=args.noise_sigma,
        init_seed=args.seed,
    )
    truth = None if args.truth is None else _load_truth_dir(args.truth)
    result = run(X, args.n, params, frame, truth=truth)
    os.makedirs(args.out, exist_ok=True)
    save_matrix(os.path.join(args.out, "A_est.mat"), result.mixing)
    save_matrix(os.path.join(args.out, "S_est.mat"), result.sources)
    _write_trace(os.path.join(args.out, "trace.csv"), result.trace, args.n)
    with open(os.path.join(args.out, "run.json"), "w") as fh:
        json.dump(
            {"algo": args.algo, "n": args.n, "frame": args.frame}, fh, indent=1
        )
        fh.write("\n")
    print(
        "wrote A_est.mat S_est.mat trace.csv to %s (%d iterations)"
        % (args.out, len(result.trace))
    )
    return 0


def _write_trace(path, trace, n):
    header = ["iter", "q"] + ["mu_%d" % (j + 1) for j in range(n)]
    header.append("sdr_if_known")
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for rec in trace:
            cells = [str(rec.iteration), repr(rec.q)]
            cells.extend(repr(float(v)) for v in rec.thresholds)
            cells.append("" if math.isnan(rec.sdr) else repr(rec.sdr))
            fh.write(",".join(cells) + "\n")


def _cmd_eval(args):
    truth = _load_truth_dir(args.truth)
    result = SimpleNamespace(
        mixing=load_matrix(os.path.join(args.est, "A_est.mat")),
        sources=load_matrix(os.path.join(args.est, "S_est.mat")),
    )
    algo = "unknown"
    run_json = os.path.join(args.est, "run.json")
    if os.path.exists(run_json):
        with open(run_json) as fh:
            algo = json.load(fh).get("algo", algo)
    scores = score_result(result, truth)
    with open(args.out, "w") as fh:
        fh.write("algo,mean_sdr,min_sdr,ca\n")
        fh.write(
            "%s,%r,%r,%r\n"
            % (algo, scores["mean_sdr"], scores["min_sdr"], scores["ca"])
        )
    print(
        "%s: mean_sdr=%.2f dB min_sdr=%.2f dB ca=%.4g"
        % (algo, scores["mean_sdr"], scores["min_sdr"], scores["ca"])
    )
    return 0


def _cmd_sweep(args):
    kind = None if args.experiment is None else _EXPERIMENTS[args.experiment]
    if args.config is not None:
        spec = harness.load_spec(args.config)
        if kind is not None and kind != spec.kind:
            raise InvalidConfigError(
                "--experiment %s conflicts with config kind %s"
                % (args.experiment, spec.kind)
            )
    else:
        if kind is None:
            raise InvalidConfigError("need --experiment or --config")
        if kind == "custom":
            raise InvalidConfigError("a custom sweep needs --config")
        spec = next(
            s for s in harness.default_experiments() if s.kind == kind
        )
    overrides = {}
    if args.trials is not None:
        overrides["trials"] = args.trials
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.out is not None:
        overrides["out"] = args.out
    if args.frame is not None:
        overrides["frame"] = parse_frame(args.frame)
    if args.aggregate is not None:
        overrides["aggregate"] = args.aggregate
    if overrides:
        spec = replace(spec, **overrides)
    rows, aggregates = harness.run_sweep(spec, workers=args.workers)
    os.makedirs(spec.out, exist_ok=True)
    harness.emit_csv(rows, os.path.join(spec.out, "rows.csv"))
    harness.emit_aggregates_csv(
        aggregates, os.path.join(spec.out, "aggregates.csv")
    )
    harness.emit_plotdata(aggregates, spec.out, which=spec.aggregate)
    n_failed = sum(harness.is_failed(r) for r in rows)
    print(
        "%s sweep: %d rows, %d failed; tables in %s"
        % (spec.kind, len(rows), n_failed, spec.out)
    )
    return 1 if n_failed else 0


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="spcbss",
        description="Sparse blind source separation toolkit.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="draw a synthetic mixture to disk")
    gen.add_argument("--n", type=int, required=True, help="number of sources")
    gen.add_argument("--m", type=int, required=True, help="number of channels")
    gen.add_argument("--T", type=int, required=True, help="samples per source")
    gen.add_argument("--coherence", type=float, default=0.0)
    gen.add_argument("--tau", type=float, default=4.0)
    gen.add_argument("--sparsity", type=float, default=0.02)
    gen.add_argument("--fwhm", type=float, default=15.0)
    gen.add_argument("--snr", type=float, default=120.0, help="SNR in dB")
    gen.add_argument(
        "--noiseless", action="store_true", help="exactly zero noise"
    )
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--out", required=True, help="output directory")
    gen.set_defaults(func=_cmd_gen)

    sep = sub.add_parser("separate", help="run one separation")
    sep.add_argument("--algo", choices=("amca", "gmca"), required=True)
    sep.add_argument("--input", required=True, help="observation matrix file")
    sep.add_argument("--n", type=int, required=True, help="number of sources")
    sep.add_argument("--frame", default="daubechies4:2")
    sep.add_argument("--pmax", type=int, default=500)
    sep.add_argument("--qstart", type=float, default=1.0)
    sep.add_argument("--qfinal", type=float, default=0.01)
    sep.add_argument("--eps", type=float, default=1e-6)
    sep.add_argument("--sigma-mult", type=float, default=3.0)
    sep.add_argument("--mode", choices=("hard", "soft"), default="hard")
    sep.add_argument("--law", choices=("support", "linear"), default="support")
    sep.add_argument(
        "--cap",
        type=float,
        default=None,
        help="support budget cap (default depends on the algorithm)",
    )
    sep.add_argument(
        "--noise-sigma",
        type=float,
        default=None,
        help="known noise level; omitted means estimate per iteration",
    )
    sep.add_argument("--seed", type=int, default=7)
    sep.add_argument(
        "--truth",
        default=None,
        help="gen output directory; fills the trace SDR column",
    )
    sep.add_argument("--out", required=True, help="result directory")
    sep.set_defaults(func=_cmd_separate)

    ev = sub.add_parser("eval", help="score a result against ground truth")
    ev.add_argument("--est", required=True, help="separate output directory")
    ev.add_argument("--truth", required=True, help="gen output directory")
    ev.add_argument("--out", required=True, help="scores CSV path")
    ev.set_defaults(func=_cmd_eval)

    sweep = sub.add_parser("sweep", help="run a Monte-Carlo sweep")
    sweep.add_argument(
        "--experiment", choices=tuple(_EXPERIMENTS), default=None
    )
    sweep.add_argument("--config", default=None, help="JSON manifest path")
    sweep.add_argument("--trials", type=int, default=None)
    sweep.add_argument("--seed", type=int, default=None)
    sweep.add_argument(
        "--workers",
        type=int,
        default=None,
        help="parallel trials (default: $%s or 1)" % harness.WORKERS_ENV,
    )
    sweep.add_argument("--out", default=None, help="output directory")
    sweep.add_argument("--frame", default=None)
    sweep.add_argument("--aggregate", choices=("median", "mean"), default=None)
    sweep.set_defaults(func=_cmd_sweep)
    return parser


def main(argv=None):
    args = _build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (InvalidConfigError, OSError, ValueError) as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
