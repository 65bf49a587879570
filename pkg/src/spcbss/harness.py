"""Monte-Carlo sweeps comparing the two separation modes.

A sweep varies one generation parameter over a value grid, draws
`trials` independent realizations per value, runs every configured
algorithm on each realization, and scores the results. Trials are pure
functions of (spec, value index, trial index): every realization seed
is derived from the base seed by index hashing, so the emitted tables
are byte-identical for a fixed spec no matter how many workers run the
trials or in what order they finish.

A trial whose separation collapses is kept as a row of nan scores, and
aggregation skips those rows while reporting how many were skipped.
"""

import json
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from dataclasses import field as dc_field
from dataclasses import fields as dc_fields
from dataclasses import replace
from math import isnan
from typing import Optional

import numpy as np

from .errors import (
    DegenerateMatchError,
    GenerationError,
    InvalidConfigError,
    SeparationFailureError,
)
from .metrics import score_result
from .rng import derive_seed
from .separation import AlgoParams, run
from .spcgen import SpcConfig, generate
from .transforms import FrameSpec, parse_frame

__all__ = [
    "CSV_HEADER",
    "WORKERS_ENV",
    "ExperimentSpec",
    "SweepRow",
    "default_experiments",
    "load_spec",
    "run_sweep",
    "is_failed",
    "aggregate_rows",
    "emit_csv",
    "emit_aggregates_csv",
    "emit_plotdata",
    "read_csv",
]

CSV_HEADER = "kind,value,trial,algo,mean_sdr,min_sdr,ca,runtime_s,seed_used"
WORKERS_ENV = "SPCBSS_WORKERS"

_KIND_FIELD = {
    "coherence": "coherence",
    "dynamic_range": "tau",
    "n_sources": "n",
    "noise": "snr_db",
}
_METRIC_NAMES = ("mean_sdr", "min_sdr", "ca")
_AGG_HEADER = "kind,value,algo,n_trials,n_failed," + ",".join(
    "%s_%s" % (stat, m) for m in _METRIC_NAMES for stat in ("median", "mean")
)


def _default_frame():
    return FrameSpec(family="daubechies4", levels=2)


def _default_algorithms():
    return (AlgoParams(algorithm="amca"), AlgoParams(algorithm="gmca"))


@dataclass(frozen=True)
class ExperimentSpec:
    """One sweep: a value grid over a single generation parameter.

    kind picks the swept SpcConfig field: coherence, dynamic_range
    (tau), n_sources (n and m together), noise (snr_db), or custom,
    which varies the field named by `field` (None leaves the base
    config untouched and treats values as labels). base supplies every
    non-swept parameter; its own seed is ignored, realization seeds
    come from `seed` by index hashing. record_runtime False writes
    zero runtimes, making the emitted CSV bytes reproducible.
    """

    kind: str
    values: tuple
    trials: int
    base: SpcConfig
    algorithms: tuple = dc_field(default_factory=_default_algorithms)
    aggregate: str = "median"
    seed: int = 0
    out: str = "sweep"
    frame: FrameSpec = dc_field(default_factory=_default_frame)
    field: Optional[str] = None
    record_runtime: bool = True

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(self.values))
        object.__setattr__(self, "algorithms", tuple(self.algorithms))
        if self.kind not in (*_KIND_FIELD, "custom"):
            raise InvalidConfigError(
                "kind must be one of %s or 'custom', got %r"
                % (sorted(_KIND_FIELD), self.kind)
            )
        if not self.values:
            raise InvalidConfigError("values must be nonempty")
        if self.trials < 1:
            raise InvalidConfigError("trials must be >= 1")
        if not self.algorithms:
            raise InvalidConfigError("algorithms must be nonempty")
        names = [p.algorithm for p in self.algorithms]
        if len(set(names)) != len(names):
            raise InvalidConfigError(
                "algorithm names must be distinct, got %s" % names
            )
        if self.aggregate not in ("median", "mean"):
            raise InvalidConfigError("aggregate must be 'median' or 'mean'")
        if self.field is not None:
            if self.kind != "custom":
                raise InvalidConfigError(
                    "field is only meaningful for kind 'custom'"
                )
            if self.field not in {f.name for f in dc_fields(SpcConfig)}:
                raise InvalidConfigError(
                    "unknown generation field %r" % self.field
                )

    @property
    def swept_field(self):
        """Name of the overridden SpcConfig field, None for bare custom."""
        if self.kind == "custom":
            return self.field
        return _KIND_FIELD[self.kind]


@dataclass(frozen=True)
class SweepRow:
    """One scored trial of one algorithm; nan scores mean it failed."""

    kind: str
    value: float
    trial: int
    algo: str
    mean_sdr: float
    min_sdr: float
    ca: float
    runtime_s: float
    seed_used: int


def default_experiments(trials=10, seed=0, out="sweeps"):
    """The four standard sweeps at desk scale.

    Fixed parameters throughout: T = 4096, two percent active samples
    per source; the non-swept knobs sit at n = m = 10, coherence 0.2,
    tau 4, 120 dB. Trial count defaults to 10 per grid point; raise it
    to 100 to reproduce journal-scale medians.
    """

    def cfg(**kw):
        base = dict(
            n=10, m=10, T=4096, coherence=0.2, tau=4.0, seed=0, snr_db=120.0
        )
        base.update(kw)
        return SpcConfig(**base)

    def spec(kind, values, base):
        return ExperimentSpec(
            kind=kind,
            values=values,
            trials=trials,
            base=base,
            seed=seed,
            out=os.path.join(out, kind),
        )

    coherence = spec(
        "coherence",
        tuple(round(0.1 * i, 1) for i in range(11)),
        cfg(coherence=0.0),
    )
    dynamic = spec(
        "dynamic_range",
        tuple(np.logspace(np.log10(0.1), np.log10(32.0), 9)),
        cfg(tau=0.1),
    )
    nsources = spec(
        "n_sources", (2, 4, 8, 16, 32, 64, 128), cfg(n=2, m=2)
    )
    noise = spec(
        "noise", tuple(range(20, 121, 10)), cfg(snr_db=20.0)
    )
    return [coherence, dynamic, nsources, noise]


def load_spec(path):
    """Read an ExperimentSpec from a JSON manifest.

    Keys mirror the ExperimentSpec fields one to one; base and
    algorithms hold SpcConfig and AlgoParams fields the same way.
    frame may be a {"family", "levels"} object or a "family:levels"
    string. Unknown keys anywhere are rejected.
    """
    with open(path) as fh:
        data = json.load(fh)
    if not isinstance(data, dict):
        raise InvalidConfigError("%s: manifest must be a JSON object" % path)
    known = {f.name for f in dc_fields(ExperimentSpec)}
    unknown = set(data) - known
    if unknown:
        raise InvalidConfigError(
            "%s: unknown keys %s" % (path, sorted(unknown))
        )
    for key in ("kind", "values", "trials", "base"):
        if key not in data:
            raise InvalidConfigError("%s: missing required key %r" % (path, key))
    try:
        base = SpcConfig(**data["base"])
    except TypeError as exc:
        raise InvalidConfigError("%s: bad base config: %s" % (path, exc)) from exc
    kwargs = {
        k: v
        for k, v in data.items()
        if k not in ("base", "algorithms", "frame", "values")
    }
    if "algorithms" in data:
        try:
            kwargs["algorithms"] = tuple(
                AlgoParams(**entry) for entry in data["algorithms"]
            )
        except TypeError as exc:
            raise InvalidConfigError(
                "%s: bad algorithm entry: %s" % (path, exc)
            ) from exc
    if "frame" in data:
        spec = data["frame"]
        if isinstance(spec, str):
            kwargs["frame"] = parse_frame(spec)
        elif isinstance(spec, dict):
            try:
                kwargs["frame"] = FrameSpec(**spec)
            except TypeError as exc:
                raise InvalidConfigError(
                    "%s: bad frame: %s" % (path, exc)
                ) from exc
        else:
            raise InvalidConfigError("%s: bad frame %r" % (path, spec))
    return ExperimentSpec(values=tuple(data["values"]), base=base, **kwargs)


def _config_for(spec, vi):
    value = spec.values[vi]
    overrides = {}
    name = spec.swept_field
    if name is not None:
        if spec.kind == "n_sources":
            overrides["n"] = int(value)
            overrides["m"] = int(value)
        elif name in ("n", "m", "T"):
            overrides[name] = int(value)
        else:
            overrides[name] = None if value is None else float(value)
    return overrides


def _trial(spec, vi, ti):
    # one task of the pool: generate the realization, run and score
    # every algorithm on it; returns the trial's rows in algorithm
    # order (the caller sorts the full table)
    value = spec.values[vi]
    gseed = derive_seed(spec.seed, vi, ti)

    def row(algo, scores, runtime):
        return SweepRow(
            kind=spec.kind,
            value=float(value),
            trial=ti,
            algo=algo,
            mean_sdr=scores["mean_sdr"],
            min_sdr=scores["min_sdr"],
            ca=scores["ca"],
            runtime_s=runtime,
            seed_used=gseed,
        )

    failed = {"mean_sdr": float("nan"), "min_sdr": float("nan"), "ca": float("nan")}
    try:
        cfg = replace(spec.base, seed=gseed, **_config_for(spec, vi))
        truth = generate(cfg)
    except (GenerationError, InvalidConfigError):
        return [row(p.algorithm, failed, 0.0) for p in spec.algorithms]
    sigma = float(np.std(truth.noise))
    rows = []
    for ai, params in enumerate(spec.algorithms):
        params = replace(
            params,
            init_seed=derive_seed(spec.seed, vi, ti, ai),
            noise_sigma=(
                sigma if params.noise_sigma is None else params.noise_sigma
            ),
        )
        start = time.perf_counter()
        try:
            result = run(truth.observations, cfg.n, params, spec.frame)
            scores = score_result(result, truth)
        except (SeparationFailureError, DegenerateMatchError):
            scores = failed
        runtime = time.perf_counter() - start if spec.record_runtime else 0.0
        rows.append(row(params.algorithm, scores, runtime))
    return rows


def run_sweep(spec, workers=None):
    """Execute a sweep; returns (rows, aggregates).

    Rows are sorted by (value, trial, algo). workers None reads the
    SPCBSS_WORKERS environment variable (default 1); 1 runs in
    process, more use a process pool. The output is identical either
    way: each trial's scores depend only on (spec, value index, trial
    index), never on scheduling.
    """
    if workers is None:
        workers = int(os.environ.get(WORKERS_ENV, "1"))
    if workers < 1:
        raise InvalidConfigError("workers must be >= 1")
    tasks = [
        (vi, ti) for vi in range(len(spec.values)) for ti in range(spec.trials)
    ]
    slots = {}
    if workers == 1:
        for vi, ti in tasks:
            slots[(vi, ti)] = _trial(spec, vi, ti)
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = {
                pool.submit(_trial, spec, vi, ti): (vi, ti) for vi, ti in tasks
            }
            for future in futures:
                slots[futures[future]] = future.result()
    rows = [r for key in sorted(slots) for r in slots[key]]
    rows.sort(key=lambda r: (r.value, r.trial, r.algo))
    return rows, aggregate_rows(rows, spec.kind)


def is_failed(row):
    """True for the sentinel rows written when a trial collapsed."""
    return isnan(row.mean_sdr)


def aggregate_rows(rows, kind=None):
    """Median and mean of every metric per (value, algo).

    Failed rows are excluded from the statistics; each aggregate
    records how many were excluded. Returns a list of dicts ordered by
    (value, algo).
    """
    keys = sorted({(r.value, r.algo) for r in rows})
    out = []
    for value, algo in keys:
        sel = [r for r in rows if r.value == value and r.algo == algo]
        good = [r for r in sel if not is_failed(r)]
        rec = {
            "kind": kind if kind is not None else sel[0].kind,
            "value": value,
            "algo": algo,
            "n_trials": len(sel),
            "n_failed": len(sel) - len(good),
        }
        for name in _METRIC_NAMES:
            vals = [getattr(r, name) for r in good]
            rec["median_" + name] = float(np.median(vals)) if vals else float("nan")
            rec["mean_" + name] = float(np.mean(vals)) if vals else float("nan")
        out.append(rec)
    return out


def _fmt(v):
    # repr of a double is the shortest string that parses back to the
    # same bits, which is what "full precision" has to mean in text
    return repr(float(v))


def emit_csv(rows, path):
    """Write the per-trial table; header is CSV_HEADER verbatim."""
    if not rows:
        raise ValueError("no rows to emit")
    try:
        with open(path, "w") as fh:
            fh.write(CSV_HEADER + "\n")
            for r in rows:
                fh.write(
                    ",".join(
                        (
                            r.kind,
                            _fmt(r.value),
                            str(r.trial),
                            r.algo,
                            _fmt(r.mean_sdr),
                            _fmt(r.min_sdr),
                            _fmt(r.ca),
                            _fmt(r.runtime_s),
                            str(r.seed_used),
                        )
                    )
                    + "\n"
                )
    except OSError as exc:
        raise OSError("cannot write sweep table %r: %s" % (path, exc)) from exc


def read_csv(path):
    """Parse a file written by emit_csv back into SweepRow objects."""
    with open(path) as fh:
        header = fh.readline().rstrip("\n")
        if header != CSV_HEADER:
            raise ValueError("%s: unexpected header %r" % (path, header))
        rows = []
        for line in fh:
            f = line.rstrip("\n").split(",")
            if len(f) != 9:
                raise ValueError("%s: malformed row %r" % (path, line))
            rows.append(
                SweepRow(
                    kind=f[0],
                    value=float(f[1]),
                    trial=int(f[2]),
                    algo=f[3],
                    mean_sdr=float(f[4]),
                    min_sdr=float(f[5]),
                    ca=float(f[6]),
                    runtime_s=float(f[7]),
                    seed_used=int(f[8]),
                )
            )
    return rows


def emit_aggregates_csv(aggregates, path):
    """Write the aggregate table, one row per (value, algo)."""
    if not aggregates:
        raise ValueError("no aggregates to emit")
    try:
        with open(path, "w") as fh:
            fh.write(_AGG_HEADER + "\n")
            for rec in aggregates:
                cells = [
                    rec["kind"],
                    _fmt(rec["value"]),
                    rec["algo"],
                    str(rec["n_trials"]),
                    str(rec["n_failed"]),
                ]
                for name in _METRIC_NAMES:
                    cells.append(_fmt(rec["median_" + name]))
                    cells.append(_fmt(rec["mean_" + name]))
                fh.write(",".join(cells) + "\n")
    except OSError as exc:
        raise OSError(
            "cannot write aggregate table %r: %s" % (path, exc)
        ) from exc


def emit_plotdata(aggregates, out_dir, which="median"):
    """Two-column (value, aggregate) files, one per (algo, metric).

    Files land in out_dir as kind_algo_metric.dat, whitespace
    separated, ready for gnuplot. which picks the aggregate statistic,
    'median' or 'mean'. Returns the written paths.
    """
    if not aggregates:
        raise ValueError("no aggregates to emit")
    if which not in ("median", "mean"):
        raise ValueError("which must be 'median' or 'mean'")
    os.makedirs(out_dir, exist_ok=True)
    algos = sorted({rec["algo"] for rec in aggregates})
    kind = aggregates[0]["kind"]
    paths = []
    try:
        for algo in algos:
            for name in _METRIC_NAMES:
                path = os.path.join(
                    out_dir, "%s_%s_%s.dat" % (kind, algo, name)
                )
                with open(path, "w") as fh:
                    for rec in aggregates:
                        if rec["algo"] != algo:
                            continue
                        fh.write(
                            "%s %s\n"
                            % (_fmt(rec["value"]), _fmt(rec[which + "_" + name]))
                        )
                paths.append(path)
    except OSError as exc:
        raise OSError("cannot write plot data in %r: %s" % (out_dir, exc)) from exc
    return paths
