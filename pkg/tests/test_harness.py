import json
import math
import os

import numpy as np
import pytest

from spcbss.errors import InvalidConfigError
from spcbss.harness import (
    CSV_HEADER,
    ExperimentSpec,
    SweepRow,
    aggregate_rows,
    default_experiments,
    emit_aggregates_csv,
    emit_csv,
    emit_plotdata,
    is_failed,
    load_spec,
    read_csv,
    run_sweep,
)
from spcbss.separation import AlgoParams
from spcbss.spcgen import SpcConfig
from spcbss.transforms import FrameSpec


def tiny_base(**kw):
    base = dict(n=2, m=3, T=256, coherence=0.5, tau=4.0, snr_db=30.0, seed=9)
    base.update(kw)
    return SpcConfig(**base)


def tiny_algos(**kw):
    return (
        AlgoParams(algorithm="amca", p_max=15, **kw),
        AlgoParams(algorithm="gmca", p_max=15, **kw),
    )


def tiny_spec(**kw):
    base = dict(
        kind="coherence",
        values=(0.0, 0.5),
        trials=2,
        base=tiny_base(),
        algorithms=tiny_algos(),
        frame=FrameSpec("haar", 2),
        seed=3,
        record_runtime=False,
    )
    base.update(kw)
    return ExperimentSpec(**base)


# ---------------------------------------------------------------- specs


def test_default_experiments_grid():
    specs = default_experiments()
    assert [s.kind for s in specs] == [
        "coherence", "dynamic_range", "n_sources", "noise",
    ]
    by_kind = {s.kind: s for s in specs}

    coh = by_kind["coherence"]
    assert coh.values == tuple(round(0.1 * i, 1) for i in range(11))
    assert coh.base.n == coh.base.m == 10
    assert coh.base.tau == 4.0 and coh.base.snr_db == 120.0

    dyn = by_kind["dynamic_range"]
    assert len(dyn.values) == 9
    assert np.isclose(dyn.values[0], 0.1) and np.isclose(dyn.values[-1], 32.0)
    ratios = np.diff(np.log(np.array(dyn.values)))
    assert np.allclose(ratios, ratios[0])  # log-spaced grid

    assert by_kind["n_sources"].values == (2, 4, 8, 16, 32, 64, 128)
    assert by_kind["noise"].values == tuple(range(20, 121, 10))

    for s in specs:
        assert s.trials == 10
        assert s.base.T == 4096 and s.base.sparsity == 0.02
        assert {p.algorithm for p in s.algorithms} == {"amca", "gmca"}


def test_spec_validation():
    for bad in (
        dict(kind="bandwidth"),
        dict(values=()),
        dict(trials=0),
        dict(algorithms=()),
        dict(algorithms=(AlgoParams(algorithm="amca"),) * 2),
        dict(aggregate="mode"),
        dict(field="tau"),  # field without kind custom
        dict(kind="custom", field="bogus"),
    ):
        with pytest.raises(InvalidConfigError):
            tiny_spec(**bad)


def test_swept_field():
    assert tiny_spec().swept_field == "coherence"
    assert tiny_spec(kind="dynamic_range").swept_field == "tau"
    assert tiny_spec(kind="n_sources").swept_field == "n"
    assert tiny_spec(kind="noise").swept_field == "snr_db"
    assert tiny_spec(kind="custom").swept_field is None
    assert tiny_spec(kind="custom", field="fwhm").swept_field == "fwhm"


# ----------------------------------------------------------------- runs


def test_single_cell_single_row():
    spec = tiny_spec(
        values=(0.2,), trials=1,
        algorithms=(AlgoParams(algorithm="gmca", p_max=15),),
    )
    rows, aggregates = run_sweep(spec)
    assert len(rows) == 1
    assert len(aggregates) == 1
    assert rows[0].kind == "coherence" and rows[0].trial == 0


def test_row_ordering_and_cardinality():
    spec = tiny_spec()
    rows, _ = run_sweep(spec)
    assert len(rows) == 2 * 2 * 2  # values x trials x algos
    key = [(r.value, r.trial, r.algo) for r in rows]
    assert key == sorted(key)
    assert [r.algo for r in rows[:2]] == ["amca", "gmca"]


def test_realization_seeds():
    # the two algorithms of a trial share one generation seed (same
    # realization, paired comparison); distinct trials never collide
    spec = tiny_spec(values=(0.0, 0.3, 0.6), trials=4)
    rows, _ = run_sweep(spec)
    per_trial = {}
    for r in rows:
        per_trial.setdefault((r.value, r.trial), set()).add(r.seed_used)
    assert all(len(s) == 1 for s in per_trial.values())
    all_seeds = {next(iter(s)) for s in per_trial.values()}
    assert len(all_seeds) == 12


def test_determinism_across_workers(tmp_path):
    spec = tiny_spec()
    paths = []
    for name, workers in (("a", 1), ("b", 1), ("c", 2)):
        rows, _ = run_sweep(spec, workers=workers)
        path = tmp_path / ("%s.csv" % name)
        emit_csv(rows, str(path))
        paths.append(path.read_bytes())
    assert paths[0] == paths[1] == paths[2]


def test_workers_validation():
    with pytest.raises(InvalidConfigError):
        run_sweep(tiny_spec(), workers=0)


def test_failed_trials_become_sentinel_rows():
    # a sky-high assumed noise level kills every source immediately, so
    # that algorithm fails on every trial while the other still scores
    broken = AlgoParams(algorithm="gmca", p_max=15, noise_sigma=1e9)
    spec = tiny_spec(
        values=(0.2,), trials=3,
        algorithms=(AlgoParams(algorithm="amca", p_max=15), broken),
    )
    rows, aggregates = run_sweep(spec)
    assert len(rows) == 6
    failed = [r for r in rows if is_failed(r)]
    assert {r.algo for r in failed} == {"gmca"} and len(failed) == 3
    by_algo = {a["algo"]: a for a in aggregates}
    assert by_algo["gmca"]["n_failed"] == 3
    assert math.isnan(by_algo["gmca"]["median_mean_sdr"])
    assert by_algo["amca"]["n_failed"] == 0
    assert math.isfinite(by_algo["amca"]["median_mean_sdr"])


def test_invalid_generation_flagged_not_dropped():
    # sweeping the source count through an invalid value: the bad cell
    # still emits one sentinel row per algorithm
    spec = tiny_spec(kind="custom", field="n", values=(2, 0), trials=1)
    rows, aggregates = run_sweep(spec)
    assert len(rows) == 4
    bad = [r for r in rows if r.value == 0.0]
    assert len(bad) == 2 and all(is_failed(r) for r in bad)
    good = [r for r in rows if r.value == 2.0]
    assert not any(is_failed(r) for r in good)


def test_custom_field_sweep():
    spec = tiny_spec(kind="custom", field="fwhm", values=(8.0, 20.0),
                     trials=1)
    rows, _ = run_sweep(spec)
    assert len(rows) == 4
    assert {r.value for r in rows} == {8.0, 20.0}


# ------------------------------------------------------------ emission


def synthetic_rows():
    rows = []
    for value in (1.0, 2.0):
        for trial, ca in enumerate((3.0, 1.0, 2.0, 5.0, 4.0)):
            rows.append(SweepRow(
                kind="coherence", value=value, trial=trial, algo="amca",
                mean_sdr=10.0 * ca, min_sdr=ca, ca=ca,
                runtime_s=0.0, seed_used=trial,
            ))
    return rows


def test_aggregate_statistics():
    rows = synthetic_rows()
    aggregates = aggregate_rows(rows)
    assert [(a["value"], a["algo"]) for a in aggregates] == [
        (1.0, "amca"), (2.0, "amca"),
    ]
    first = aggregates[0]
    assert first["n_trials"] == 5 and first["n_failed"] == 0
    assert first["median_ca"] == 3.0 and first["mean_ca"] == 3.0
    assert first["median_mean_sdr"] == 30.0


def test_aggregate_excludes_failures_and_is_order_invariant():
    rows = synthetic_rows()
    nan = float("nan")
    rows.append(SweepRow("coherence", 1.0, 9, "amca", nan, nan, nan, 0.0, 9))
    aggregates = aggregate_rows(rows)
    first = aggregates[0]
    assert first["n_trials"] == 6 and first["n_failed"] == 1
    assert first["median_ca"] == 3.0  # unchanged by the sentinel
    shuffled = aggregate_rows(rows[::-1])
    assert shuffled == aggregates


def test_median_of_constant_trials():
    rows = [
        SweepRow("noise", 40.0, t, "gmca", 7.0, 5.0, 0.5, 0.0, t)
        for t in range(3)
    ]
    agg = aggregate_rows(rows)[0]
    assert agg["median_mean_sdr"] == 7.0 and agg["median_ca"] == 0.5
    assert agg["mean_min_sdr"] == 5.0


def test_csv_header_and_roundtrip(tmp_path):
    spec = tiny_spec(values=(0.1,), trials=2)
    rows, _ = run_sweep(spec)
    path = tmp_path / "rows.csv"
    emit_csv(rows, str(path))
    text = path.read_text().splitlines()
    assert text[0] == CSV_HEADER
    assert len(text) == 1 + len(rows)
    back = read_csv(str(path))
    assert back == rows
    again = tmp_path / "again.csv"
    emit_csv(back, str(again))
    assert again.read_bytes() == path.read_bytes()


def test_csv_roundtrip_with_sentinels(tmp_path):
    nan = float("nan")
    rows = synthetic_rows()
    rows.append(SweepRow("coherence", 2.0, 9, "amca", nan, nan, nan, 0.0, 1))
    path = tmp_path / "rows.csv"
    emit_csv(rows, str(path))
    back = read_csv(str(path))
    assert len(back) == len(rows)
    assert is_failed(back[-1])
    again = tmp_path / "again.csv"
    emit_csv(back, str(again))
    assert again.read_bytes() == path.read_bytes()


def test_emit_csv_unwritable_path():
    with pytest.raises(OSError, match="cannot write"):
        emit_csv(synthetic_rows(), "/nonexistent-dir/rows.csv")
    with pytest.raises(ValueError):
        emit_csv([], "anything.csv")


def test_read_csv_rejects_foreign_files(tmp_path):
    path = tmp_path / "x.csv"
    path.write_text("foo,bar\n1,2\n")
    with pytest.raises(ValueError):
        read_csv(str(path))


def test_aggregates_csv(tmp_path):
    aggregates = aggregate_rows(synthetic_rows())
    path = tmp_path / "agg.csv"
    emit_aggregates_csv(aggregates, str(path))
    lines = path.read_text().splitlines()
    assert lines[0].startswith("kind,value,algo,n_trials,n_failed,median_")
    assert len(lines) == 1 + len(aggregates)


def test_plotdata_files(tmp_path):
    rows = synthetic_rows()
    rows += [
        SweepRow("coherence", v, t, "gmca", 1.0, 0.5, 2.0, 0.0, t)
        for v in (1.0, 2.0) for t in range(5)
    ]
    aggregates = aggregate_rows(rows)
    paths = emit_plotdata(aggregates, str(tmp_path / "plots"))
    assert len(paths) == 6  # two algos, three metrics
    names = sorted(os.path.basename(p) for p in paths)
    assert names[0] == "coherence_amca_ca.dat"
    for p in paths:
        lines = open(p).read().splitlines()
        assert len(lines) == 2  # one per grid value
        for line in lines:
            a, b = line.split()
            float(a), float(b)
    with pytest.raises(ValueError):
        emit_plotdata(aggregates, str(tmp_path), which="mode")


# ------------------------------------------------------------ manifests


def manifest(tmp_path, data):
    path = tmp_path / "exp.json"
    path.write_text(json.dumps(data))
    return str(path)


def base_manifest():
    return {
        "kind": "coherence",
        "values": [0.0, 0.5],
        "trials": 2,
        "seed": 3,
        "base": dict(n=2, m=3, T=256, coherence=0.5, tau=4.0,
                     snr_db=30.0, seed=9),
        "algorithms": [
            {"algorithm": "amca", "p_max": 15},
            {"algorithm": "gmca", "p_max": 15},
        ],
        "frame": "haar:2",
        "record_runtime": False,
    }


def test_load_spec_matches_inline_spec(tmp_path):
    loaded = load_spec(manifest(tmp_path, base_manifest()))
    assert loaded == tiny_spec()


def test_load_spec_frame_forms(tmp_path):
    data = base_manifest()
    data["frame"] = {"family": "daubechies4", "levels": 3}
    loaded = load_spec(manifest(tmp_path, data))
    assert loaded.frame == FrameSpec("daubechies4", 3)
    data["frame"] = 7
    with pytest.raises(InvalidConfigError):
        load_spec(manifest(tmp_path, data))


def test_load_spec_rejects_unknown_and_missing_keys(tmp_path):
    data = base_manifest()
    data["threads"] = 4
    with pytest.raises(InvalidConfigError):
        load_spec(manifest(tmp_path, data))
    data = base_manifest()
    del data["values"]
    with pytest.raises(InvalidConfigError):
        load_spec(manifest(tmp_path, data))
    data = base_manifest()
    data["base"]["flavor"] = "salty"
    with pytest.raises(InvalidConfigError):
        load_spec(manifest(tmp_path, data))


# ------------------------------------------------- paper-scale contrast


def test_adaptive_dominates_mid_coherence():
    """Across the middle of the shared-support range the adaptive mode
    should aggregate above the uniform baseline. Desk-scale subset:
    three grid points, ten trials each, full-size realizations."""
    spec = ExperimentSpec(
        kind="coherence",
        values=(0.1, 0.4, 0.7),
        trials=10,
        base=SpcConfig(n=10, m=10, T=4096, coherence=0.0, tau=4.0,
                       snr_db=120.0, seed=0),
        seed=0,
        record_runtime=False,
    )
    rows, aggregates = run_sweep(spec)
    assert not any(is_failed(r) for r in rows)
    med = {(a["value"], a["algo"]): a["median_mean_sdr"] for a in aggregates}
    for value in (0.1, 0.4, 0.7):
        assert med[(value, "amca")] > med[(value, "gmca")], (
            "value %.1f: amca %.2f dB vs gmca %.2f dB"
            % (value, med[(value, "amca")], med[(value, "gmca")])
        )
