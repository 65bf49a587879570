"""Acceptance checks, one test per numbered criterion.

Each test prints a single [criterion N] PASS/FAIL line with the
measured numbers (run with -s to see them live) and then asserts, so a
shortfall is a plain test failure carrying the same numbers. Criteria
4 to 7 run the full Monte-Carlo configurations and take minutes; set
SPCBSS_WORKERS to parallelize the trials without changing any output.
"""

import time
from itertools import permutations

import numpy as np

from spcbss.harness import ExperimentSpec, emit_csv, run_sweep
from spcbss.metrics import SdrEvaluator, match_and_scale, mixing_criterion
from spcbss.separation import AlgoParams, update_mixing
from spcbss.spcgen import SpcConfig
from spcbss.transforms import (
    FrameSpec,
    analyze,
    default_levels,
    synthesize,
)


def report(num, ok, detail):
    line = "[criterion %d] %s %s" % (num, "PASS" if ok else "FAIL", detail)
    print("\n" + line)
    assert ok, line


def test_criterion_1_frame_roundtrip():
    rng = np.random.default_rng(101)
    lengths = (256, 1024, 4096)
    families = ("haar", "daubechies4")
    worst_recon = worst_energy = 0.0
    start = time.perf_counter()
    for i in range(100):
        T = lengths[i % len(lengths)]
        spec = FrameSpec(families[i % 2], default_levels(T))
        x = rng.normal(size=T)
        c = analyze(x, spec)
        back = synthesize(c, spec)
        worst_recon = max(
            worst_recon, np.max(np.abs(back - x)) / np.max(np.abs(x))
        )
        ex, ec = x @ x, c @ c
        worst_energy = max(worst_energy, abs(ec - ex) / ex)
    elapsed = time.perf_counter() - start
    ok = worst_recon < 1e-10 and worst_energy < 1e-9 and elapsed < 10.0
    report(
        1, ok,
        "recon=%.2e (<1e-10) energy=%.2e (<1e-9) elapsed=%.1fs (<10s)"
        % (worst_recon, worst_energy, elapsed),
    )


def test_criterion_2_weighted_ls_optimality():
    rng = np.random.default_rng(202)
    worst = 0.0
    start = time.perf_counter()
    for _ in range(50):
        n = int(rng.integers(2, 11))
        m = int(rng.integers(n, 11))
        C = int(rng.integers(32, 257))
        X = rng.normal(size=(m, C))
        S = rng.normal(size=(n, C))
        w = rng.uniform(0.1, 2.0, size=C)
        A = update_mixing(X, S, w)

        def objective(B):
            R = X - B @ S
            return float(np.sum(w * np.sum(R * R, axis=0)))

        h = 1e-6
        grad_max = 0.0
        for i in range(m):
            for j in range(n):
                E = np.zeros_like(A)
                E[i, j] = h
                g = (objective(A + E) - objective(A - E)) / (2.0 * h)
                grad_max = max(grad_max, abs(g))
        worst = max(worst, grad_max / np.linalg.norm(X))
    elapsed = time.perf_counter() - start
    ok = worst < 1e-6 and elapsed < 30.0
    report(
        2, ok,
        "relative gradient=%.2e (<1e-6) elapsed=%.1fs (<30s)"
        % (worst, elapsed),
    )


def test_criterion_3_metric_oracles():
    rng = np.random.default_rng(303)
    start = time.perf_counter()

    assign_ok = True
    for _ in range(100):
        n = int(rng.integers(2, 7))
        A_est = rng.normal(size=(n + 1, n))
        A_true = rng.normal(size=(n + 1, n))
        M = np.linalg.pinv(A_est) @ A_true
        perm = match_and_scale(A_est, A_true).permutation
        value = np.sum(np.log(np.abs(M[perm, np.arange(n)])))
        brute = max(
            sum(np.log(max(abs(M[p[j], j]), 1e-300)) for j in range(n))
            for p in permutations(range(n))
        )
        assign_ok = assign_ok and np.isclose(value, brute, rtol=1e-12)

    invariance_err = 0.0
    for _ in range(100):
        A_true = rng.normal(size=(6, 4))
        A_est = rng.normal(size=(6, 4))
        P = np.eye(4)[:, rng.permutation(4)]
        D = np.diag(rng.choice([-1.0, 1.0], 4) * rng.uniform(0.2, 5.0, 4))
        ca = mixing_criterion(A_est, A_true)
        ca_pd = mixing_criterion(A_est @ P @ D, A_true)
        invariance_err = max(invariance_err, abs(ca - ca_pd) / max(1.0, ca))

    energy_err = 0.0
    S = rng.normal(size=(4, 200))
    Z = rng.normal(size=(6, 200))
    ev = SdrEvaluator(S, Z)
    for _ in range(100):
        est = rng.normal(size=200)
        d = ev.decompose(est, int(rng.integers(0, 4)))
        total = d.e_target + d.e_interf + d.e_noise + d.e_artefacts
        energy_err = max(energy_err, abs(total - est @ est) / (est @ est))

    elapsed = time.perf_counter() - start
    ok = (
        assign_ok
        and invariance_err < 1e-10
        and energy_err < 1e-9
        and elapsed < 30.0
    )
    report(
        3, ok,
        "assignment=%s invariance=%.2e (<1e-10) energy=%.2e (<1e-9) "
        "elapsed=%.1fs (<30s)" % (assign_ok, invariance_err, energy_err,
                                  elapsed),
    )


def _paper_base(**kw):
    base = dict(
        n=10, m=10, T=4096, coherence=0.0, tau=4.0, snr_db=120.0, seed=0
    )
    base.update(kw)
    return SpcConfig(**base)


def _aggregate(kind, value, base):
    spec = ExperimentSpec(
        kind=kind,
        values=(value,),
        trials=10,
        base=base,
        seed=0,
        record_runtime=False,
    )
    start = time.perf_counter()
    _, aggregates = run_sweep(spec)
    elapsed = time.perf_counter() - start
    return {a["algo"]: a for a in aggregates}, elapsed


def test_criterion_4_independent_recovery():
    agg, elapsed = _aggregate("coherence", 0.0, _paper_base())
    clauses = []
    for algo in ("gmca", "amca"):
        ca = agg[algo]["median_ca"]
        sdr = agg[algo]["median_mean_sdr"]
        clauses.append(ca < 5e-2 and sdr > 30.0)
    ok = all(clauses)
    report(
        4, ok,
        "gmca ca=%.3g sdr=%.1f, amca ca=%.3g sdr=%.1f "
        "(need ca<5e-2 and sdr>30 for both; %.0fs)"
        % (agg["gmca"]["median_ca"], agg["gmca"]["median_mean_sdr"],
           agg["amca"]["median_ca"], agg["amca"]["median_mean_sdr"],
           elapsed),
    )


def test_criterion_5_coherence_robustness():
    agg, elapsed = _aggregate("coherence", 0.5, _paper_base())
    a_sdr = agg["amca"]["median_mean_sdr"]
    g_sdr = agg["gmca"]["median_mean_sdr"]
    a_ca = agg["amca"]["median_ca"]
    g_ca = agg["gmca"]["median_ca"]
    ok = a_sdr >= 40.0 and a_sdr - g_sdr >= 20.0 and a_ca * 10.0 <= g_ca
    report(
        5, ok,
        "amca sdr=%.1f (need >=40), lead=%.1f dB (need >=20), "
        "ca ratio=%.1fx (need >=10x); %.0fs"
        % (a_sdr, a_sdr - g_sdr, g_ca / a_ca, elapsed),
    )


def test_criterion_6_dynamic_range_robustness():
    agg, elapsed = _aggregate(
        "dynamic_range", 32.0, _paper_base(coherence=0.2)
    )
    a_sdr = agg["amca"]["median_mean_sdr"]
    g_sdr = agg["gmca"]["median_mean_sdr"]
    ok = a_sdr >= 40.0 and a_sdr - g_sdr >= 20.0
    report(
        6, ok,
        "amca sdr=%.1f (need >=40), lead over gmca=%.1f dB (need >=20); "
        "%.0fs" % (a_sdr, a_sdr - g_sdr, elapsed),
    )


def test_criterion_7_full_correlation_degradation():
    agg, elapsed = _aggregate("coherence", 1.0, _paper_base())
    a_ca = agg["amca"]["median_ca"]
    g_ca = agg["gmca"]["median_ca"]
    ratio = max(a_ca / g_ca, g_ca / a_ca)
    ok = ratio <= 3.0
    report(
        7, ok,
        "amca ca=%.2f gmca ca=%.2f ratio=%.2f (need <=3); %.0fs"
        % (a_ca, g_ca, ratio, elapsed),
    )


def test_criterion_8_determinism(tmp_path):
    spec = ExperimentSpec(
        kind="coherence",
        values=(0.0, 0.5),
        trials=2,
        base=SpcConfig(n=2, m=3, T=256, coherence=0.0, tau=4.0,
                       snr_db=30.0, seed=0),
        algorithms=(
            AlgoParams(algorithm="amca", p_max=15),
            AlgoParams(algorithm="gmca", p_max=15),
        ),
        frame=FrameSpec("haar", 2),
        seed=12,
        record_runtime=False,
    )
    blobs = []
    for name, workers in (("one", 1), ("one-again", 1), ("eight", 8)):
        rows, _ = run_sweep(spec, workers=workers)
        path = tmp_path / ("%s.csv" % name)
        emit_csv(rows, str(path))
        blobs.append(path.read_bytes())
    ok = blobs[0] == blobs[1] == blobs[2]
    report(
        8, ok,
        "identical bytes across repeats and worker counts 1/8: %s (%d-byte "
        "tables)" % (ok, len(blobs[0])),
    )
