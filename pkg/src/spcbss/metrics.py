"""Separation quality: mixing-matrix criterion and source distortion.

Estimated sources come back in arbitrary order and scale, so scoring
starts by matching: P A_est^+ A_true should be the identity for a
perfect estimate, and the matching step picks the permutation and
row scales P bringing it closest. The entrywise l1 distance of that
corrected product from the identity is the mixing criterion C_A.

The source-to-distortion ratio splits an estimated source into target,
interference, noise and artefact parts by successive orthogonal
projections onto the span of the true source, of all true sources, and
of sources plus noise rows; the spans are nested, so the four energies
add up to the estimate's energy exactly.
"""

from dataclasses import dataclass
from itertools import permutations as _all_permutations

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import DegenerateMatchError

__all__ = [
    "MatchResult",
    "SdrDecomposition",
    "SdrEvaluator",
    "match_and_scale",
    "mixing_criterion",
    "sdr",
    "sdr_decompose",
    "score_result",
]

_PINV_RTOL = 1e-12
_SDR_CAP = 300.0
_DIAG_TOL = 1e-12
_LOG_FLOOR = 1e-300


@dataclass(frozen=True)
class MatchResult:
    """Permutation, scales, and the corrected product P A_est^+ A_true.

    permutation[j] is the estimated index matched to true source j;
    corrected row j is M[permutation[j]] / M[permutation[j], j], so the
    diagonal is exactly one.
    """

    permutation: np.ndarray
    scales: np.ndarray
    corrected: np.ndarray


@dataclass(frozen=True)
class SdrDecomposition:
    e_target: float
    e_interf: float
    e_noise: float
    e_artefacts: float
    sdr_db: float


def match_and_scale(A_est, A_true):
    """Align estimated mixing columns with the true ones.

    The permutation maximizes the product of matched magnitudes, i.e.
    the sum of log|M[perm[j], j]| over M = A_est^+ A_true (Hungarian
    assignment on log-magnitudes); each matched row is then scaled to
    put exactly 1 on the diagonal. Rescaling a column of A_est divides
    one row of M uniformly, which shifts the log objective by the same
    constant for every permutation, so the matching (and with it the
    criterion) is invariant under permutation and rescaling of the
    estimate, not just insensitive to it. A matched diagonal entry
    below 1e-12 in magnitude raises DegenerateMatchError.
    """
    A_est = np.atleast_2d(np.asarray(A_est, dtype=np.float64))
    A_true = np.atleast_2d(np.asarray(A_true, dtype=np.float64))
    M = np.linalg.pinv(A_est, rcond=_PINV_RTOL) @ A_true
    scores = np.log(np.maximum(np.abs(M), _LOG_FLOOR))
    rows, cols = linear_sum_assignment(scores, maximize=True)
    perm = np.empty(M.shape[0], dtype=np.int64)
    perm[cols] = rows
    diag = M[perm, np.arange(M.shape[0])]
    if np.any(np.abs(diag) < _DIAG_TOL):
        raise DegenerateMatchError(
            "matched diagonal entry below %g, scaling undefined" % _DIAG_TOL
        )
    corrected = M[perm] / diag[:, None]
    return MatchResult(
        permutation=perm, scales=1.0 / diag, corrected=corrected
    )


def _brute_force_permutation(M):
    # reference matcher for small n, used by the tests as an oracle
    n = M.shape[0]
    best, best_val = None, -np.inf
    for p in _all_permutations(range(n)):
        val = sum(
            np.log(max(abs(M[p[j], j]), _LOG_FLOOR)) for j in range(n)
        )
        if val > best_val:
            best, best_val = p, val
    return np.array(best, dtype=np.int64)


def mixing_criterion(A_est, A_true):
    """C_A: entrywise l1 distance of the corrected product from identity."""
    corrected = match_and_scale(A_est, A_true).corrected
    return float(np.sum(np.abs(corrected - np.eye(corrected.shape[0]))))


class SdrEvaluator:
    """SDR decompositions against one fixed (sources, noise) pair.

    Precomputes the projection Grams once; use this when scoring many
    estimates against the same ground truth (per-iteration traces).
    """

    def __init__(self, sources, noise):
        self._S = np.atleast_2d(np.asarray(sources, dtype=np.float64))
        Z = np.atleast_2d(np.asarray(noise, dtype=np.float64))
        self._full = np.vstack([self._S, Z])
        self._pinv_src = np.linalg.pinv(self._S @ self._S.T, rcond=_PINV_RTOL)
        self._pinv_full = np.linalg.pinv(
            self._full @ self._full.T, rcond=_PINV_RTOL
        )

    def decompose(self, s_est, j):
        s_est = np.asarray(s_est, dtype=np.float64).ravel()
        target = self._S[j]
        t_energy = target @ target
        if t_energy == 0.0:
            raise ValueError("true source %d is identically zero" % j)
        p1 = (target @ s_est / t_energy) * target
        p2 = self._S.T @ (self._pinv_src @ (self._S @ s_est))
        p3 = self._full.T @ (self._pinv_full @ (self._full @ s_est))
        e_target = float(p1 @ p1)
        e_interf = float(np.sum((p2 - p1) ** 2))
        e_noise = float(np.sum((p3 - p2) ** 2))
        e_artefacts = float(np.sum((s_est - p3) ** 2))
        distortion = e_interf + e_noise + e_artefacts
        if e_target == 0.0:
            db = -_SDR_CAP
        elif distortion == 0.0:
            db = _SDR_CAP
        else:
            db = float(
                np.clip(10.0 * np.log10(e_target / distortion), -_SDR_CAP, _SDR_CAP)
            )
        return SdrDecomposition(e_target, e_interf, e_noise, e_artefacts, db)

    def sdr(self, s_est, j):
        return self.decompose(s_est, j).sdr_db


def sdr_decompose(s_est, sources, noise, j):
    """Full four-way energy decomposition of one estimated source."""
    return SdrEvaluator(sources, noise).decompose(s_est, j)


def sdr(s_est, sources, noise, j):
    """Source-to-distortion ratio in dB, capped at +-300."""
    return sdr_decompose(s_est, sources, noise, j).sdr_db


def score_result(result, truth):
    """Score a SeparationResult against its GroundTruth.

    Returns {"mean_sdr", "min_sdr", "ca"}; sources are aligned through
    the mixing-matrix match, scaling is irrelevant to the SDR.
    """
    match = match_and_scale(result.mixing, truth.mixing)
    ca = float(
        np.sum(np.abs(match.corrected - np.eye(match.corrected.shape[0])))
    )
    evaluator = SdrEvaluator(truth.sources, truth.noise)
    n = truth.sources.shape[0]
    sdrs = [
        evaluator.sdr(result.sources[match.permutation[j]], j) for j in range(n)
    ]
    return {
        "mean_sdr": float(np.mean(sdrs)),
        "min_sdr": float(np.min(sdrs)),
        "ca": ca,
    }
