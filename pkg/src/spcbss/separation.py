"""Sparse blind source separation in a wavelet frame.

Two modes of one alternating scheme. Both estimate the mixing matrix A
and the sources from X = A S + Z by repeating, on the detail bands of
the frame expansion of X: project onto the current mixing (least
squares), keep each source's largest coefficients under a support
budget that widens as the run progresses, then re-estimate A by
weighted least squares on the thresholded sources and renormalize its
columns. Thresholds never drop below a noise floor, so once the budget
saturates the floor keeps feeding the updates with the entries it
rejects. The smooth band is excluded from estimation: it is dense for
every source, carries no morphological contrast, and its large
coefficients would crowd out the sparse detail structure the scheme
feeds on. The returned sources come from one final least-squares
projection over the full frame, detail bands cleaned at the floor,
smooth band passed through.

gmca runs the updates with uniform column weights. amca weights every
coefficient column by the inverse of its lq quasi-norm across sources,
with q driven from q_start down to q_final; columns where several
sources are jointly active get large lq norms and hence negligible
weight, so the mixing update concentrates on samples belonging to a
single source. That is what keeps the estimate unbiased when sources
share part of their support.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import backend
from .errors import (
    DegenerateMatchError,
    InvalidConfigError,
    SeparationFailureError,
)
from .rng import make_rng
from .spcgen import sample_mixing
from .transforms import analyze_matrix, synthesize_matrix

__all__ = [
    "AlgoParams",
    "IterationState",
    "TraceRecord",
    "SeparationResult",
    "hard_threshold",
    "soft_threshold",
    "mad_sigma",
    "compute_weights",
    "init_mixing",
    "update_sources",
    "update_mixing",
    "threshold_schedule",
    "q_schedule",
    "run",
]

_PINV_RTOL = 1e-12
_LOG_CLAMP = float(np.log(1e300))
_EARLY_STOP_TOL = 1e-9
_MODES = {"hard": 0, "soft": 1}
_SUPPORT_RAMP = 0.5  # fraction of the run over which the budget grows
_SUPPORT_CAP = {"gmca": 1.0, "amca": 0.25}


@dataclass(frozen=True)
class AlgoParams:
    """Settings for one separation run.

    algorithm: "amca" (adaptive column weights) or "gmca" (uniform).
    p_max: iteration count; thresholds, support budget and q reach
        their final values no later than the last iteration.
    epsilon: weight regularization, w = 1 / (norm + epsilon).
    q_start, q_final: endpoints of the geometric q decrease (amca).
    final_sigma_mult: the threshold floor in noise sigmas.
    threshold_mode: "hard" or "soft".
    threshold_law: "support" grows a per-source support budget
        linearly to its cap over the first half of the run; "linear"
        instead slides the threshold from each source's largest
        coefficient down to the floor.
    support_cap: largest fraction of the detail coefficients one
        source may keep. None picks 1.0 for gmca and 0.25 for amca:
        inverse-amplitude weights are only trustworthy on short
        supports, past that they hand their influence to small
        columns dominated by smoothing tails.
    noise_sigma: signal-domain noise level, when known. The floor is
        then final_sigma_mult * noise_sigma scaled per source by the
        row norms of pinv(A). None estimates the level each iteration
        from the median deviation of the finest detail band.
    weight_square: apply squared weights in the mixing update.
    init_seed: seed for the random initial mixing matrix.
    early_stop: stop once the mixing matrix moves less than 1e-9 in
        Frobenius norm between iterations.
    """

    algorithm: str = "amca"
    p_max: int = 500
    epsilon: float = 1e-6
    q_start: float = 1.0
    q_final: float = 0.01
    final_sigma_mult: float = 3.0
    threshold_mode: str = "hard"
    threshold_law: str = "support"
    support_cap: Optional[float] = None
    noise_sigma: Optional[float] = None
    weight_square: bool = False
    init_seed: int = 0
    early_stop: bool = False

    def __post_init__(self):
        if self.algorithm not in ("amca", "gmca"):
            raise InvalidConfigError("algorithm must be 'amca' or 'gmca'")
        if self.p_max < 1:
            raise InvalidConfigError("p_max must be >= 1")
        if self.epsilon <= 0.0:
            raise InvalidConfigError("epsilon must be positive")
        if not 0.0 < self.q_final <= self.q_start <= 1.0:
            raise InvalidConfigError("need 0 < q_final <= q_start <= 1")
        if self.final_sigma_mult <= 0.0:
            raise InvalidConfigError("final_sigma_mult must be positive")
        if self.threshold_mode not in _MODES:
            raise InvalidConfigError("threshold_mode must be 'hard' or 'soft'")
        if self.threshold_law not in ("support", "linear"):
            raise InvalidConfigError(
                "threshold_law must be 'support' or 'linear'"
            )
        if self.support_cap is not None and not 0.0 < self.support_cap <= 1.0:
            raise InvalidConfigError("support_cap must lie in (0, 1]")
        if self.noise_sigma is not None and self.noise_sigma < 0.0:
            raise InvalidConfigError("noise_sigma must be >= 0")


@dataclass
class IterationState:
    """Loop state of run(): current estimates plus schedule position."""

    mixing: np.ndarray
    coefficients: np.ndarray
    thresholds: np.ndarray
    q: float
    iteration: int


@dataclass(frozen=True)
class TraceRecord:
    """One trace line: schedule position and optional quality."""

    iteration: int
    q: float
    thresholds: np.ndarray
    sdr: float  # nan when no ground truth was supplied


@dataclass(frozen=True)
class SeparationResult:
    mixing: np.ndarray  # m x n, unit-norm columns
    sources: np.ndarray  # n x T, signal domain
    coefficients: np.ndarray  # n x (levels+1)*T, full frame
    trace: tuple


def hard_threshold(y, mu):
    """Keep entries with |y| strictly above mu, zero the rest."""
    if mu < 0.0:
        raise ValueError("threshold must be >= 0, got %g" % mu)
    y = np.asarray(y, dtype=np.float64)
    return np.where(np.abs(y) > mu, y, 0.0)


def soft_threshold(y, mu):
    """Shrink magnitudes by mu: sign(y) * max(|y| - mu, 0)."""
    if mu < 0.0:
        raise ValueError("threshold must be >= 0, got %g" % mu)
    y = np.asarray(y, dtype=np.float64)
    return np.sign(y) * np.maximum(np.abs(y) - mu, 0.0)


def mad_sigma(x):
    """Robust noise scale: median(|x - median(x)|) / 0.6745."""
    x = np.asarray(x, dtype=np.float64).ravel()
    if x.size == 0:
        raise ValueError("mad_sigma needs a nonempty input")
    return np.median(np.abs(x - np.median(x))) / 0.6745


def _mad_sigma_rows(S):
    med = np.median(S, axis=1, keepdims=True)
    return np.median(np.abs(S - med), axis=1) / 0.6745


def _noise_sigma_rows(S_coef, T):
    # noise scale per source from the finest detail band, where the
    # signal is sparsest and the median rides on the noise floor
    return _mad_sigma_rows(S_coef[:, :T])


def compute_weights(S_coef, q, epsilon):
    """Per-column weights 1 / (lq quasi-norm + epsilon), max rescaled to 1.

    The norms are evaluated in the log domain and clamped at 1e300, so
    q near zero cannot overflow; the final rescale by 1/max(w) is
    neutral in the mixing update (weights appear on both sides).
    """
    if not 0.0 < q <= 1.0:
        raise ValueError("q must lie in (0, 1], got %g" % q)
    if epsilon <= 0.0:
        raise ValueError("epsilon must be positive, got %g" % epsilon)
    S_coef = np.atleast_2d(np.asarray(S_coef, dtype=np.float64))
    norms = backend.lq_column_norms(S_coef, q, _LOG_CLAMP)
    w = 1.0 / (norms + epsilon)
    return w / w.max()


def init_mixing(X_coef, n, seed):
    """Random unit-column full-rank initial mixing for X_coef's channels."""
    m = np.atleast_2d(X_coef).shape[0]
    return sample_mixing(m, n, make_rng(seed))


def _least_squares_coeffs(A, X_coef):
    return np.linalg.pinv(A, rcond=_PINV_RTOL) @ X_coef


def update_sources(A, X_coef, mu, mode="hard"):
    """Least-squares source estimate followed by per-row thresholding.

    Computes pinv(A) @ X_coef (rank-revealing, relative tolerance
    1e-12), then applies threshold mu[j] to row j. mu must be
    componentwise nonnegative.
    """
    mu = np.asarray(mu, dtype=np.float64)
    if np.any(mu < 0.0):
        raise ValueError("thresholds must be >= 0")
    if mode not in _MODES:
        raise ValueError("mode must be 'hard' or 'soft'")
    S_ls = _least_squares_coeffs(A, np.atleast_2d(X_coef))
    return backend.threshold_rows(S_ls, mu, _MODES[mode])


def update_mixing(X_coef, S_coef, w=None, weight_square=False):
    """Weighted least-squares mixing update.

    Returns A = X W S^T (S W S^T)^(-1) with W = diag(w), or diag(w*w)
    when weight_square is set; w None means uniform weights. S_coef
    must have no all-zero row (run() strips dead sources first).
    """
    X_coef = np.atleast_2d(np.asarray(X_coef, dtype=np.float64))
    S_coef = np.atleast_2d(np.asarray(S_coef, dtype=np.float64))
    if w is None:
        Xw = X_coef
        Sw = S_coef
    else:
        w = np.asarray(w, dtype=np.float64)
        wv = w * w if weight_square else w
        Xw = X_coef * wv
        Sw = S_coef * wv
    G = Sw @ S_coef.T
    B = Xw @ S_coef.T
    sv = np.linalg.svd(G, compute_uv=False)
    if sv[0] == 0.0 or sv[-1] <= _PINV_RTOL * sv[0]:
        raise SeparationFailureError(
            "weighted source covariance is singular (a source died)"
        )
    return np.linalg.solve(G.T, B.T).T


def threshold_schedule(k, p_max, mu_start, mu_final):
    """Linear threshold decrease: mu_start at k = 0, mu_final at k = p_max."""
    mu_start = np.asarray(mu_start, dtype=np.float64)
    mu_final = np.asarray(mu_final, dtype=np.float64)
    return mu_start + (k / p_max) * (mu_final - mu_start)


def q_schedule(k, p_max, q_start, q_final):
    """Geometric q decrease: q_start at k = 0, q_final at k = p_max."""
    return q_start * (q_final / q_start) ** (k / p_max)


def _support_thresholds(S_ls, k, p_max, cap):
    # per-row threshold sitting on the support-budget boundary; the
    # budget grows linearly to cap over the first _SUPPORT_RAMP of the
    # run, then holds
    C = S_ls.shape[1]
    frac = min(cap, cap * k / (_SUPPORT_RAMP * p_max))
    kept = max(int(frac * C), 2)
    if kept >= C:
        return np.zeros(S_ls.shape[0])
    return np.partition(np.abs(S_ls), C - kept, axis=1)[:, C - kept]


def _row_noise_floor(P, S_ls, T, params):
    # a known noise level maps into each unmixed row through the
    # corresponding row of pinv(A); unknown level falls back to the
    # finest detail band's median deviation
    if params.noise_sigma is None:
        sigma = _noise_sigma_rows(S_ls, T)
    else:
        sigma = params.noise_sigma * np.linalg.norm(P, axis=1)
    return params.final_sigma_mult * sigma


def _dependent_row(S_sub, w, weight_square):
    # index (within S_sub) of the row most aligned with the null space
    # of the weighted covariance; that row is linearly dependent on the
    # others and gets killed
    if w is None:
        G = S_sub @ S_sub.T
    else:
        wv = w * w if weight_square else w
        G = (S_sub * wv) @ S_sub.T
    vecs = np.linalg.eigh(G)[1]
    return int(np.argmax(np.abs(vecs[:, 0])))


def _reseed_dead(A, X_coef, S_coef, dead_idx):
    # replace dead columns by the residual's leading left singular
    # directions, one direction per dead source, sign made canonical
    R = X_coef - A @ S_coef
    U = np.linalg.svd(R, full_matrices=False)[0]
    for i, j in enumerate(dead_idx):
        u = U[:, i]
        if u[np.argmax(np.abs(u))] < 0.0:
            u = -u
        A[:, j] = u


def _final_coefficients(A, X_full, T, params, mode):
    # one least-squares pass over the full frame; detail bands keep
    # only what clears the floor, the smooth band passes through
    P = np.linalg.pinv(A, rcond=_PINV_RTOL)
    S_full = P @ X_full
    C = X_full.shape[1] - T
    floor = _row_noise_floor(P, S_full, T, params)
    S_det = backend.threshold_rows(S_full[:, :C], floor, mode)
    return np.concatenate([S_det, S_full[:, C:]], axis=1)


def run(X, n, params, frame, truth=None):
    """Separate X into n sources; returns a SeparationResult.

    Parameters
    ----------
    X : array_like, m x T observation matrix.
    n : number of sources, 1 <= n <= m.
    params : AlgoParams.
    frame : FrameSpec used for the coefficient domain.
    truth : optional GroundTruth; when given, each trace record carries
        the mean SDR of the current estimate (slower, for convergence
        plots only).

    Notes
    -----
    Estimation runs on the frame's detail bands. Iteration k of
    1..p_max projects X onto the current mixing, thresholds each
    source row at the larger of the schedule value and the noise
    floor, and refits the mixing on the survivors. Under the default
    support law the schedule value is the coefficient magnitude at the
    row's support-budget boundary; under the linear law it slides from
    the row's largest coefficient down to the floor (the k = 0 value
    is never applied, the loop starts at k = 1, and a re-seeded source
    re-anchors itself through the per-iteration maximum).

    A source row thresholded to zero, or one that makes the weighted
    covariance singular (a duplicated source), is dead for the
    iteration: the mixing update runs on the survivors and dead
    columns are re-seeded from the residual; a source dead for more
    than p_max/10 consecutive iterations aborts the run.
    """
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    m, T = X.shape
    if not 1 <= n <= m:
        raise InvalidConfigError("need 1 <= n <= m, got n=%d m=%d" % (n, m))
    X_full = analyze_matrix(X, frame)
    X_coef = X_full[:, : frame.levels * T]
    A = init_mixing(X_coef, n, params.init_seed)
    mode = _MODES[params.threshold_mode]
    amca = params.algorithm == "amca"
    cap = params.support_cap
    if cap is None:
        cap = _SUPPORT_CAP[params.algorithm]
    state = IterationState(
        mixing=A, coefficients=np.zeros((n, X_coef.shape[1])),
        thresholds=np.zeros(n), q=params.q_start, iteration=0,
    )
    dead_streak = np.zeros(n, dtype=np.int64)
    scorer = None if truth is None else _TraceScorer(truth, frame)
    trace = []
    A_prev = None
    for k in range(1, params.p_max + 1):
        P = np.linalg.pinv(state.mixing, rcond=_PINV_RTOL)
        S_ls = P @ X_coef
        floor = _row_noise_floor(P, S_ls, T, params)
        if params.threshold_law == "support":
            mu = _support_thresholds(S_ls, k, params.p_max, cap)
        else:
            mu_start = np.max(np.abs(S_ls), axis=1)
            mu = threshold_schedule(k, params.p_max, mu_start, floor)
        mu = np.maximum(mu, floor)
        S_coef = backend.threshold_rows(S_ls, mu, mode)
        dead = ~np.any(S_coef != 0.0, axis=1)

        q = q_schedule(k, params.p_max, params.q_start, params.q_final)
        # weighted LS mixing update on the surviving sources; a row that
        # makes the weighted covariance singular (duplicated source) is
        # killed and the solve retried without it
        while not np.all(dead):
            alive_idx = np.flatnonzero(~dead)
            w = (
                compute_weights(S_coef[alive_idx], q, params.epsilon)
                if amca
                else np.ones(S_coef.shape[1])
            )
            try:
                A_new = update_mixing(
                    X_coef, S_coef[alive_idx], w, params.weight_square
                )
            except SeparationFailureError:
                kill = alive_idx[
                    _dependent_row(S_coef[alive_idx], w, params.weight_square)
                ]
                S_coef[kill] = 0.0
                dead[kill] = True
                continue
            norms = np.linalg.norm(A_new, axis=0)
            norms[norms == 0.0] = 1.0
            state.mixing[:, alive_idx] = A_new / norms
            S_coef[alive_idx] *= norms[:, None]
            break

        dead_streak = np.where(dead, dead_streak + 1, 0)
        if np.any(dead_streak > params.p_max / 10.0):
            worst = int(np.argmax(dead_streak))
            raise SeparationFailureError(
                "source %d dead for %d consecutive iterations"
                % (worst, int(dead_streak[worst]))
            )
        if np.any(dead):
            _reseed_dead(state.mixing, X_coef, S_coef, np.flatnonzero(dead))

        state.coefficients = S_coef
        state.thresholds = mu
        state.q = q if amca else 1.0
        state.iteration = k
        sdr = np.nan if scorer is None else scorer(state.mixing, S_coef, X_full)
        trace.append(
            TraceRecord(iteration=k, q=state.q, thresholds=mu.copy(), sdr=sdr)
        )
        if (
            params.early_stop
            and A_prev is not None
            and np.linalg.norm(state.mixing - A_prev) < _EARLY_STOP_TOL
        ):
            break
        A_prev = state.mixing.copy()
    coefficients = _final_coefficients(state.mixing, X_full, T, params, mode)
    sources = synthesize_matrix(coefficients, frame)
    return SeparationResult(
        mixing=state.mixing,
        sources=sources,
        coefficients=coefficients,
        trace=tuple(trace),
    )


class _TraceScorer:
    """Mean SDR of the running estimate against fixed ground truth."""

    def __init__(self, truth, frame):
        from . import metrics

        self._metrics = metrics
        self._truth = truth
        self._frame = frame
        self._evaluator = metrics.SdrEvaluator(truth.sources, truth.noise)

    def __call__(self, A, S_det, X_full):
        try:
            match = self._metrics.match_and_scale(A, self._truth.mixing)
        except DegenerateMatchError:
            return np.nan
        smooth = _least_squares_coeffs(A, X_full[:, S_det.shape[1] :])
        S_now = synthesize_matrix(
            np.concatenate([S_det, smooth], axis=1), self._frame
        )
        vals = [
            self._evaluator.sdr(S_now[match.permutation[j]], j)
            for j in range(self._truth.sources.shape[0])
        ]
        return float(np.mean(vals))
