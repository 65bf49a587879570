"""Synthetic mixtures of sparse, partially correlated sources.

Each source is a train of spikes smoothed by a Laplacian-shaped kernel.
A fraction of the spike locations is shared by all sources (the
partial correlation), the rest are drawn independently per source.
Shared-location amplitudes are scaled by tau, so tau sets the dynamic
range between the correlated part and the rest. Sources are mixed by a
random matrix with unit-norm columns and observed under additive
Gaussian noise at an exact signal-to-noise ratio.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import GenerationError, InvalidConfigError
from .rng import make_rng

__all__ = [
    "SpcConfig",
    "SupportSets",
    "GroundTruth",
    "sample_supports",
    "sample_amplitudes",
    "laplacian_kernel",
    "laplacian_smooth",
    "sample_mixing",
    "mix_with_noise",
    "generate",
]


@dataclass(frozen=True)
class SpcConfig:
    """Generation parameters.

    snr_db None means noiseless (the noise term is exactly zero).
    sparsity is the active fraction per source: K = round(sparsity * T)
    spikes, of which L = round(coherence * K) sit on the shared support.
    """

    n: int
    m: int
    T: int
    coherence: float
    tau: float
    seed: int
    sparsity: float = 0.02
    fwhm: float = 15.0
    snr_db: Optional[float] = 120.0

    def __post_init__(self):
        if self.n < 1 or self.m < self.n:
            raise InvalidConfigError(
                "need 1 <= n <= m, got n=%d m=%d" % (self.n, self.m)
            )
        if self.T < 1:
            raise InvalidConfigError("T must be positive")
        if not 0.0 < self.sparsity < 1.0:
            raise InvalidConfigError("sparsity must lie in (0, 1)")
        if not 0.0 <= self.coherence <= 1.0:
            raise InvalidConfigError("coherence must lie in [0, 1]")
        if self.tau <= 0.0:
            raise InvalidConfigError("tau must be positive")
        if self.fwhm <= 0.0:
            raise InvalidConfigError("fwhm must be positive")
        if self.n_active < 1:
            raise InvalidConfigError(
                "sparsity %g with T=%d gives no active samples"
                % (self.sparsity, self.T)
            )

    @property
    def n_active(self):
        """Spikes per source, K."""
        return int(round(self.sparsity * self.T))

    @property
    def n_shared(self):
        """Spikes on the shared support, L."""
        return int(round(self.coherence * self.n_active))


@dataclass(frozen=True)
class SupportSets:
    """Spike locations: one shared index set plus one per source."""

    shared: np.ndarray
    independent: tuple  # one index array per source


@dataclass(frozen=True)
class GroundTruth:
    """Everything a separation run can be scored against."""

    sources: np.ndarray  # n x T, after smoothing
    mixing: np.ndarray  # m x n, unit-norm columns
    noise: np.ndarray  # m x T
    observations: np.ndarray  # mixing @ sources + noise
    supports: SupportSets
    config: SpcConfig


def sample_supports(cfg, rng):
    """Draw the shared and per-source spike locations, no replacement."""
    shared = np.sort(rng.choice(cfg.T, size=cfg.n_shared, replace=False))
    pool = np.setdiff1d(np.arange(cfg.T), shared)
    k_ind = cfg.n_active - cfg.n_shared
    independent = tuple(
        np.sort(rng.choice(pool, size=k_ind, replace=False)) for _ in range(cfg.n)
    )
    return SupportSets(shared=shared, independent=independent)


def sample_amplitudes(supports, cfg, rng):
    """Spike trains before smoothing.

    Shared locations get N(0, tau^2) amplitudes, drawn independently
    for every source; independent locations get N(0, 1).
    """
    spiky = np.zeros((cfg.n, cfg.T))
    for j in range(cfg.n):
        spiky[j, supports.shared] = cfg.tau * rng.standard_normal(
            supports.shared.size
        )
        spiky[j, supports.independent[j]] = rng.standard_normal(
            supports.independent[j].size
        )
    return spiky


def laplacian_kernel(fwhm):
    """Peak-normalized two-sided exponential, truncated at 4 * fwhm.

    h[d] = exp(-|d| ln2 / (fwhm/2)), so h = 1/2 at |d| = fwhm/2 and 1/4
    at |d| = fwhm. Returns (offsets, values).
    """
    radius = int(round(4.0 * fwhm))
    offsets = np.arange(-radius, radius + 1)
    values = np.exp(-np.abs(offsets) * np.log(2.0) / (fwhm / 2.0))
    return offsets, values


def laplacian_smooth(S, fwhm):
    """Circular convolution of each row with the Laplacian kernel."""
    S = np.atleast_2d(np.asarray(S, dtype=np.float64))
    offsets, values = laplacian_kernel(fwhm)
    out = np.zeros_like(S)
    for d, v in zip(offsets, values):
        out += v * np.roll(S, d, axis=1)
    return out


def sample_mixing(m, n, rng, max_tries=100):
    """Gaussian mixing matrix with unit-norm columns, full column rank."""
    if n < 1 or m < n:
        raise InvalidConfigError("need 1 <= n <= m, got n=%d m=%d" % (n, m))
    for _ in range(max_tries):
        A = rng.standard_normal((m, n))
        norms = np.linalg.norm(A, axis=0)
        if np.any(norms == 0.0):
            continue
        A /= norms
        if np.linalg.matrix_rank(A) == n:
            return A
    raise GenerationError(
        "no full-rank mixing matrix in %d draws (m=%d, n=%d)" % (max_tries, m, n)
    )


def mix_with_noise(A, S, snr_db, rng):
    """Observe A @ S under Gaussian noise scaled to an exact SNR.

    The noise is rescaled so 10 log10(||A S||_F^2 / ||Z||_F^2) equals
    snr_db for this realization, not just in expectation. snr_db None
    returns exactly zero noise.
    """
    AS = A @ S
    if snr_db is None:
        Z = np.zeros_like(AS)
        return AS + Z, Z
    energy = np.linalg.norm(AS)
    if energy == 0.0:
        raise InvalidConfigError(
            "sources are identically zero, finite SNR is undefined"
        )
    Z = rng.standard_normal(AS.shape)
    Z *= energy / (np.linalg.norm(Z) * 10.0 ** (snr_db / 20.0))
    return AS + Z, Z


def generate(cfg):
    """Draw a full ground-truth realization for the given config.

    Deterministic: the same config (seed included) reproduces every
    array bit for bit.
    """
    rng = make_rng(cfg.seed)
    supports = sample_supports(cfg, rng)
    spiky = sample_amplitudes(supports, cfg, rng)
    sources = laplacian_smooth(spiky, cfg.fwhm)
    mixing = sample_mixing(cfg.m, cfg.n, rng)
    observations, noise = mix_with_noise(mixing, sources, cfg.snr_db, rng)
    return GroundTruth(
        sources=sources,
        mixing=mixing,
        noise=noise,
        observations=observations,
        supports=supports,
        config=cfg,
    )
