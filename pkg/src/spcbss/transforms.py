"""Translation-invariant wavelet frames for 1-D signals.

The expansion is the undecimated (a trous) cascade of an orthonormal
two-channel filter bank, circular at the boundary. Skipping the
decimation makes the usual filters overcomplete by a factor of two per
level, so both filters are rescaled by 1/sqrt(2); each level is then an
isometry and the whole frame is Parseval, meaning the adjoint of the
analysis operator is an exact inverse and coefficient energy equals
signal energy.

Coefficients of a length-T signal are laid out as J detail bands from
finest (scale 1) to coarsest (scale J) followed by one smooth band, each
of length T, giving (J + 1) * T values in total.
"""

from dataclasses import dataclass

import numpy as np

from . import backend
from .errors import InvalidConfigError

__all__ = [
    "FrameSpec",
    "parse_frame",
    "default_levels",
    "analyze",
    "synthesize",
    "analyze_matrix",
    "synthesize_matrix",
]

_SQ3 = np.sqrt(3.0)
# orthonormal lowpass filters; highpass is the alternating-sign reversal
_LOWPASS = {
    "haar": np.array([1.0, 1.0]) / np.sqrt(2.0),
    "daubechies4": np.array([1.0 + _SQ3, 3.0 + _SQ3, 3.0 - _SQ3, 1.0 - _SQ3])
    / (4.0 * np.sqrt(2.0)),
}


@dataclass(frozen=True)
class FrameSpec:
    """Frame description: filter family and number of detail scales.

    family is "haar" or "daubechies4"; levels must satisfy
    2**levels <= T and T divisible by 2**levels for every signal the
    frame is applied to.
    """

    family: str
    levels: int

    def __post_init__(self):
        if self.family not in _LOWPASS:
            raise InvalidConfigError(
                "unknown filter family %r (choose from %s)"
                % (self.family, sorted(_LOWPASS))
            )
        if self.levels < 1:
            raise InvalidConfigError("levels must be >= 1, got %d" % self.levels)


def parse_frame(text):
    """FrameSpec from a 'family:levels' string such as 'daubechies4:6'."""
    head, sep, tail = str(text).partition(":")
    if not sep:
        raise InvalidConfigError(
            "frame must look like 'family:levels', got %r" % text
        )
    try:
        levels = int(tail)
    except ValueError:
        raise InvalidConfigError(
            "frame levels must be an integer, got %r" % tail
        ) from None
    return FrameSpec(family=head, levels=levels)


def default_levels(T):
    """Default number of detail scales for a length-T signal.

    log2(T) - 4, clamped to [1, log2(T)]; leaves the smooth band with a
    little structure while keeping the finest scales that carry the
    spikes.
    """
    jmax = int(np.log2(T))
    return int(np.clip(jmax - 4, 1, jmax))


def _filters(spec):
    # per-level 1/sqrt(2) rescale turns each split into an isometry
    h = _LOWPASS[spec.family] / np.sqrt(2.0)
    g = h[::-1].copy()
    g[1::2] *= -1.0
    return h, g


def _check_length(T, spec):
    if 2**spec.levels > T:
        raise InvalidConfigError(
            "2**levels = %d exceeds signal length %d" % (2**spec.levels, T)
        )
    if T % 2**spec.levels != 0:
        raise InvalidConfigError(
            "signal length %d not divisible by 2**levels = %d"
            % (T, 2**spec.levels)
        )


def analyze_matrix(M, spec):
    """Row-wise analysis; returns a (rows, (levels+1)*T) array."""
    M = np.atleast_2d(np.asarray(M, dtype=np.float64))
    T = M.shape[1]
    _check_length(T, spec)
    h, g = _filters(spec)
    J = spec.levels
    out = np.empty((M.shape[0], (J + 1) * T))
    approx = M
    for j in range(J):
        dil = 2**j
        out[:, j * T : (j + 1) * T] = backend.dilated_filter_rows(approx, g, dil)
        approx = backend.dilated_filter_rows(approx, h, dil)
    out[:, J * T :] = approx
    return out


def synthesize_matrix(C, spec):
    """Adjoint of analyze_matrix; exact inverse on analysis outputs."""
    C = np.atleast_2d(np.asarray(C, dtype=np.float64))
    J = spec.levels
    if C.shape[1] % (J + 1) != 0:
        raise ValueError(
            "coefficient length %d not divisible by levels+1 = %d"
            % (C.shape[1], J + 1)
        )
    T = C.shape[1] // (J + 1)
    _check_length(T, spec)
    h, g = _filters(spec)
    approx = C[:, J * T :]
    for j in range(J - 1, -1, -1):
        dil = 2**j
        detail = C[:, j * T : (j + 1) * T]
        approx = backend.dilated_filter_rows(
            approx, h, dil, adjoint=True
        ) + backend.dilated_filter_rows(detail, g, dil, adjoint=True)
    return approx


def analyze(x, spec):
    """Expand a signal onto the frame.

    Parameters
    ----------
    x : array_like, 1-D
        Signal of length T with T divisible by 2**spec.levels.
    spec : FrameSpec
        Filter family and number of detail scales.

    Returns
    -------
    numpy.ndarray
        Coefficient vector of length (spec.levels + 1) * T: detail
        scales 1..J then the smooth band.

    Examples
    --------
    >>> spec = FrameSpec("haar", 2)
    >>> c = analyze(np.ones(16), spec)
    >>> np.allclose(c[:32], 0.0)  # constant signal has no detail
    True
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError("analyze expects a 1-D signal, got ndim=%d" % x.ndim)
    return analyze_matrix(x[None, :], spec)[0]


def synthesize(c, spec):
    """Reconstruct a signal from its frame coefficients.

    Parameters
    ----------
    c : array_like, 1-D
        Coefficient vector of length (spec.levels + 1) * T.
    spec : FrameSpec
        Frame the coefficients were produced with.

    Returns
    -------
    numpy.ndarray
        Signal of length T. For c = analyze(x, spec) the output equals
        x up to roundoff; for arbitrary c this is the frame adjoint.
    """
    c = np.asarray(c, dtype=np.float64)
    if c.ndim != 1:
        raise ValueError("synthesize expects a 1-D vector, got ndim=%d" % c.ndim)
    return synthesize_matrix(c[None, :], spec)[0]
