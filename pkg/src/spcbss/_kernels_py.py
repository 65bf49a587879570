"""Pure numpy implementations of the hot kernels.

Same call signatures and semantics as the compiled module spcbss._kernels;
spcbss.backend picks one of the two at import time.
"""

import numpy as np

__all__ = ["dilated_filter_rows", "threshold_rows", "lq_column_norms"]


def dilated_filter_rows(X, filt, dilation, adjoint=False):
    """Circular convolution of each row with a dilation-upsampled filter.

    adjoint=False: y[t] = sum_k f[k] x[(t - k*dilation) mod T]
    adjoint=True : y[t] = sum_k f[k] x[(t + k*dilation) mod T]
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    out = np.zeros_like(X)
    T = X.shape[1]
    sgn = -1 if adjoint else 1
    for k, fk in enumerate(filt):
        out += fk * np.roll(X, sgn * ((k * dilation) % T), axis=1)
    return out


def threshold_rows(S, mu, mode):
    """Row-wise thresholding with one threshold per row.

    mode 0: hard, keeps entries with |s| strictly above mu.
    mode 1: soft, shrinks magnitudes by mu.
    """
    S = np.asarray(S, dtype=np.float64)
    mu = np.asarray(mu, dtype=np.float64)[:, None]
    if mode == 0:
        return np.where(np.abs(S) > mu, S, 0.0)
    return np.sign(S) * np.maximum(np.abs(S) - mu, 0.0)


def lq_column_norms(S, q, log_clamp):
    """Per-column lq quasi-norm (sum |s|^q)^(1/q), 0 < q <= 1.

    Evaluated in the log domain so tiny q does not overflow; the log of
    each norm is clamped at log_clamp before exponentiation. Zero
    columns give 0.
    """
    A = np.abs(np.asarray(S, dtype=np.float64))
    m = A.max(axis=0)
    norms = np.zeros(A.shape[1])
    nz = m > 0.0
    if np.any(nz):
        with np.errstate(divide="ignore"):
            s = np.sum((A[:, nz] / m[nz]) ** q, axis=0)
        ln = np.log(m[nz]) + np.log(s) / q
        norms[nz] = np.exp(np.minimum(ln, log_clamp))
    return norms
