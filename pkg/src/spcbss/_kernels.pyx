# Compiled twin of spcbss._kernels_py; see that module for the reference
# semantics. Tap-major accumulation keeps the summation order identical
# to the numpy version.

import numpy as np

from libc.math cimport exp, fabs, log, pow


def dilated_filter_rows(X, filt, Py_ssize_t dilation, bint adjoint=False):
    """Circular convolution of each row with a dilation-upsampled filter."""
    cdef double[:, ::1] x = np.ascontiguousarray(X, dtype=np.float64)
    cdef double[::1] f = np.ascontiguousarray(filt, dtype=np.float64)
    cdef Py_ssize_t R = x.shape[0], T = x.shape[1], K = f.shape[0]
    out_arr = np.zeros((R, T), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t r, t, k, s
    cdef double fk
    for k in range(K):
        fk = f[k]
        s = (k * dilation) % T
        if adjoint:
            s = (T - s) % T
        # out[t] += fk * x[(t - s) mod T], split at the wrap point
        for r in range(R):
            for t in range(s):
                out[r, t] += fk * x[r, t - s + T]
            for t in range(s, T):
                out[r, t] += fk * x[r, t - s]
    return out_arr


def threshold_rows(S, mu, int mode):
    """Row-wise thresholding, one threshold per row (0 hard, 1 soft)."""
    cdef double[:, ::1] s = np.ascontiguousarray(S, dtype=np.float64)
    cdef double[::1] m = np.ascontiguousarray(mu, dtype=np.float64)
    cdef Py_ssize_t R = s.shape[0], T = s.shape[1]
    out_arr = np.zeros((R, T), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t r, t
    cdef double v, mr, a
    for r in range(R):
        mr = m[r]
        if mode == 0:
            for t in range(T):
                v = s[r, t]
                if fabs(v) > mr:
                    out[r, t] = v
        else:
            for t in range(T):
                v = s[r, t]
                a = fabs(v) - mr
                if a > 0.0:
                    out[r, t] = a if v > 0.0 else -a
    return out_arr


def lq_column_norms(S, double q, double log_clamp):
    """Per-column lq quasi-norm in the log domain, clamped at log_clamp."""
    cdef double[:, ::1] s = np.ascontiguousarray(S, dtype=np.float64)
    cdef Py_ssize_t R = s.shape[0], T = s.shape[1]
    out_arr = np.zeros(T, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t r, t
    cdef double m, a, acc, ln
    for t in range(T):
        m = 0.0
        for r in range(R):
            a = fabs(s[r, t])
            if a > m:
                m = a
        if m == 0.0:
            continue
        acc = 0.0
        for r in range(R):
            a = fabs(s[r, t])
            if a > 0.0:
                acc += pow(a / m, q)
        ln = log(m) + log(acc) / q
        if ln > log_clamp:
            ln = log_clamp
        out[t] = exp(ln)
    return out_arr
