# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels: Gaussian correlation builds and Minkowski distances.

Mirrors _fallback.py; keep both in sync.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, fabs, pow

cnp.import_array()


def _as_matrix(x):
    arr = np.ascontiguousarray(np.asarray(x, dtype=np.float64))
    if arr.ndim != 2:
        raise ValueError(f"expected a 2-d array, got shape {arr.shape}")
    return arr


def gauss_corr_matrix(X, theta, is_cat):
    """Anisotropic Gaussian correlation matrix of the rows of X."""
    cdef double[:, ::1] Xv = _as_matrix(X)
    cdef double[::1] tv = np.ascontiguousarray(np.asarray(theta, dtype=np.float64))
    cdef unsigned char[::1] cv = np.ascontiguousarray(
        np.asarray(is_cat, dtype=bool).astype(np.uint8))
    cdef Py_ssize_t n = Xv.shape[0], d = Xv.shape[1]
    out_arr = np.empty((n, n), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t i, k, j
    cdef double acc, diff, corr
    for i in range(n):
        out[i, i] = 1.0
        for k in range(i + 1, n):
            acc = 0.0
            for j in range(d):
                if cv[j]:
                    if Xv[i, j] != Xv[k, j]:
                        acc += tv[j]
                else:
                    diff = Xv[i, j] - Xv[k, j]
                    acc += tv[j] * diff * diff
            corr = exp(-acc)
            out[i, k] = corr
            out[k, i] = corr
    return out_arr


def gauss_corr_cross(A, B, theta, is_cat):
    """Cross-correlation matrix between the rows of A and the rows of B."""
    cdef double[:, ::1] Av = _as_matrix(A)
    cdef double[:, ::1] Bv = _as_matrix(B)
    cdef double[::1] tv = np.ascontiguousarray(np.asarray(theta, dtype=np.float64))
    cdef unsigned char[::1] cv = np.ascontiguousarray(
        np.asarray(is_cat, dtype=bool).astype(np.uint8))
    cdef Py_ssize_t na = Av.shape[0], nb = Bv.shape[0], d = Av.shape[1]
    out_arr = np.empty((na, nb), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t i, k, j
    cdef double acc, diff
    for i in range(na):
        for k in range(nb):
            acc = 0.0
            for j in range(d):
                if cv[j]:
                    if Av[i, j] != Bv[k, j]:
                        acc += tv[j]
                else:
                    diff = Av[i, j] - Bv[k, j]
                    acc += tv[j] * diff * diff
            out[i, k] = exp(-acc)
    return out_arr


def minkowski_cdist(A, B, p):
    """Pairwise Minkowski distance (sum_j |a_j - b_j|^p)^(1/p)."""
    cdef double[:, ::1] Av = _as_matrix(A)
    cdef double[:, ::1] Bv = _as_matrix(B)
    cdef double pv = float(p)
    cdef Py_ssize_t na = Av.shape[0], nb = Bv.shape[0], d = Av.shape[1]
    out_arr = np.empty((na, nb), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t i, k, j
    cdef double acc
    for i in range(na):
        for k in range(nb):
            acc = 0.0
            for j in range(d):
                acc += pow(fabs(Av[i, j] - Bv[k, j]), pv)
            out[i, k] = pow(acc, 1.0 / pv)
    return out_arr
