"""Pure-numpy implementations of the hot kernels.

The accumulation loops run over dimensions (always few) so the summation
order matches the compiled backend, keeping the two numerically aligned.
"""

import numpy as np


def _as_matrix(x):
    arr = np.ascontiguousarray(np.asarray(x, dtype=np.float64))
    if arr.ndim != 2:
        raise ValueError(f"expected a 2-d array, got shape {arr.shape}")
    return arr


def gauss_corr_matrix(X, theta, is_cat):
    """Anisotropic Gaussian correlation matrix of the rows of X.

    corr(x, x') = exp(-sum_j theta_j * d_j^2) with d_j = |x_j - x_j'| on
    numeric dimensions and d_j = 1{x_j != x_j'} on categorical ones
    (categorical coordinates must already be rounded level indices).
    """
    X = _as_matrix(X)
    theta = np.asarray(theta, dtype=np.float64)
    is_cat = np.asarray(is_cat, dtype=bool)
    n, d = X.shape
    acc = np.zeros((n, n))
    for j in range(d):
        col = X[:, j]
        if is_cat[j]:
            dj2 = (col[:, None] != col[None, :]).astype(np.float64)
        else:
            diff = col[:, None] - col[None, :]
            dj2 = diff * diff
        acc += theta[j] * dj2
    return np.exp(-acc)


def gauss_corr_cross(A, B, theta, is_cat):
    """Cross-correlation matrix between the rows of A and the rows of B."""
    A = _as_matrix(A)
    B = _as_matrix(B)
    theta = np.asarray(theta, dtype=np.float64)
    is_cat = np.asarray(is_cat, dtype=bool)
    acc = np.zeros((A.shape[0], B.shape[0]))
    for j in range(A.shape[1]):
        a, b = A[:, j], B[:, j]
        if is_cat[j]:
            dj2 = (a[:, None] != b[None, :]).astype(np.float64)
        else:
            diff = a[:, None] - b[None, :]
            dj2 = diff * diff
        acc += theta[j] * dj2
    return np.exp(-acc)


def minkowski_cdist(A, B, p):
    """Pairwise Minkowski distance (sum_j |a_j - b_j|^p)^(1/p)."""
    A = _as_matrix(A)
    B = _as_matrix(B)
    p = float(p)
    acc = np.zeros((A.shape[0], B.shape[0]))
    for j in range(A.shape[1]):
        acc += np.abs(A[:, j][:, None] - B[:, j][None, :]) ** p
    return acc ** (1.0 / p)
