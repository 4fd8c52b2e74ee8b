"""Gaussian-correlation Kriging with an optional nugget.

Hyperparameters (activity rates theta, nugget lambda) are picked by
maximizing the concentrated log-likelihood with differential evolution
over log10-scaled boxes. Numeric inputs are normalized to [0, 1] per
dimension before the kernel sees them; categorical dimensions carry
level indices and enter the kernel through an equality test, so they
are rounded instead of normalized.

Prediction returns the posterior mean and a variance clamped at zero.
`reinterpolate` swaps the variance channel for the nugget-free one so
that uncertainty vanishes at sampled sites while the mean predictor is
left untouched.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np
from scipy.linalg import LinAlgError, cho_solve, cholesky

from ._kernels import gauss_corr_cross, gauss_corr_matrix
from .optim import DEConfig, de_minimize

__all__ = [
    "KrigingConfig",
    "KrigingModel",
    "KrigingFitError",
    "fit",
    "fit_with_params",
    "neg_log_likelihood",
]

# failed Cholesky factorizations during the likelihood search get this score
_PENALTY = 1.0e4
_JITTER_START = 1.0e-12
_JITTER_LIMIT = 1.0e-4
# reject factorizations whose Cholesky diagonal spans more than ~1e6:
# beyond that the likelihood value and the interpolant are numerically
# meaningless, and the MLE would otherwise chase them
_DIAG_RATIO_MIN = 1.0e-6


class KrigingFitError(RuntimeError):
    """Raised when no positive-definite correlation matrix can be built."""


@dataclass(frozen=True)
class KrigingConfig:
    theta_bounds: tuple[float, float] = (1.0e-4, 1.0e2)
    lambda_bounds: tuple[float, float] | None = (1.0e-6, 1.0)
    mle_budget: int | None = None
    seed: int = 0
    bounds: tuple[Sequence[float], Sequence[float]] | None = None
    cat_mask: Sequence[bool] | None = None

    def __post_init__(self) -> None:
        lo, hi = self.theta_bounds
        if not (0.0 < lo <= hi):
            raise ValueError("theta_bounds must satisfy 0 < lower <= upper")
        if self.lambda_bounds is not None:
            llo, lhi = self.lambda_bounds
            if not (0.0 < llo <= lhi):
                raise ValueError("lambda_bounds must satisfy 0 < lower <= upper")
        if self.mle_budget is not None and int(self.mle_budget) < 20:
            raise ValueError("mle_budget must be >= 20")


@dataclass(frozen=True)
class KrigingModel:
    x_scaled: np.ndarray
    y: np.ndarray
    theta: np.ndarray
    lam: float
    mu: float
    sigma2: float
    alpha: np.ndarray
    chol_var: np.ndarray
    sigma2_var: float
    neg_ln_like: float
    lower: np.ndarray
    upper: np.ndarray
    cat_mask: np.ndarray
    reinterpolated: bool = False

    @property
    def n(self) -> int:
        return self.x_scaled.shape[0]

    @property
    def d(self) -> int:
        return self.x_scaled.shape[1]

    def _scale(self, x) -> np.ndarray:
        pts = np.asarray(x, dtype=float)
        single = pts.ndim == 1
        pts = np.atleast_2d(pts)
        if pts.shape[1] != self.d:
            raise ValueError(f"expected points of dimension {self.d}, got {pts.shape[1]}")
        scaled = _scale_inputs(pts, self.lower, self.upper, self.cat_mask)
        return scaled[0] if single else scaled

    def predict_mean(self, x) -> float | np.ndarray:
        """Posterior mean only; cheap enough for inner-loop search."""
        xs = np.atleast_2d(self._scale(x))
        psi = gauss_corr_cross(xs, self.x_scaled, self.theta, self.cat_mask)
        mean = self.mu + psi @ self.alpha
        return float(mean[0]) if np.asarray(x).ndim == 1 else mean

    def predict(self, x) -> tuple[float, float] | tuple[np.ndarray, np.ndarray]:
        """Posterior mean and (non-negative) variance."""
        xs = np.atleast_2d(self._scale(x))
        psi = gauss_corr_cross(xs, self.x_scaled, self.theta, self.cat_mask)
        mean = self.mu + psi @ self.alpha
        w = cho_solve((self.chol_var, True), psi.T)
        var = self.sigma2_var * (1.0 - np.einsum("ij,ji->i", psi, w))
        var = np.maximum(var, 0.0)
        if np.asarray(x).ndim == 1:
            return float(mean[0]), float(var[0])
        return mean, var

    def reinterpolate(self) -> "KrigingModel":
        """Return a model whose variance ignores the nugget.

        The mean predictor is shared with the fitted model, which makes it
        the interpolant of the model's own smoothed predictions at the
        training sites; the replacement variance is zero there.
        """
        psi_pure = gauss_corr_matrix(self.x_scaled, self.theta, self.cat_mask)
        chol_c, jitter = _chol_with_jitter(psi_pure, 0.0)
        cinv_alpha_quad = self.alpha @ (psi_pure + jitter * np.eye(self.n)) @ self.alpha
        sigma2_r = float(cinv_alpha_quad) / self.n
        return replace(
            self,
            chol_var=chol_c,
            sigma2_var=max(sigma2_r, 0.0),
            reinterpolated=True,
        )


def _scale_inputs(pts: np.ndarray, lower: np.ndarray, upper: np.ndarray, cat_mask: np.ndarray) -> np.ndarray:
    width = upper - lower
    width = np.where(width <= 0.0, 1.0, width)
    scaled = (pts - lower) / width
    if cat_mask.any():
        raw_cats = pts[:, cat_mask]
        # level indices need exact float equality inside the kernel
        scaled[:, cat_mask] = np.round(raw_cats)
    return scaled


def _factor(mat: np.ndarray) -> np.ndarray | None:
    """Cholesky factor, or None when it fails or is too ill-conditioned."""
    try:
        chol = cholesky(mat, lower=True)
    except LinAlgError:
        return None
    diag = np.diag(chol)
    if diag.min() <= _DIAG_RATIO_MIN * diag.max():
        return None
    return chol


def _chol_with_jitter(base: np.ndarray, lam: float) -> tuple[np.ndarray, float]:
    n = base.shape[0]
    jitter = 0.0
    while True:
        mat = base.copy()
        mat[np.diag_indices(n)] += lam + jitter
        chol = _factor(mat)
        if chol is not None:
            return chol, jitter
        jitter = _JITTER_START if jitter == 0.0 else jitter * 10.0
        if jitter > _JITTER_LIMIT:
            raise KrigingFitError(
                "correlation matrix is not positive definite even after jitter"
            )


def _likelihood_parts(x_scaled, y, theta, lam, cat_mask):
    """Concentrated likelihood pieces for fixed (theta, lambda).

    Returns (neg_ln_like, mu, sigma2, chol_lower) or None when the
    factorization fails.
    """
    n = x_scaled.shape[0]
    psi = gauss_corr_matrix(x_scaled, theta, cat_mask)
    psi[np.diag_indices(n)] += lam
    chol = _factor(psi)
    if chol is None:
        return None
    ln_det = 2.0 * float(np.sum(np.log(np.abs(np.diag(chol)))))
    ones = np.ones(n)
    rinv_y = cho_solve((chol, True), y)
    rinv_one = cho_solve((chol, True), ones)
    denom = float(ones @ rinv_one)
    if denom == 0.0 or not math.isfinite(denom):
        return None
    mu = float(ones @ rinv_y) / denom
    resid = y - mu
    sigma2 = float(resid @ cho_solve((chol, True), resid)) / n
    sigma2_safe = max(sigma2, 1.0e-30)
    neg_ln_like = 0.5 * n * math.log(sigma2_safe) + 0.5 * ln_det
    if not math.isfinite(neg_ln_like):
        return None
    return neg_ln_like, mu, sigma2, chol


def neg_log_likelihood(x_scaled, y, theta, lam, cat_mask=None) -> float:
    """Concentrated negative log-likelihood, penalized on factorization failure."""
    x_scaled = np.asarray(x_scaled, dtype=float)
    y = np.asarray(y, dtype=float)
    theta = np.asarray(theta, dtype=float)
    if cat_mask is None:
        cat_mask = np.zeros(x_scaled.shape[1], dtype=bool)
    cat_mask = np.asarray(cat_mask, dtype=bool)
    parts = _likelihood_parts(x_scaled, y, theta, float(lam), cat_mask)
    return _PENALTY if parts is None else parts[0]


def _prepare_training(x, y, config: KrigingConfig):
    pts = np.asarray(x, dtype=float)
    targets = np.asarray(y, dtype=float).ravel()
    if pts.ndim != 2:
        raise ValueError("training inputs must form a 2-D array")
    if pts.shape[0] != targets.size:
        raise ValueError("number of inputs and targets must agree")
    if pts.shape[0] < 2:
        raise ValueError("at least two training points are required")
    if not np.isfinite(pts).all() or not np.isfinite(targets).all():
        raise ValueError("training data must be finite")
    if np.unique(pts, axis=0).shape[0] < 2:
        raise ValueError("at least two distinct training points are required")

    d = pts.shape[1]
    if config.cat_mask is None:
        cat_mask = np.zeros(d, dtype=bool)
    else:
        cat_mask = np.asarray(config.cat_mask, dtype=bool).ravel()
        if cat_mask.size != d:
            raise ValueError("cat_mask length must match the input dimension")
    if config.bounds is None:
        lower = pts.min(axis=0)
        upper = pts.max(axis=0)
    else:
        lower = np.asarray(config.bounds[0], dtype=float).ravel()
        upper = np.asarray(config.bounds[1], dtype=float).ravel()
        if lower.size != d or upper.size != d:
            raise ValueError("bounds length must match the input dimension")
    scaled = _scale_inputs(pts, lower, upper, cat_mask)
    return scaled, targets, lower, upper, cat_mask


def _finalize(x_scaled, y, theta, lam, lower, upper, cat_mask) -> KrigingModel:
    n = x_scaled.shape[0]
    psi_pure = gauss_corr_matrix(x_scaled, theta, cat_mask)
    chol, jitter = _chol_with_jitter(psi_pure, lam)
    lam_eff = lam + jitter
    parts = _likelihood_parts(x_scaled, y, theta, lam_eff, cat_mask)
    if parts is None:
        raise KrigingFitError("likelihood evaluation failed for the chosen parameters")
    neg_ln_like, mu, sigma2, chol = parts
    resid = y - mu
    corr = psi_pure.copy()
    corr[np.diag_indices(n)] += lam_eff
    alpha = cho_solve((chol, True), resid)
    # iterative refinement; drives the training-site residual toward
    # machine precision despite the kernel matrix's poor conditioning
    for _ in range(2):
        alpha = alpha + cho_solve((chol, True), resid - corr @ alpha)
    return KrigingModel(
        x_scaled=x_scaled,
        y=y.copy(),
        theta=np.asarray(theta, dtype=float).copy(),
        lam=float(lam_eff),
        mu=mu,
        sigma2=max(sigma2, 0.0),
        alpha=alpha,
        chol_var=chol,
        sigma2_var=max(sigma2, 0.0),
        neg_ln_like=neg_ln_like,
        lower=np.asarray(lower, dtype=float).copy(),
        upper=np.asarray(upper, dtype=float).copy(),
        cat_mask=cat_mask.copy(),
    )


def fit(x, y, config: KrigingConfig | None = None) -> KrigingModel:
    """Fit by maximum likelihood over log10(theta) (and log10(lambda) if noisy)."""
    config = config or KrigingConfig()
    x_scaled, targets, lower, upper, cat_mask = _prepare_training(x, y, config)
    d = x_scaled.shape[1]

    t_lo, t_hi = (math.log10(b) for b in config.theta_bounds)
    box_lower = [t_lo] * d
    box_upper = [t_hi] * d
    noisy = config.lambda_bounds is not None
    if noisy:
        l_lo, l_hi = (math.log10(b) for b in config.lambda_bounds)
        box_lower.append(l_lo)
        box_upper.append(l_hi)

    def objective(v: np.ndarray) -> float:
        theta = 10.0 ** v[:d]
        lam = 10.0 ** v[d] if noisy else 0.0
        return neg_log_likelihood(x_scaled, targets, theta, lam, cat_mask)

    budget = config.mle_budget if config.mle_budget is not None else 500 * (d + 1)
    result = de_minimize(
        objective,
        box_lower,
        box_upper,
        DEConfig(max_evals=int(budget), seed=config.seed),
    )
    theta = 10.0 ** result.x_best[:d]
    lam = float(10.0 ** result.x_best[d]) if noisy else 0.0
    return _finalize(x_scaled, targets, theta, lam, lower, upper, cat_mask)


def fit_with_params(x, y, theta, lam=0.0, *, bounds=None, cat_mask=None) -> KrigingModel:
    """Build a model at fixed (theta, lambda); no likelihood search."""
    config = KrigingConfig(bounds=bounds, cat_mask=cat_mask)
    x_scaled, targets, lower, upper, mask = _prepare_training(x, y, config)
    theta = np.asarray(theta, dtype=float).ravel()
    if theta.size != x_scaled.shape[1]:
        raise ValueError("theta length must match the input dimension")
    if np.any(theta <= 0.0) or float(lam) < 0.0:
        raise ValueError("theta must be positive and lambda non-negative")
    return _finalize(x_scaled, targets, theta, float(lam), lower, upper, mask)
