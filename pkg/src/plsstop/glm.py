"""Least squares and IRLS fitting with Wald inference.

Canonical links only: identity (gaussian), logit (binomial), log (poisson).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
from scipy.special import expit, gammaln, ndtr

from .errors import SingularDesign

FAMILIES = ("gaussian", "binomial", "poisson")
ETA_CLAMP = 30.0
RANK_TOL = 1e-10


@dataclass(frozen=True)
class GlmFit:
    coef: np.ndarray
    cov: np.ndarray
    deviance: float
    loglik: float
    iterations: int
    converged: bool
    family: str
    fitted: np.ndarray
    separated: bool = False
    deviance_history: tuple = field(default=(), repr=False)

    @property
    def se(self) -> np.ndarray:
        return np.sqrt(np.clip(np.diag(self.cov), 0.0, None))


def inv_logit(x):
    """Logistic function ``1 / (1 + exp(-x))``.

    Evaluated through :func:`scipy.special.expit`, which branches on the sign
    of ``x`` so neither tail overflows.
    """
    return expit(x)


def _design(X, intercept: bool) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if intercept:
        X = np.column_stack([np.ones(X.shape[0]), X])
    return X


def _qr_solve(A: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Solve min ||A x - b|| by pivoted Householder QR.

    Returns the solution and ``(A^T A)^{-1}``. Raises SingularDesign when a
    pivot falls below ``RANK_TOL`` relative to the largest one.
    """
    Q, R, piv = scipy.linalg.qr(A, mode="economic", pivoting=True)
    d = np.abs(np.diag(R))
    if d.size == 0 or d[0] == 0.0 or np.any(d < RANK_TOL * d[0]):
        raise SingularDesign("design matrix is rank deficient")
    z = scipy.linalg.solve_triangular(R, Q.T @ b)
    x = np.empty_like(z)
    x[piv] = z
    Rinv = scipy.linalg.solve_triangular(R, np.eye(R.shape[0]))
    xtx_inv_p = Rinv @ Rinv.T
    xtx_inv = np.empty_like(xtx_inv_p)
    xtx_inv[np.ix_(piv, piv)] = xtx_inv_p
    return x, xtx_inv


def fit_ols(X, y, intercept: bool = True) -> GlmFit:
    """Ordinary least squares via QR.

    ``cov`` is ``sigma2 * (X^T X)^{-1}`` with ``sigma2 = RSS / (n - q)``.
    The reported log-likelihood is the gaussian one at the ML variance
    ``RSS / n``.
    """
    A = _design(X, intercept)
    y = np.asarray(y, dtype=float)
    n, q = A.shape
    if n != y.shape[0]:
        raise ValueError("X and y have different numbers of rows")
    coef, xtx_inv = _qr_solve(A, y)
    fitted = A @ coef
    rss = float(np.sum((y - fitted) ** 2))
    sigma2 = rss / (n - q) if n > q else np.nan
    return GlmFit(
        coef=coef,
        cov=sigma2 * xtx_inv,
        deviance=rss,
        loglik=gaussian_loglik(rss, n),
        iterations=1,
        converged=True,
        family="gaussian",
        fitted=fitted,
    )


def gaussian_loglik(rss: float, n: int) -> float:
    sigma2 = max(rss / n, np.finfo(float).tiny)
    return -0.5 * n * (np.log(2.0 * np.pi * sigma2) + 1.0)


def _mean(eta: np.ndarray, family: str) -> np.ndarray:
    if family == "binomial":
        return expit(eta)
    return np.exp(eta)


def deviance(y: np.ndarray, mu: np.ndarray, family: str) -> float:
    if family == "binomial":
        with np.errstate(divide="ignore", invalid="ignore"):
            t1 = np.where(y > 0, y * np.log(y / mu), 0.0)
            t0 = np.where(y < 1, (1 - y) * np.log((1 - y) / (1 - mu)), 0.0)
        return float(2.0 * np.sum(t1 + t0))
    if family == "poisson":
        with np.errstate(divide="ignore", invalid="ignore"):
            t = np.where(y > 0, y * np.log(y / mu), 0.0)
        return float(2.0 * np.sum(t - (y - mu)))
    return float(np.sum((y - mu) ** 2))


def loglik(y: np.ndarray, mu: np.ndarray, family: str) -> float:
    """Family log-likelihood at fitted means (gaussian uses ML variance)."""
    if family == "binomial":
        mu = np.clip(mu, 1e-300, 1 - 1e-16)
        return float(np.sum(y * np.log(mu) + (1 - y) * np.log1p(-mu)))
    if family == "poisson":
        return float(np.sum(y * np.log(np.maximum(mu, 1e-300)) - mu - gammaln(y + 1)))
    return gaussian_loglik(float(np.sum((y - mu) ** 2)), y.shape[0])


def fit_irls(
    X,
    y,
    family: str,
    max_iter: int = 50,
    tol: float = 1e-8,
    intercept: bool = True,
) -> GlmFit:
    """Fit a binomial or poisson GLM by iteratively reweighted least squares.

    The linear predictor is clamped to [-30, 30] on every iteration. A step
    that would increase the deviance is halved (up to 30 times), so the
    deviance sequence is non-increasing. Non-convergence is reported through
    ``converged=False``, never raised.
    """
    if family == "gaussian":
        return fit_ols(X, y, intercept=intercept)
    if family not in FAMILIES:
        raise ValueError(f"unknown family {family!r}")
    A = _design(X, intercept)
    y = np.asarray(y, dtype=float)
    n, q = A.shape
    _qr_solve(A, np.zeros(n))  # rank check on the unweighted design

    if family == "binomial":
        mu = (y + 0.5) / 2.0
        eta = np.log(mu / (1 - mu))
    else:
        mu = y + 0.1
        eta = np.log(mu)
    coef = None
    dev = deviance(y, mu, family)
    history = []
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        w = mu * (1 - mu) if family == "binomial" else mu
        w = np.maximum(w, 1e-300)
        z = eta + (y - mu) / w
        sw = np.sqrt(w)
        try:
            new_coef, _ = _qr_solve(A * sw[:, None], z * sw)
        except SingularDesign:
            new_coef = np.linalg.lstsq(A * sw[:, None], z * sw, rcond=None)[0]
        step_coef = new_coef
        for _ in range(31):
            new_eta = np.clip(A @ step_coef, -ETA_CLAMP, ETA_CLAMP)
            new_mu = _mean(new_eta, family)
            new_dev = deviance(y, new_mu, family)
            if coef is None or new_dev <= dev + 1e-10 * (abs(dev) + 1.0):
                break
            step_coef = 0.5 * (step_coef + coef)
        else:
            # step halving failed; keep the previous iterate
            new_eta, new_mu, new_dev, step_coef = eta, mu, dev, coef
        coef, eta, mu = step_coef, new_eta, new_mu
        change = abs(new_dev - dev) / (abs(new_dev) + 0.1)
        dev = new_dev
        history.append(dev)
        if change < tol:
            converged = True
            break

    w = mu * (1 - mu) if family == "binomial" else mu
    info = A.T @ (A * w[:, None])
    try:
        cov = np.linalg.inv(info)
    except np.linalg.LinAlgError:
        cov = np.linalg.pinv(info)
    cov = 0.5 * (cov + cov.T)
    separated = family == "binomial" and bool(np.any(np.abs(eta) >= ETA_CLAMP - 1e-9))
    return GlmFit(
        coef=coef,
        cov=cov,
        deviance=dev,
        loglik=loglik(y, mu, family),
        iterations=it,
        converged=converged,
        family=family,
        fitted=mu,
        separated=separated,
        deviance_history=tuple(history),
    )


def fit_glm(X, y, family: str, intercept: bool = True) -> GlmFit:
    if family == "gaussian":
        return fit_ols(X, y, intercept=intercept)
    return fit_irls(X, y, family, intercept=intercept)


def wald_pvalues(fit: GlmFit) -> np.ndarray:
    """Two-sided normal-reference Wald p-values, one per coefficient.

    A zero standard error gives ``p = 0`` for a nonzero coefficient and
    ``p = 1`` otherwise.
    """
    coef = np.asarray(fit.coef, dtype=float)
    se = fit.se
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.abs(coef) / se
    p = 2.0 * ndtr(-z)
    zero_se = se == 0.0
    p[zero_se] = np.where(coef[zero_se] != 0.0, 0.0, 1.0)
    p[np.isnan(p)] = 1.0
    return np.clip(p, 0.0, 1.0)


def batched_ols(A: np.ndarray, Y: np.ndarray) -> np.ndarray:
    """Least squares for a stack of problems.

    ``A`` has shape (B, n, q) and ``Y`` shape (B, n) or (B, n, m). Uses a
    batched QR; stacks whose triangular factor is numerically singular fall
    back to a minimum-norm solve.
    """
    vec = Y.ndim == 2
    if vec:
        Y = Y[..., None]
    Q, R = np.linalg.qr(A)
    QtY = np.swapaxes(Q, 1, 2) @ Y
    d = np.abs(np.diagonal(R, axis1=1, axis2=2))
    bad = np.any(d < RANK_TOL * np.maximum(d.max(axis=1, keepdims=True), 1e-300), axis=1)
    out = np.empty((A.shape[0], A.shape[2], Y.shape[2]))
    good = ~bad
    if np.any(good):
        out[good] = np.linalg.solve(R[good], QtY[good])
    for b in np.flatnonzero(bad):
        out[b] = np.linalg.lstsq(A[b], Y[b], rcond=None)[0]
    return out[..., 0] if vec else out
