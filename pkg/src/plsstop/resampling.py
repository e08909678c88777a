"""Bootstrap-pairs and jackknife index generation, BCa intervals.

Every bootstrap replicate draws from its own PCG64 stream keyed by
``SeedSequence([seed, replicate])``, so a replicate's indices do not depend on
which other replicates were drawn or in what order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr, ndtri

from .errors import InvalidArgs

BILATERAL = "bilateral"
LOWER_UNILATERAL = "lower_unilateral"


@dataclass(frozen=True)
class ResamplePlan:
    R: int = 500
    seed: int = 0
    alpha: float = 0.05

    def __post_init__(self):
        if self.R < 50:
            raise InvalidArgs(f"R must be at least 50, got {self.R}")
        if not 0.0 < self.alpha < 0.5:
            raise InvalidArgs(f"alpha must lie in (0, 0.5), got {self.alpha}")
        if not 0 <= int(self.seed) < 2**64:
            raise InvalidArgs("seed must be a 64-bit unsigned integer")


@dataclass(frozen=True)
class BcaInterval:
    lower: float
    upper: float
    z0: float
    a: float
    sided: str = BILATERAL
    degenerate: bool = False
    acceleration_undefined: bool = False


def replicate_rng(seed: int, replicate: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), int(replicate)])))


def bootstrap_indices(n: int, plan: ResamplePlan, replicate: int) -> np.ndarray:
    """Row indices of one bootstrap-pairs replicate."""
    if not 0 <= replicate < plan.R:
        raise InvalidArgs(f"replicate {replicate} outside [0, {plan.R})")
    return replicate_rng(plan.seed, replicate).integers(0, n, size=n)


def bootstrap_index_matrix(n: int, plan: ResamplePlan) -> np.ndarray:
    """All ``plan.R`` replicates stacked as an (R, n) array."""
    return np.stack([bootstrap_indices(n, plan, r) for r in range(plan.R)])


def jackknife_indices(n: int, leave_out: int) -> np.ndarray:
    if not 0 <= leave_out < n:
        raise InvalidArgs(f"leave_out {leave_out} outside [0, {n})")
    return np.delete(np.arange(n), leave_out)


def quantile_type7(sorted_values: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Linear-interpolation quantiles of pre-sorted columns.

    ``sorted_values`` has shape (R, m), ``q`` shape (m,): column j is read at
    level ``q[j]``.
    """
    R = sorted_values.shape[0]
    h = (R - 1) * np.clip(q, 0.0, 1.0)
    lo = np.floor(h).astype(int)
    hi = np.minimum(lo + 1, R - 1)
    frac = h - lo
    cols = np.arange(sorted_values.shape[1])
    a = sorted_values[lo, cols]
    b = sorted_values[hi, cols]
    return a + frac * (b - a)


def _adjusted_level(z0, a, z):
    denom = 1.0 - a * (z0 + z)
    with np.errstate(divide="ignore", invalid="ignore"):
        level = ndtr(z0 + (z0 + z) / denom)
    # a non-positive denominator sends the level to the far tail
    level = np.where(denom > 0, level, np.where(z > 0, 1.0, 0.0))
    return level


def bca_bounds(
    boot: np.ndarray,
    theta_hat: np.ndarray,
    jack: np.ndarray,
    alpha: float,
    sided: str = BILATERAL,
) -> dict:
    """Vectorized BCa intervals for m statistics at once.

    ``boot`` is (R, m), ``theta_hat`` (m,), ``jack`` (n, m). Returns a dict of
    arrays: lower, upper, z0, a, degenerate, acceleration_undefined.
    """
    boot = np.asarray(boot, dtype=float)
    if boot.ndim == 1:
        boot = boot[:, None]
    theta_hat = np.atleast_1d(np.asarray(theta_hat, dtype=float))
    jack = np.asarray(jack, dtype=float)
    if jack.ndim == 1:
        jack = jack[:, None]
    R = boot.shape[0]
    if sided not in (BILATERAL, LOWER_UNILATERAL):
        raise InvalidArgs(f"unknown sidedness {sided!r}")

    prop = np.sum(boot < theta_hat, axis=0) / R
    prop = np.clip(prop, 1.0 / (2 * R), 1.0 - 1.0 / (2 * R))
    z0 = ndtri(prop)

    dev = jack.mean(axis=0) - jack
    ss = np.sum(dev**2, axis=0)
    acc_undefined = ss == 0.0
    with np.errstate(divide="ignore", invalid="ignore"):
        a = np.sum(dev**3, axis=0) / (6.0 * ss**1.5)
    a = np.where(acc_undefined, 0.0, a)

    srt = np.sort(boot, axis=0)
    if sided == BILATERAL:
        lvl_lo = _adjusted_level(z0, a, ndtri(alpha / 2))
        lvl_hi = _adjusted_level(z0, a, ndtri(1 - alpha / 2))
        lower = quantile_type7(srt, lvl_lo)
        upper = quantile_type7(srt, lvl_hi)
    else:
        lvl_lo = _adjusted_level(z0, a, ndtri(alpha))
        lower = quantile_type7(srt, lvl_lo)
        upper = np.full_like(lower, np.inf)

    degenerate = np.all(boot == boot[:1], axis=0)
    lower = np.where(degenerate, theta_hat, lower)
    if sided == BILATERAL:
        upper = np.where(degenerate, theta_hat, upper)
    return {
        "lower": lower,
        "upper": upper,
        "z0": z0,
        "a": a,
        "degenerate": degenerate,
        "acceleration_undefined": acc_undefined,
    }


def bca_interval(
    boot_estimates,
    theta_hat: float,
    jack_estimates,
    alpha: float,
    sided: str = BILATERAL,
) -> BcaInterval:
    """Bias-corrected and accelerated percentile interval for one statistic.

    ``z0`` counts replicates strictly below ``theta_hat``; a count of 0 or R is
    clamped to 1/(2R) or 1 - 1/(2R). The acceleration comes from the jackknife
    estimates. Endpoints are type-7 quantiles of the bootstrap replicates; a
    lower-unilateral interval uses level ``alpha`` and has an infinite upper
    end.
    """
    boot = np.asarray(boot_estimates, dtype=float).ravel()
    if boot.size < 50:
        raise InvalidArgs("need at least 50 bootstrap estimates")
    if not np.all(np.isfinite(boot)):
        raise InvalidArgs("bootstrap estimates must be finite")
    res = bca_bounds(boot[:, None], np.array([theta_hat]), np.asarray(jack_estimates, float)[:, None], alpha, sided)
    return BcaInterval(
        lower=float(res["lower"][0]),
        upper=float(res["upper"][0]),
        z0=float(res["z0"][0]),
        a=float(res["a"][0]),
        sided=sided,
        degenerate=bool(res["degenerate"][0]),
        acceleration_undefined=bool(res["acceleration_undefined"][0]),
    )
