"""Stopping criteria for the number of PLS components.

Each ``select_*`` function maps a dataset to a :class:`CriterionResult` whose
trace holds one record per examined component count, starting at k=1 (k=0
rows are added where the criterion scores the intercept-only model).
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import glm
from .errors import FoldTooSmall, InvalidArgs, SingularDesign
from .pls import ComponentPath, Dataset, center_scale, gaussian_fitted_path, predict
from .resampling import (
    BILATERAL,
    LOWER_UNILATERAL,
    ResamplePlan,
    bca_bounds,
    bootstrap_index_matrix,
)

log = logging.getLogger(__name__)

Q2_THRESHOLD = 0.0975
NAIVE_IC_CAP = 7
DEFAULT_KMAX = 20


class FamilyMismatch(InvalidArgs):
    pass


@dataclass
class CriterionResult:
    criterion: str
    K: int
    trace: list = field(default_factory=list)
    k_max: int | None = None
    flags: dict = field(default_factory=dict)


CRITERION_FAMILIES = {
    "q2": ("gaussian",),
    "bicdof": ("gaussian",),
    "bicglob": ("gaussian",),
    "aic": ("gaussian", "binomial", "poisson"),
    "bic": ("gaussian", "binomial", "poisson"),
    "cvmc": ("binomial",),
    "pval": ("binomial", "poisson"),
    "bootyt": ("gaussian", "binomial", "poisson"),
}


def check_family(criterion: str, family: str):
    """Raise FamilyMismatch when ``criterion`` is not defined for ``family``."""
    if criterion not in CRITERION_FAMILIES:
        raise InvalidArgs(f"unknown criterion {criterion!r}")
    _require_family(family, CRITERION_FAMILIES[criterion], criterion)


def _require(data: Dataset, families: tuple, criterion: str):
    _require_family(data.family, families, criterion)


def _require_family(family: str, families: tuple, criterion: str):
    if family not in families:
        if families == ("gaussian",):
            msg = f"criterion {criterion} requires gaussian family"
        else:
            msg = f"criterion {criterion} requires family in {{{', '.join(families)}}}"
        raise FamilyMismatch(msg)


def default_kmax(data: Dataset, kmax: int | None = None) -> int:
    cap = min(data.n - 1, data.p)
    if kmax is None:
        return min(cap, DEFAULT_KMAX)
    if kmax < 0:
        raise InvalidArgs("kmax must be non-negative")
    return min(cap, kmax)


def make_folds(n: int, folds, seed: int = 0) -> list[np.ndarray]:
    """Held-out index sets. ``folds`` is ``"loo"`` or a fold count q.

    q-fold partitions are a seeded permutation cut into r folds of size
    floor(n/q)+1 followed by q-r folds of size floor(n/q).
    """
    if folds == "loo" or folds == n:
        return [np.array([i]) for i in range(n)]
    q = int(folds)
    if not 2 <= q <= n:
        raise InvalidArgs(f"fold count must lie in [2, n], got {q}")
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), q])))
    perm = rng.permutation(n)
    return [np.sort(part) for part in np.array_split(perm, q)]


def _press_path(data: Dataset, kmax: int, folds, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """PRESS_k for k=1..kmax and RSS_k for k=0..kmax (index = k)."""
    fold_sets = make_folds(data.n, folds, seed)
    min_train = data.n - max(len(f) for f in fold_sets)
    if min(min_train - 1, data.p) < kmax:
        raise FoldTooSmall(
            f"smallest training fold has {min_train} rows, cannot support {kmax} components"
        )
    Xs, _ = center_scale(data)
    full = gaussian_fitted_path(Xs.X, data.y, kmax)
    rss = np.sum((data.y - full) ** 2, axis=1)
    press = np.zeros(kmax + 1)
    for held in fold_sets:
        train = np.ones(data.n, dtype=bool)
        train[held] = False
        path = ComponentPath(data.subset(train))
        for k in range(1, kmax + 1):
            pred = predict(path.model(k), data.X[held])
            press[k] += float(np.sum((data.y[held] - pred) ** 2))
    press[0] = np.nan
    return press, rss


def press_rss(data: Dataset, k: int, folds="loo", seed: int = 0) -> tuple[float, float]:
    """Cross-validated PRESS and in-sample RSS of the k-component model."""
    _require(data, ("gaussian",), "press")
    if k < 1:
        raise InvalidArgs("k must be >= 1")
    press, rss = _press_path(data, k, folds, seed)
    return float(press[k]), float(rss[k])


def select_q2(data: Dataset, kmax_search: int | None = None, folds=5, seed: int = 0) -> CriterionResult:
    """Sequential Q2 rule: accept component k while Q2_k >= 0.0975."""
    _require(data, ("gaussian",), "q2")
    kmax = default_kmax(data, kmax_search)
    fold_sets_max = max(len(f) for f in make_folds(data.n, folds, seed))
    kmax = min(kmax, data.n - fold_sets_max - 1)
    if kmax < 1:
        raise FoldTooSmall("training folds too small for a single component")
    press, rss = _press_path(data, kmax, folds, seed)
    name = "q2" if folds != "loo" else "q2loo"
    K, trace = q2_sequential(press, rss)
    return CriterionResult(name, K, trace)


def q2_sequential(press, rss) -> tuple[int, list[dict]]:
    """Apply the Q2 rule to PRESS_k (k>=1) and RSS_k (k>=0) indexed by k.

    Q2_k = 1 - PRESS_k / RSS_{k-1}; components are accepted while
    Q2_k >= 0.0975 and the first rejection stops the search.
    """
    trace = []
    K = 0
    for k in range(1, len(press)):
        q2 = 1.0 - press[k] / rss[k - 1] if rss[k - 1] > 0 else -np.inf
        ok = bool(q2 >= Q2_THRESHOLD)
        trace.append(
            {"k": k, "statistic": q2, "decision": "accept" if ok else "reject",
             "Q2": q2, "PRESS": press[k], "RSS": rss[k] if k < len(rss) else np.nan, "RSS_prev": rss[k - 1]}
        )
        if not ok:
            break
        K = k
    return K, trace


def _dof_path(data: Dataset, kmax: int) -> tuple[np.ndarray, np.ndarray]:
    """Finite-difference degrees of freedom for k = 0..kmax and base fitted paths."""
    Xs, _ = center_scale(data)
    y = data.y
    base = gaussian_fitted_path(Xs.X, y, kmax)
    h = 1e-6 * float(np.std(y, ddof=1))
    if h == 0.0:
        h = 1e-6
    gamma = np.zeros(base.shape[0])
    for i in range(data.n):
        yp = y.copy()
        yp[i] += h
        pert = gaussian_fitted_path(Xs.X, yp, kmax)
        gamma += (pert[:, i] - base[:, i]) / h
    return gamma, base


def dof_estimate(data: Dataset, k: int) -> float:
    """Trace of the Jacobian of y -> fitted values for the k-component fit.

    Centering sits inside the differentiated map, so the intercept's unit of
    freedom is already included.
    """
    _require(data, ("gaussian",), "dof")
    if k < 1:
        raise InvalidArgs("k must be >= 1")
    gamma, _ = _dof_path(data, k)
    return float(gamma[min(k, gamma.shape[0] - 1)])


def first_local_min(values) -> int:
    """Smallest k with v[k] < v[k-1] and v[k] <= v[k+1].

    A sequence that keeps decreasing selects its last index; one that never
    decreases selects 0.
    """
    v = np.asarray(values, dtype=float)
    for k in range(1, v.shape[0]):
        if v[k] < v[k - 1] and (k == v.shape[0] - 1 or v[k] <= v[k + 1]):
            return k
    return 0


def global_min(values) -> int:
    return int(np.argmin(np.asarray(values, dtype=float)))


def _bic_sigma2(data: Dataset, rss: np.ndarray, gamma: np.ndarray, flags: dict) -> float:
    n, p = data.n, data.p
    if n > p + 1:
        try:
            fit = glm.fit_ols(data.X, data.y)
            return fit.deviance / (n - p - 1)
        except SingularDesign:
            flags["ols_reference_singular"] = True
    resid_df = n - gamma[-1]
    if resid_df < 1:
        flags["sigma2_fallback"] = True
        resid_df = 1.0
    return float(rss[-1] / resid_df)


def select_bic_dof(
    data: Dataset, kmax_search: int | None = None, rule: str = "first_local_min"
) -> CriterionResult:
    """BIC with corrected degrees of freedom, RSS/n + log(n) (dof/n) sigma2."""
    _require(data, ("gaussian",), "bicdof")
    if rule not in ("first_local_min", "global_min"):
        raise InvalidArgs(f"unknown rule {rule!r}")
    kmax = default_kmax(data, kmax_search)
    gamma, fitted = _dof_path(data, kmax)
    rss = np.sum((data.y - fitted) ** 2, axis=1)
    gamma[0] = 1.0
    flags: dict = {}
    sigma2 = _bic_sigma2(data, rss, gamma, flags)
    n = data.n
    bic = rss / n + np.log(n) * (gamma / n) * sigma2
    K = first_local_min(bic) if rule == "first_local_min" else global_min(bic)
    trace = [
        {"k": k, "statistic": bic[k], "decision": "selected" if k == K else "",
         "BIC": bic[k], "RSS": rss[k], "dof": gamma[k], "sigma2": sigma2}
        for k in range(kmax + 1)
    ]
    name = "bicdof" if rule == "first_local_min" else "bicglob"
    return CriterionResult(name, K, trace, flags=flags)


def select_bic_glob(data: Dataset, kmax_search: int | None = None) -> CriterionResult:
    return select_bic_dof(data, kmax_search, rule="global_min")


def select_aic_bic_naive(data: Dataset, kmax_search: int | None = None, which: str = "aic") -> CriterionResult:
    """Uncorrected AIC or BIC with k+1 degrees of freedom, searched over k <= 7."""
    if which not in ("aic", "bic"):
        raise InvalidArgs(f"unknown information criterion {which!r}")
    kmax = default_kmax(data, kmax_search if kmax_search is not None else NAIVE_IC_CAP)
    if kmax > NAIVE_IC_CAP:
        warnings.warn(f"kmax_search {kmax} clamped to {NAIVE_IC_CAP}", UserWarning, stacklevel=2)
        kmax = NAIVE_IC_CAP
    path = ComponentPath(data)
    n = data.n
    values = []
    trace = []
    for k in range(kmax + 1):
        model = path.model(k)
        if model.k < k:
            break
        mu = model.fitted()
        ll = glm.loglik(data.y, mu, data.family)
        pen = 2.0 if which == "aic" else np.log(n)
        ic = -2.0 * ll + pen * (k + 1)
        values.append(ic)
        trace.append({"k": k, "statistic": ic, "decision": "", which.upper(): ic, "loglik": ll})
    K = global_min(values)
    trace[K]["decision"] = "selected"
    return CriterionResult(which, K, trace)


def select_cv_missclassed(
    data: Dataset, kmax_search: int | None = None, q: int = 5, seed: int = 0
) -> CriterionResult:
    """q-fold cross-validated count of misclassified held-out responses."""
    _require(data, ("binomial",), "cvmc")
    kmax = default_kmax(data, kmax_search)
    fold_sets = make_folds(data.n, q, seed)
    min_train = data.n - max(len(f) for f in fold_sets)
    kmax = min(kmax, min_train - 1)
    if kmax < 0:
        raise FoldTooSmall("training folds too small")
    counts = np.zeros(kmax + 1, dtype=int)
    nonconv = 0
    for held in fold_sets:
        train = np.ones(data.n, dtype=bool)
        train[held] = False
        path = ComponentPath(data.subset(train))
        for k in range(kmax + 1):
            model = path.model(k)
            prob = predict(model, data.X[held])
            counts[k] += int(np.sum((prob > 0.5) != (data.y[held] == 1)))
        nonconv += path.nonconverged
    K = global_min(counts)
    trace = [
        {"k": k, "statistic": int(counts[k]), "decision": "selected" if k == K else "",
         "missclassed": int(counts[k])}
        for k in range(kmax + 1)
    ]
    return CriterionResult("cvmc", K, trace, flags={"glm_nonconverged": nonconv})


def select_pval(data: Dataset, kmax_search: int | None = None, alpha: float = 0.05) -> CriterionResult:
    """Stop at the first component containing no Wald-significant predictor."""
    _require(data, ("binomial", "poisson"), "pval")
    kmax = default_kmax(data, kmax_search)
    path = ComponentPath(data)
    trace = []
    for k in range(1, kmax + 1):
        built = path.extend(k)
        if built < k:
            # the weight step ran but no component came out of it
            pv = path.step_pvalues[k - 1] if len(path.step_pvalues) >= k else None
            min_p = float(pv.min()) if pv is not None else 1.0
            trace.append({"k": k, "statistic": min_p, "decision": "exhausted", "min_p": min_p})
            break
        min_p = float(path.step_pvalues[k - 1].min())
        sig = min_p < alpha
        trace.append(
            {"k": k, "statistic": min_p, "decision": "significant" if sig else "not_significant",
             "min_p": min_p}
        )
        if not sig:
            break
    K = pval_stop([r["min_p"] for r in trace if r["decision"] != "exhausted"], alpha)
    return CriterionResult("pval", K, trace, flags={"glm_nonconverged": path.nonconverged})


def pval_stop(min_pvalues, alpha: float = 0.05) -> int:
    """Number of leading components whose smallest step p-value is below alpha."""
    K = 0
    for p in min_pvalues:
        if not p < alpha:
            break
        K += 1
    return K


def _ols_last_coef(T: np.ndarray, Y: np.ndarray, idx: np.ndarray) -> np.ndarray:
    """Coefficient of the last column of T in an intercept OLS, per resample.

    ``idx`` is (B, m) row indices; ``Y`` is (n,) or (n, q). Returns (B,) or (B, q).
    """
    Tb = T[idx]
    A = np.concatenate([np.ones(Tb.shape[:2] + (1,)), Tb], axis=2)
    coefs = glm.batched_ols(A, Y[idx])
    return coefs[:, -1]


def _jackknife_idx(n: int) -> np.ndarray:
    return np.array([np.delete(np.arange(n), i) for i in range(n)])


def _glm_last_coef(T: np.ndarray, y: np.ndarray, family: str, idx: np.ndarray) -> np.ndarray:
    out = np.full(idx.shape[0], np.nan)
    for b, rows in enumerate(idx):
        try:
            fit = glm.fit_irls(T[rows], y[rows], family)
        except SingularDesign:
            continue
        out[b] = fit.coef[-1]
    return out


def _xstep(path: ComponentPath, k: int, boot_idx, jack_idx, alpha: float) -> dict:
    T = path.components(k)
    Xs = path.Xs
    n = Xs.shape[0]
    theta = _ols_last_coef(T, Xs, np.arange(n)[None, :])[0]
    boot = _ols_last_coef(T, Xs, boot_idx)
    jack = _ols_last_coef(T, Xs, jack_idx)
    ci = bca_bounds(boot, theta, jack, alpha, BILATERAL)
    excl = (ci["lower"] > 0) | (ci["upper"] < 0)
    return {"significant": int(np.sum(excl)), "ci": ci, "theta": theta}


def _ystep(path: ComponentPath, k: int, boot_idx, jack_idx, alpha: float) -> dict:
    T = path.components(k)
    n = T.shape[0]
    if path.family == "gaussian":
        y = path.ys
        theta = float(_ols_last_coef(T, y, np.arange(n)[None, :])[0])
        boot = _ols_last_coef(T, y, boot_idx)
        jack = _ols_last_coef(T, y, jack_idx)
    else:
        y = path.data.y
        theta = float(glm.fit_irls(T, y, path.family).coef[-1])
        boot = _glm_last_coef(T, y, path.family, boot_idx)
        jack = _glm_last_coef(T, y, path.family, jack_idx)
    dropped = int(np.sum(~np.isfinite(boot)))
    boot = boot[np.isfinite(boot)]
    jack = jack[np.isfinite(jack)]
    ci = bca_bounds(boot, np.array([theta]), jack, alpha, LOWER_UNILATERAL)
    return {"theta": theta, "lower": float(ci["lower"][0]), "z0": float(ci["z0"][0]),
            "a": float(ci["a"][0]), "dropped": dropped}


def select_boot_yt(data: Dataset, plan: ResamplePlan | None = None, kmax: int | None = None) -> CriterionResult:
    """Double bootstrap-pairs criterion.

    The X-step resamples rows of (X, T_k) and keeps adding components while
    some predictor's loading on the newest component has a bilateral BCa
    interval excluding zero; this bounds the search at ``k_max``. The y-step
    resamples rows of (y, T_k), regresses y on the components (OLS, or the
    family GLM) and accepts component k while the lower-unilateral BCa bound
    of its coefficient is positive and k <= k_max.
    """
    plan = plan or ResamplePlan()
    cap = default_kmax(data, kmax if kmax is not None else data.n)
    path = ComponentPath(data)
    boot_idx = bootstrap_index_matrix(data.n, plan)
    jack_idx = _jackknife_idx(data.n)
    trace: list[dict] = []

    k_max = 0
    for k in range(1, cap + 1):
        if path.extend(k) < k:
            break
        xs = _xstep(path, k, boot_idx, jack_idx, plan.alpha)
        trace.append({"k": k, "step": "x", "xstep_significant": xs["significant"]})
        if xs["significant"] == 0:
            break
        k_max = k

    K = 0
    for k in range(1, k_max + 1):
        ys = _ystep(path, k, boot_idx, jack_idx, plan.alpha)
        ok = ys["lower"] > 0
        rec = trace[k - 1]
        rec.update(
            {"step": "xy", "statistic": ys["lower"], "decision": "accept" if ok else "reject",
             "c_k": ys["theta"], "ci_lower": ys["lower"], "z0": ys["z0"], "a": ys["a"],
             "dropped_replicates": ys["dropped"]}
        )
        if not ok:
            break
        K = k
    for rec in trace:
        rec.setdefault("statistic", np.nan)
        rec.setdefault("decision", "")
    return CriterionResult("bootyt", K, trace, k_max=k_max)


@dataclass(frozen=True)
class CriterionSpec:
    """A criterion name plus its options."""

    name: str
    kmax: int | None = None
    q: object = 5
    alpha: float = 0.05
    R: int = 250
    rule: str = "first_local_min"

    @property
    def label(self) -> str:
        if self.name == "q2":
            return "Q2lv1o" if self.q == "loo" else f"Q2K{self.q}"
        return {"bicdof": "BICdof", "bicglob": "BICglob", "aic": "AIC", "bic": "BIC",
                "cvmc": "CV-MClassed", "pval": "p_val", "bootyt": "BootYT"}.get(self.name, self.name)


def run_criterion(spec: CriterionSpec, data: Dataset, seed: int = 0) -> CriterionResult:
    name = spec.name
    if name == "q2":
        return select_q2(data, spec.kmax, spec.q, seed)
    if name == "bicdof":
        return select_bic_dof(data, spec.kmax, "first_local_min")
    if name == "bicglob":
        return select_bic_dof(data, spec.kmax, "global_min")
    if name in ("aic", "bic"):
        return select_aic_bic_naive(data, spec.kmax, name)
    if name == "cvmc":
        return select_cv_missclassed(data, spec.kmax, int(spec.q), seed)
    if name == "pval":
        return select_pval(data, spec.kmax, spec.alpha)
    if name == "bootyt":
        return select_boot_yt(data, ResamplePlan(spec.R, seed, spec.alpha), spec.kmax)
    raise ValueError(f"unknown criterion {name!r}")
