"""Prediction metrics, Welch t-tests, grid summaries and resampling robustness."""

from __future__ import annotations

import math
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np
from scipy.special import betainc

from .errors import DegenerateVariances, InvalidArgs, PlsStopError, ZeroDenominator

VERDICTS = ("A_better", "B_better", "no_difference", "insufficient")


@dataclass(frozen=True)
class TTestResult:
    t: float
    df: float
    p: float
    mean_a: float
    mean_b: float
    var_a: float
    var_b: float
    n_a: int
    n_b: int


def nmse(y_true, y_pred, y_train_mean: float) -> float:
    """Squared error normalized by that of the constant training-mean model."""
    y_true = np.asarray(y_true, dtype=float)
    y_pred = np.asarray(y_pred, dtype=float)
    if y_true.shape != y_pred.shape or y_true.size == 0:
        raise InvalidArgs("y_true and y_pred need equal, non-zero lengths")
    denom = float(np.sum((y_true - y_train_mean) ** 2))
    if denom == 0.0:
        raise ZeroDenominator("y_true is constant and equal to the training mean")
    return float(np.sum((y_true - y_pred) ** 2)) / denom


def missclassed_count(y_true, p_pred) -> int:
    """Number of rows whose 0.5-thresholded probability disagrees with y."""
    y_true = np.asarray(y_true)
    p_pred = np.asarray(p_pred, dtype=float)
    if y_true.shape != p_pred.shape:
        raise InvalidArgs("length mismatch")
    return int(np.sum((p_pred > 0.5).astype(int) != y_true.astype(int)))


def t_sf(t: float, df: float) -> float:
    """Upper tail of Student's t for real-valued df, via the incomplete beta."""
    x = df / (df + t * t)
    tail = 0.5 * betainc(0.5 * df, 0.5, x)
    return float(tail if t >= 0 else 1.0 - tail)


def welch_t_test(a, b) -> TTestResult:
    """Two-sided Welch t-test with Satterthwaite degrees of freedom."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.size < 2 or b.size < 2:
        raise InvalidArgs("each sample needs at least two values")
    ma, mb = float(a.mean()), float(b.mean())
    va, vb = float(a.var(ddof=1)), float(b.var(ddof=1))
    na, nb = a.size, b.size
    if va == 0.0 and vb == 0.0:
        raise DegenerateVariances("both samples have zero variance")
    sa, sb = va / na, vb / nb
    se2 = sa + sb
    t = (ma - mb) / math.sqrt(se2)
    df = se2**2 / (sa**2 / (na - 1) + sb**2 / (nb - 1))
    p = min(1.0, 2.0 * t_sf(abs(t), df))
    return TTestResult(t, df, p, ma, mb, va, vb, na, nb)


def partition_count(n: int, q: int) -> int:
    """Number of distinct ways to split n items into q cross-validation folds.

    With n = m q + r, the folds are r blocks of m+1 items and q-r blocks of m
    items, unordered within each size class. Exact integer arithmetic.
    """
    if not (isinstance(n, (int, np.integer)) and isinstance(q, (int, np.integer))):
        raise InvalidArgs("n and q must be integers")
    if not 1 <= q <= n:
        raise InvalidArgs(f"need 1 <= q <= n, got n={n}, q={q}")
    m, r = divmod(int(n), int(q))
    num = math.factorial(n)
    den = (
        math.factorial(r)
        * math.factorial(q - r)
        * math.factorial(m + 1) ** r
        * math.factorial(m) ** (q - r)
    )
    count, rem = divmod(num, den)
    assert rem == 0
    return count


@dataclass
class RobustnessResult:
    counts: dict
    mode_k: int | None
    mean_k: float
    errors: int = 0
    selections: list = field(default_factory=list)

    @property
    def total(self) -> int:
        return sum(self.counts.values())


def robustness_distribution(data, spec, mode: str = "bootstrap", B: int = 100, seed: int = 0) -> RobustnessResult:
    """Distribution of the selected K over bootstrap or jackknife resamples.

    ``spec`` is a :class:`plsstop.criteria.CriterionSpec`. Bootstrap resample b
    draws rows from ``SeedSequence([seed, b])`` and runs the criterion with a
    seed derived from the same key; jackknife resample i drops row i.
    """
    from .criteria import run_criterion

    if data.n < 3:
        raise InvalidArgs("need at least 3 rows")
    if mode == "bootstrap":
        if B < 1:
            raise InvalidArgs("B must be >= 1")
        keys = range(B)
    elif mode == "jackknife":
        keys = range(data.n)
    else:
        raise InvalidArgs(f"unknown mode {mode!r}")

    selections = []
    errors = 0
    for key in keys:
        ss = np.random.SeedSequence([int(seed), int(key)])
        if mode == "bootstrap":
            rows = np.random.Generator(np.random.PCG64(ss)).integers(0, data.n, size=data.n)
        else:
            rows = np.delete(np.arange(data.n), key)
        crit_seed = int(ss.generate_state(1)[0])
        try:
            selections.append(run_criterion(spec, data.subset(rows), crit_seed).K)
        except (PlsStopError, ValueError, np.linalg.LinAlgError):
            errors += 1
    counts = dict(sorted(Counter(selections).items()))
    mode_k = max(counts, key=lambda k: (counts[k], -k)) if counts else None
    mean_k = float(np.mean(selections)) if selections else float("nan")
    return RobustnessResult(counts, mode_k, mean_k, errors, selections)


def _verdict(a, b, alpha: float) -> tuple[str, float, float]:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    a = a[np.isfinite(a)]
    b = b[np.isfinite(b)]
    if a.size < 2 or b.size < 2:
        return "insufficient", float("nan"), float("nan")
    try:
        res = welch_t_test(a, b)
    except DegenerateVariances:
        ma, mb = float(a.mean()), float(b.mean())
        if ma == mb:
            return "no_difference", 0.0, 1.0
        return ("A_better" if ma < mb else "B_better"), float("inf") * np.sign(ma - mb), 0.0
    if res.p < alpha:
        return ("A_better" if res.mean_a < res.mean_b else "B_better"), res.t, res.p
    return "no_difference", res.t, res.p


@dataclass
class GridSummary:
    """Per-couple statistics of a grid table, in long format.

    ``stats`` rows carry (couple, criterion, count, mean/variance of K and
    metric means); ``comparisons`` rows carry one pairwise verdict per couple,
    criterion pair and metric. Lower metric values are better.
    """

    stats: list
    comparisons: list
    flagged: list = field(default_factory=list)


def _finite(values) -> np.ndarray:
    arr = np.array([v for v in values if v is not None and v != ""], dtype=float)
    return arr[np.isfinite(arr)]


def _mean_var(arr: np.ndarray) -> tuple[float, float]:
    if arr.size == 0:
        return float("nan"), float("nan")
    var = float(arr.var(ddof=1)) if arr.size > 1 else 0.0
    return float(arr.mean()), var


def summarize_grid(table, alpha: float = 0.05) -> GridSummary:
    """Row means and variances per (couple, criterion) plus pairwise Welch verdicts.

    NMSE comparisons use ``nmse_test`` when present and ``nmse_train``
    otherwise; binomial tables also compare ``missclassed_test``. Couples with
    fewer than two replicates get the verdict ``insufficient``.
    """
    table = list(table)
    if not table:
        raise InvalidArgs("empty grid table")
    groups: dict = defaultdict(lambda: defaultdict(list))
    order: list = []
    for row in table:
        couple = (float(row["couple_sigma4"]), float(row["couple_sigma5"]))
        if couple not in groups:
            order.append(couple)
        groups[couple][row["criterion"]].append(row)

    stats, comparisons, flagged = [], [], []
    for couple in order:
        by_crit = groups[couple]
        metrics = {}
        for name, rows in by_crit.items():
            ks = _finite(r.get("K") for r in rows)
            mean_k, var_k = _mean_var(ks)
            rec = {"couple_sigma4": couple[0], "couple_sigma5": couple[1], "criterion": name,
                   "n": int(ks.size), "mean_K": mean_k, "var_K": var_k}
            metrics[name] = {}
            for col in ("nmse_train", "nmse_test", "missclassed_test"):
                vals = _finite(r.get(col) for r in rows)
                metrics[name][col] = vals
                rec[f"mean_{col}"] = float(vals.mean()) if vals.size else float("nan")
            stats.append(rec)
            if ks.size < 2:
                flagged.append((couple, name))
        for name_a, name_b in combinations(list(by_crit), 2):
            for metric in ("nmse", "missclassed_test"):
                if metric == "nmse":
                    col = "nmse_test" if metrics[name_a]["nmse_test"].size else "nmse_train"
                else:
                    col = metric
                    if not (metrics[name_a][col].size or metrics[name_b][col].size):
                        continue
                verdict, t, p = _verdict(metrics[name_a][col], metrics[name_b][col], alpha)
                comparisons.append(
                    {"couple_sigma4": couple[0], "couple_sigma5": couple[1],
                     "criterion_a": name_a, "criterion_b": name_b, "metric": col,
                     "t": t, "p": p, "verdict": verdict}
                )
    return GridSummary(stats, comparisons, flagged)
