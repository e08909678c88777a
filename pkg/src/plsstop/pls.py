"""PLS and PLS-GLR component construction by deflation.

Components are extracted one at a time from standardized predictors.  For the
gaussian family each weight vector is the (normalized) covariance of the
deflated predictors with the deflated response.  For binomial and poisson
responses each weight is the coefficient of a deflated predictor in a GLM that
also contains the previous components; the response is never deflated.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from . import glm
from .errors import DimensionMismatch, InvalidDataset, SingularDesign, ZeroVarianceColumn

RANK_TOL = 1e-10
# deflated predictor columns below this fraction of their original norm are
# treated as exhausted in the GLR weight step
COLUMN_TOL = 1e-8


@dataclass(frozen=True)
class Dataset:
    X: np.ndarray
    y: np.ndarray
    family: str = "gaussian"
    column_names: tuple | None = None
    check: bool = field(default=True, repr=False, compare=False)

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        y = np.asarray(self.y, dtype=float).ravel()
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        if self.column_names is not None:
            object.__setattr__(self, "column_names", tuple(self.column_names))
        if self.check:
            self.validate()

    def validate(self):
        n, p = self.X.shape
        if n < 2 or p < 1:
            raise InvalidDataset(f"need n >= 2 and p >= 1, got n={n}, p={p}")
        if self.y.shape[0] != n:
            raise InvalidDataset(f"y has {self.y.shape[0]} entries, X has {n} rows")
        if self.family not in glm.FAMILIES:
            raise InvalidDataset(f"unknown family {self.family!r}")
        if not (np.all(np.isfinite(self.X)) and np.all(np.isfinite(self.y))):
            raise InvalidDataset("non-finite values in X or y")
        if self.family == "binomial" and not np.all(np.isin(self.y, (0.0, 1.0))):
            raise InvalidDataset("binomial response must be 0/1")
        if self.family == "poisson" and not (
            np.all(self.y >= 0) and np.all(self.y == np.round(self.y))
        ):
            raise InvalidDataset("poisson response must be non-negative integers")
        if self.column_names is not None and len(self.column_names) != p:
            raise InvalidDataset("column_names length differs from number of columns")

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    def subset(self, rows) -> "Dataset":
        rows = np.asarray(rows)
        return Dataset(self.X[rows], self.y[rows], self.family, self.column_names, self.check)

    def with_y(self, y) -> "Dataset":
        return replace(self, y=np.asarray(y, dtype=float))


@dataclass(frozen=True)
class ScalingParams:
    x_means: np.ndarray
    x_sds: np.ndarray
    y_mean: float = 0.0
    y_sd: float = 1.0

    def transform_X(self, X) -> np.ndarray:
        return (np.asarray(X, dtype=float) - self.x_means) / self.x_sds

    def inverse_X(self, Xs) -> np.ndarray:
        return np.asarray(Xs, dtype=float) * self.x_sds + self.x_means


def center_scale(data: Dataset) -> tuple[Dataset, ScalingParams]:
    """Standardize predictors to mean 0 and sample sd 1 (denominator n-1).

    The response is centered and scaled only for the gaussian family.
    """
    X = data.X
    means = X.mean(axis=0)
    sds = X.std(axis=0, ddof=1)
    scale_ref = np.maximum(np.abs(means), 1.0)
    for j in range(X.shape[1]):
        if not sds[j] > 1e-12 * scale_ref[j]:
            raise ZeroVarianceColumn(j)
    if data.family == "gaussian":
        y_mean = float(data.y.mean())
        y_sd = float(data.y.std(ddof=1))
        if not y_sd > 0:
            y_sd = 1.0
    else:
        y_mean, y_sd = 0.0, 1.0
    params = ScalingParams(means, sds, y_mean, y_sd)
    std = Dataset(
        params.transform_X(X),
        (data.y - y_mean) / y_sd,
        data.family,
        data.column_names,
        check=False,
    )
    return std, params


@dataclass(frozen=True)
class PlsModel:
    """A fitted k-component model.

    ``Wstar``, ``T``, ``P`` and ``c`` live in standardized space; ``beta`` and
    ``intercept`` map raw predictors to the linear predictor (raw response
    scale for gaussian).
    """

    k: int
    W: np.ndarray
    Wstar: np.ndarray
    T: np.ndarray
    P: np.ndarray
    c: np.ndarray
    c0: float
    beta: np.ndarray
    intercept: float
    scaling: ScalingParams
    family: str
    rank_exhausted: bool = False
    requested_k: int = 0
    nonconverged: int = 0
    separated: int = 0
    step_pvalues: tuple = field(default=(), repr=False)

    def linear_predictor(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[None, :]
        if X.shape[1] != self.beta.shape[0]:
            raise DimensionMismatch(
                f"expected {self.beta.shape[0]} columns, got {X.shape[1]}"
            )
        return self.intercept + X @ self.beta

    def fitted(self) -> np.ndarray:
        """In-sample fitted values from the stored components."""
        eta_s = self.c0 + self.T @ self.c
        if self.family == "gaussian":
            return self.scaling.y_mean + self.scaling.y_sd * eta_s
        return glm._mean(np.clip(eta_s, -glm.ETA_CLAMP, glm.ETA_CLAMP), self.family)


def predict(model: PlsModel, Xnew) -> np.ndarray:
    """Predict on raw predictors: response mean, probability or count mean."""
    eta = model.linear_predictor(Xnew)
    if model.family == "gaussian":
        return eta
    return glm._mean(np.clip(eta, -glm.ETA_CLAMP, glm.ETA_CLAMP), model.family)


class ComponentPath:
    """Incrementally built sequence of components for one dataset.

    Construction is nested: the first k components do not depend on how many
    are built afterwards, so models for every k share one path.
    """

    def __init__(self, data: Dataset, scaled: tuple[Dataset, ScalingParams] | None = None):
        self.data = data
        self.family = data.family
        std, self.scaling = scaled if scaled is not None else center_scale(data)
        self.Xs = std.X
        self.ys = std.y
        n, p = self.Xs.shape
        self.max_k = min(n - 1, p)
        self._Xk = self.Xs.copy()
        self._yk = self.ys.copy()
        self._x0_norm = np.linalg.norm(self.Xs)
        self._col_norms = np.linalg.norm(self.Xs, axis=0)
        self.W: list[np.ndarray] = []
        self.T: list[np.ndarray] = []
        self.P: list[np.ndarray] = []
        self.step_pvalues: list[np.ndarray] = []
        self.exhausted = False
        self.nonconverged = 0
        self.separated = 0

    @property
    def built(self) -> int:
        return len(self.T)

    def _gaussian_weight(self) -> np.ndarray | None:
        w = self._Xk.T @ self._yk
        norm = np.linalg.norm(w)
        if norm <= RANK_TOL * max(np.linalg.norm(self.ys), 1e-300) * self._x0_norm:
            return None
        return w / norm

    def _glr_weight(self) -> np.ndarray | None:
        n, p = self._Xk.shape
        w = np.zeros(p)
        pvals = np.ones(p)
        prev = np.column_stack(self.T) if self.T else np.empty((n, 0))
        col_norms = np.linalg.norm(self._Xk, axis=0)
        for j in range(p):
            if col_norms[j] <= COLUMN_TOL * self._col_norms[j]:
                continue
            design = np.column_stack([prev, self._Xk[:, j]])
            try:
                fit = glm.fit_irls(design, self.data.y, self.family)
            except SingularDesign:
                self.nonconverged += 1
                continue
            if fit.separated:
                self.separated += 1
            elif not fit.converged:
                self.nonconverged += 1
                continue
            w[j] = fit.coef[-1]
            pvals[j] = glm.wald_pvalues(fit)[-1]
        norm = np.linalg.norm(w)
        if norm == 0.0:
            return None
        self.step_pvalues.append(pvals)
        return w / norm

    def extend(self, k: int) -> int:
        """Build components until ``k`` exist or extraction stops; return count."""
        k = min(k, self.max_k)
        while self.built < k and not self.exhausted:
            if np.linalg.norm(self._Xk) < RANK_TOL * self._x0_norm:
                self.exhausted = True
                break
            if self.family == "gaussian":
                w = self._gaussian_weight()
            else:
                w = self._glr_weight()
            if w is None:
                self.exhausted = True
                break
            t = self._Xk @ w
            tt = float(t @ t)
            if tt <= (RANK_TOL * self._x0_norm) ** 2:
                if self.family != "gaussian" and len(self.step_pvalues) > self.built:
                    self.step_pvalues.pop()
                self.exhausted = True
                break
            p_load = self._Xk.T @ t / tt
            self._Xk = self._Xk - np.outer(t, p_load)
            if self.family == "gaussian":
                self._yk = self._yk - t * (t @ self._yk) / tt
            self.W.append(w)
            self.T.append(t)
            self.P.append(p_load)
        return self.built

    def components(self, k: int) -> np.ndarray:
        self.extend(k)
        k = min(k, self.built)
        if k == 0:
            return np.empty((self.Xs.shape[0], 0))
        return np.column_stack(self.T[:k])

    def model(self, k: int) -> PlsModel:
        """Model using the first ``k`` components (fewer if extraction stopped)."""
        requested = k
        self.extend(k)
        k = min(k, self.built)
        n, p = self.Xs.shape
        if k == 0:
            W = Wstar = P = np.empty((p, 0))
            T = np.empty((n, 0))
        else:
            W = np.column_stack(self.W[:k])
            P = np.column_stack(self.P[:k])
            T = np.column_stack(self.T[:k])
            Wstar = W @ np.linalg.inv(P.T @ W)
        if self.family == "gaussian":
            tt = np.einsum("ij,ij->j", T, T)
            c = (T.T @ self.ys) / tt if k else np.empty(0)
            c0 = 0.0
        else:
            fit = glm.fit_irls(T, self.data.y, self.family)
            c0, c = float(fit.coef[0]), fit.coef[1:]
        beta_s = Wstar @ c
        sc = self.scaling
        beta = beta_s * sc.y_sd / sc.x_sds
        intercept = sc.y_mean + sc.y_sd * c0 - float(beta @ sc.x_means)
        return PlsModel(
            k=k,
            W=W,
            Wstar=Wstar,
            T=T,
            P=P,
            c=c,
            c0=c0,
            beta=beta,
            intercept=intercept,
            scaling=sc,
            family=self.family,
            rank_exhausted=k < requested,
            requested_k=requested,
            nonconverged=self.nonconverged,
            separated=self.separated,
            step_pvalues=tuple(self.step_pvalues[:k]),
        )


def _check_k(data: Dataset, k: int):
    if k < 1:
        raise ValueError("k must be a positive integer")


def fit_pls(data: Dataset, k: int) -> PlsModel:
    """Fit a k-component gaussian PLS regression.

    Standardization happens inside; passing an already standardized dataset
    is harmless. If the deflated predictors vanish before ``k`` components the
    shorter model is returned with ``rank_exhausted=True``.
    """
    if data.family != "gaussian":
        raise ValueError("fit_pls requires the gaussian family; use fit_plsglr")
    _check_k(data, k)
    model = ComponentPath(data).model(k)
    if model.rank_exhausted:
        warnings.warn(f"rank exhausted after {model.k} components", RuntimeWarning, stacklevel=2)
    return model


def fit_plsglr(data: Dataset, k: int) -> PlsModel:
    """Fit a k-component PLS generalized linear regression."""
    if data.family not in ("binomial", "poisson"):
        raise ValueError("fit_plsglr requires a binomial or poisson family")
    _check_k(data, k)
    model = ComponentPath(data).model(k)
    if model.rank_exhausted:
        warnings.warn(f"rank exhausted after {model.k} components", RuntimeWarning, stacklevel=2)
    return model


def fit(data: Dataset, k: int) -> PlsModel:
    """Dispatch on the dataset family."""
    return fit_pls(data, k) if data.family == "gaussian" else fit_plsglr(data, k)


def gaussian_fitted_path(Xs: np.ndarray, y: np.ndarray, kmax: int) -> np.ndarray:
    """Fitted values of the gaussian pipeline for k = 0..kmax.

    ``Xs`` must already be standardized; ``y`` is raw. Row k of the result
    holds the k-component fitted values on the scale of ``y``. The same
    deflation and stopping rules as :class:`ComponentPath` apply; rows past
    the point of rank exhaustion repeat the last model. Response scaling is
    skipped because the fitted values are equivariant to it.
    """
    n = Xs.shape[0]
    kmax = min(kmax, n - 1, Xs.shape[1])
    y_mean = y.mean()
    yk = y - y_mean
    Xk = Xs.copy()
    x0 = np.linalg.norm(Xs)
    y_norm = max(np.linalg.norm(yk), 1e-300)
    out = np.empty((kmax + 1, n))
    out[0] = y_mean
    fitted = np.full(n, y_mean)
    k = 0
    while k < kmax:
        if np.linalg.norm(Xk) < RANK_TOL * x0:
            break
        w = Xk.T @ yk
        norm = np.linalg.norm(w)
        if norm <= RANK_TOL * y_norm * x0:
            break
        t = Xk @ (w / norm)
        tt = float(t @ t)
        if tt <= (RANK_TOL * x0) ** 2:
            break
        ck = (t @ yk) / tt
        Xk = Xk - np.outer(t, Xk.T @ t / tt)
        yk = yk - ck * t
        fitted = fitted + ck * t
        k += 1
        out[k] = fitted
    out[k + 1 :] = fitted
    return out
