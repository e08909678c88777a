import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import nipals_pls1, ols_fitted, standardize
from plsstop.errors import DimensionMismatch, InvalidDataset, ZeroVarianceColumn
from plsstop.pls import (
    ComponentPath,
    Dataset,
    center_scale,
    fit,
    fit_pls,
    fit_plsglr,
    gaussian_fitted_path,
    predict,
)


def _gauss(seed, n=40, p=6):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, p))
    y = X @ rng.standard_normal(p) + rng.standard_normal(n)
    return Dataset(X, y)


def test_dataset_validation():
    with pytest.raises(InvalidDataset):
        Dataset(np.ones((1, 2)), [1.0])
    with pytest.raises(InvalidDataset):
        Dataset(np.ones((3, 2)), [1.0, 2.0])
    with pytest.raises(InvalidDataset):
        Dataset(np.ones((3, 2)), [0, 1, 2], "binomial")
    with pytest.raises(InvalidDataset):
        Dataset(np.ones((3, 2)), [0, 1.5, 2], "poisson")
    with pytest.raises(InvalidDataset):
        Dataset(np.array([[1.0, np.nan], [2, 3], [4, 5]]), [1, 2, 3])


def test_center_scale_moments():
    data = _gauss(0)
    std, params = center_scale(data)
    assert np.allclose(std.X.mean(0), 0, atol=1e-14)
    assert np.allclose(std.X.std(0, ddof=1), 1, atol=1e-14)
    assert np.allclose(params.inverse_X(std.X), data.X)
    assert abs(std.y.std(ddof=1) - 1) < 1e-14


def test_constant_column_rejected():
    X = np.column_stack([np.arange(5.0), np.full(5, 3.0)])
    with pytest.raises(ZeroVarianceColumn) as exc:
        fit_pls(Dataset(X, np.arange(5.0)), 1)
    assert exc.value.column == 1


@pytest.mark.parametrize("k", [1, 2, 3, 5])
def test_matches_nipals_oracle(k):
    data = _gauss(1)
    expected, scores = nipals_pls1(data.X, data.y, k)
    model = fit_pls(data, k)
    assert np.allclose(model.fitted(), expected, rtol=1e-10, atol=1e-10)
    assert np.allclose(np.abs(model.T), np.abs(scores), atol=1e-10)


def test_full_rank_equals_ols():
    data = _gauss(2, n=30, p=5)
    model = fit_pls(data, 5)
    assert np.allclose(model.fitted(), ols_fitted(data.X, data.y), rtol=1e-10)


def test_scores_orthogonal():
    model = fit_pls(_gauss(3, p=8), 8)
    G = model.T.T @ model.T
    off = G - np.diag(np.diag(G))
    assert np.max(np.abs(off)) / np.max(np.diag(G)) < 1e-10


def test_predict_reproduces_fitted_and_checks_width():
    data = _gauss(4)
    model = fit_pls(data, 3)
    assert np.allclose(predict(model, data.X), model.fitted())
    with pytest.raises(DimensionMismatch):
        predict(model, data.X[:, :3])


def test_rank_exhaustion_warns_and_truncates():
    rng = np.random.default_rng(5)
    base = rng.standard_normal((30, 2))
    X = np.column_stack([base, base @ [1.0, 2.0], base @ [-1.0, 0.5]])
    y = base[:, 0] + 0.1 * rng.standard_normal(30)
    with pytest.warns(RuntimeWarning):
        model = fit_pls(Dataset(X, y), 4)
    assert model.k == 2
    assert model.rank_exhausted


def test_nested_path_equals_separate_fits():
    data = _gauss(6)
    path = ComponentPath(data)
    for k in (1, 2, 4):
        assert np.allclose(path.model(k).fitted(), fit_pls(data, k).fitted())


def test_fitted_path_matches_models():
    data = _gauss(7)
    std, _ = center_scale(data)
    paths = gaussian_fitted_path(std.X, data.y, 4)
    assert np.allclose(paths[0], data.y.mean())
    for k in range(1, 5):
        assert np.allclose(paths[k], fit_pls(data, k).fitted(), atol=1e-10)


def test_k_zero_is_intercept_only():
    data = _gauss(8)
    assert np.allclose(ComponentPath(data).model(0).fitted(), data.y.mean())


def test_scaling_invariance():
    data = _gauss(9)
    scaled = Dataset(data.X * [1, 10, 100, 0.1, 2, 3] + 7, data.y)
    assert np.allclose(fit_pls(data, 3).fitted(), fit_pls(scaled, 3).fitted())


def test_glr_weights_are_univariate_glm_slopes():
    rng = np.random.default_rng(10)
    X = rng.standard_normal((80, 4))
    y = (X[:, 0] - X[:, 1] + rng.standard_normal(80) > 0).astype(float)
    model = fit_plsglr(Dataset(X, y, "binomial"), 1)
    from oracles import newton_glm

    Xs = standardize(X)
    slopes = np.array([newton_glm(Xs[:, j], y, "binomial")[0][1] for j in range(4)])
    assert np.allclose(model.W[:, 0], slopes / np.linalg.norm(slopes), atol=1e-7)


def test_glr_family_dispatch():
    rng = np.random.default_rng(11)
    X = rng.standard_normal((60, 3))
    y = rng.poisson(np.exp(0.5 * X[:, 0])).astype(float)
    model = fit(Dataset(X, y, "poisson"), 2)
    assert model.family == "poisson"
    assert np.all(model.fitted() > 0)
    with pytest.raises(ValueError):
        fit_pls(Dataset(X, y, "poisson"), 1)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10_000), n=st.integers(6, 40), p=st.integers(1, 12))
def test_orthogonality_property(seed, n, p):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, p))
    y = rng.standard_normal(n)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        model = fit_pls(Dataset(X, y), min(n - 1, p))
    G = model.T.T @ model.T
    scale = np.max(np.diag(G)) if G.size else 1.0
    assert np.max(np.abs(G - np.diag(np.diag(G))), initial=0.0) <= 1e-8 * scale
