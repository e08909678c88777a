import numpy as np
import pytest

from oracles import newton_glm, ols_coef_2x2
from plsstop.errors import SingularDesign
from plsstop.glm import batched_ols, fit_irls, fit_ols, wald_pvalues


def test_ols_simple_regression_oracle():
    rng = np.random.default_rng(0)
    x = rng.standard_normal(25)
    y = 1.5 - 2.0 * x + rng.standard_normal(25)
    fit = fit_ols(x, y)
    a, b = ols_coef_2x2(list(x), list(y))
    assert fit.coef == pytest.approx([a, b], rel=1e-12)


def test_ols_singular_design():
    x = np.arange(6.0)
    with pytest.raises(SingularDesign):
        fit_ols(np.column_stack([x, 2 * x]), x)


@pytest.mark.parametrize("family", ["binomial", "poisson"])
def test_irls_matches_newton(family):
    rng = np.random.default_rng(1)
    X = rng.standard_normal((150, 3))
    eta = 0.3 + X @ [0.8, -0.5, 0.2]
    if family == "binomial":
        y = (rng.random(150) < 1 / (1 + np.exp(-eta))).astype(float)
    else:
        y = rng.poisson(np.exp(eta)).astype(float)
    fit = fit_irls(X, y, family)
    coef, cov = newton_glm(X, y, family)
    assert fit.converged
    assert np.allclose(fit.coef, coef, atol=1e-7)
    assert np.allclose(fit.se, np.sqrt(np.diag(cov)), rtol=1e-5)


def test_deviance_monotone():
    rng = np.random.default_rng(2)
    X = rng.standard_normal((60, 2))
    y = (X[:, 0] + 0.3 * rng.standard_normal(60) > 0).astype(float)
    hist = np.array(fit_irls(X, y, "binomial").deviance_history)
    assert np.all(np.diff(hist) <= 1e-8 * (np.abs(hist[:-1]) + 1))


def test_separation_flagged_not_raised():
    x = np.linspace(-1, 1, 20)
    y = (x > 0).astype(float)
    fit = fit_irls(x, y, "binomial")
    assert fit.separated
    assert np.all(np.isfinite(fit.coef))


def test_wald_pvalues():
    rng = np.random.default_rng(3)
    X = rng.standard_normal((200, 2))
    y = rng.poisson(np.exp(0.2 + 0.6 * X[:, 0])).astype(float)
    p = wald_pvalues(fit_irls(X, y, "poisson"))
    assert p[1] < 1e-6
    assert 0 <= p[2] <= 1


def test_batched_ols_matches_lstsq():
    rng = np.random.default_rng(4)
    A = rng.standard_normal((5, 30, 3))
    Y = rng.standard_normal((5, 30))
    got = batched_ols(A, Y)
    for b in range(5):
        ref = np.linalg.lstsq(A[b], Y[b], rcond=None)[0]
        assert np.allclose(got[b].ravel(), ref)
