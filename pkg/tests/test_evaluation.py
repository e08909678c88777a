import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import balanced_partitions, welch_oracle
from plsstop.criteria import CriterionSpec
from plsstop.errors import DegenerateVariances, InvalidArgs, ZeroDenominator
from plsstop.evaluation import (
    VERDICTS,
    missclassed_count,
    nmse,
    partition_count,
    robustness_distribution,
    summarize_grid,
    welch_t_test,
)
from plsstop.pls import Dataset


def test_nmse_values():
    y = np.array([1.0, 2.0, 3.0, 6.0])
    assert nmse(y, y, 3.0) == 0.0
    assert nmse(y, np.full(4, 3.0), 3.0) == 1.0
    with pytest.raises(ZeroDenominator):
        nmse(np.full(3, 2.0), np.zeros(3), 2.0)


def test_missclassed_threshold_is_strict():
    assert missclassed_count([1, 0, 1, 0], [0.5, 0.5, 0.9, 0.2]) == 1


@pytest.mark.parametrize("seed", range(6))
def test_welch_matches_oracle(seed):
    rng = np.random.default_rng(seed)
    a = rng.normal(0, 1, 12)
    b = rng.normal(0.5, 3, 20)
    res = welch_t_test(a, b)
    t, df, p = welch_oracle(a, b)
    assert res.t == pytest.approx(t, abs=1e-10)
    assert res.df == pytest.approx(df, abs=1e-10)
    assert res.p == pytest.approx(p, abs=1e-8)


def test_welch_degenerate():
    with pytest.raises(DegenerateVariances):
        welch_t_test([1.0, 1.0], [2.0, 2.0])


def test_partition_count_small_cases():
    assert partition_count(5, 2) == 10
    assert partition_count(4, 2) == 3
    assert partition_count(6, 3) == 15
    assert partition_count(9, 1) == 1
    with pytest.raises(InvalidArgs):
        partition_count(3, 4)


@given(n=st.integers(1, 8), data=st.data())
def test_partition_count_matches_enumeration(n, data):
    q = data.draw(st.integers(1, n))
    assert partition_count(n, q) == balanced_partitions(n, q)


def test_partition_count_large_is_exact():
    assert partition_count(200, 200) == 1
    assert partition_count(200, 1) == 1
    assert partition_count(200, 100) == math.factorial(200) // (math.factorial(100) * 2**100)


def _rows(values_a, values_b, couple=(0.01, 0.01)):
    rows = []
    for i, (va, vb) in enumerate(zip(values_a, values_b)):
        rows.append({"couple_sigma4": couple[0], "couple_sigma5": couple[1], "replicate": i,
                     "criterion": "A", "K": 3, "nmse_train": va, "nmse_test": va})
        rows.append({"couple_sigma4": couple[0], "couple_sigma5": couple[1], "replicate": i,
                     "criterion": "B", "K": 2, "nmse_train": vb, "nmse_test": vb})
    return rows


def test_summarize_verdicts():
    rng = np.random.default_rng(0)
    better = summarize_grid(_rows(rng.normal(0.1, 0.01, 20), rng.normal(0.5, 0.01, 20)))
    assert better.comparisons[0]["verdict"] == "A_better"
    same = summarize_grid(_rows(rng.normal(0.3, 0.1, 20), rng.normal(0.3, 0.1, 20)))
    assert same.comparisons[0]["verdict"] in VERDICTS
    short = summarize_grid(_rows([0.1], [0.2]))
    assert short.comparisons[0]["verdict"] == "insufficient"
    assert short.flagged
    stats = {s["criterion"]: s for s in better.stats}
    assert stats["A"]["mean_K"] == 3 and stats["A"]["var_K"] == 0


def test_robustness_jackknife_counts():
    rng = np.random.default_rng(1)
    X = rng.standard_normal((30, 5))
    y = X[:, 0] + 0.5 * rng.standard_normal(30)
    res = robustness_distribution(Dataset(X, y), CriterionSpec("bicdof"), mode="jackknife")
    assert res.total + res.errors == 30
    again = robustness_distribution(Dataset(X, y), CriterionSpec("bicdof"), mode="bootstrap", B=10, seed=4)
    same = robustness_distribution(Dataset(X, y), CriterionSpec("bicdof"), mode="bootstrap", B=10, seed=4)
    assert again.selections == same.selections
    assert again.mode_k in again.counts
