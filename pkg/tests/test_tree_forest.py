import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from alfalfa_yield.errors import EmptyTrainingSetError, UnfittedError, WrongDimensionError
from alfalfa_yield.models import DecisionTreeRegressor, RandomForestRegressor
from oracles import tree_oracle, trees_equal


def test_step_function_split():
    X = np.array([[1.0], [2.0], [3.0], [4.0]])
    y = np.array([0.0, 0.0, 10.0, 10.0])
    t = DecisionTreeRegressor(max_depth=2).fit(X, y)
    assert t.to_nested() == ("split", 0, 2.5, ("leaf", 0.0), ("leaf", 10.0))
    assert np.all(t.predict(X) == y)


def test_constant_target_single_leaf():
    X = np.random.default_rng(0).normal(size=(10, 5))
    t = DecisionTreeRegressor(max_depth=10).fit(X, np.full(10, 1.7))
    assert t.node_count == 1
    assert t.predict(np.zeros(5)) == 1.7


def test_depth_zero_is_median():
    y = np.array([3.0, 1.0, 10.0, 2.0])
    t = DecisionTreeRegressor(max_depth=0).fit(np.arange(4.0)[:, None], y)
    assert t.to_nested() == ("leaf", 2.5)


def test_tie_break_prefers_lowest_feature():
    # both features give the same partition
    X = np.array([[0.0, 5.0], [1.0, 6.0], [2.0, 7.0], [3.0, 8.0]])
    y = np.array([0.0, 0.0, 1.0, 1.0])
    t = DecisionTreeRegressor(max_depth=1).fit(X, y)
    assert t.to_nested()[1] == 0


def test_errors():
    with pytest.raises(EmptyTrainingSetError):
        DecisionTreeRegressor().fit(np.empty((0, 5)), np.empty(0))
    with pytest.raises(UnfittedError):
        DecisionTreeRegressor().predict(np.zeros(5))
    t = DecisionTreeRegressor().fit(np.eye(5), np.arange(5.0))
    with pytest.raises(WrongDimensionError):
        t.predict(np.zeros(4))


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10_000), st.integers(2, 30), st.integers(0, 6), st.booleans())
def test_matches_exhaustive_oracle(seed, n, depth, integer):
    rng = np.random.default_rng(seed)
    if integer:
        X = rng.integers(0, 4, size=(n, 5)).astype(float)
        y = rng.integers(0, 5, size=n).astype(float)
    else:
        X = rng.normal(size=(n, 5))
        y = rng.normal(size=n)
    t = DecisionTreeRegressor(max_depth=depth).fit(X, y)
    assert trees_equal(t.to_nested(), tree_oracle(X, y, depth))


def test_training_mae_non_increasing_in_depth():
    rng = np.random.default_rng(3)
    X = rng.normal(size=(80, 5))
    y = np.sin(X[:, 0]) + X[:, 1] ** 2 + 0.1 * rng.normal(size=80)
    errs = [np.mean(np.abs(DecisionTreeRegressor(max_depth=d).fit(X, y).predict(X) - y)) for d in range(8)]
    assert all(b <= a + 1e-12 for a, b in zip(errs, errs[1:]))


def test_row_order_does_not_matter():
    rng = np.random.default_rng(4)
    X = rng.normal(size=(50, 5))
    y = rng.normal(size=50)
    p = rng.permutation(50)
    a = DecisionTreeRegressor(max_depth=6).fit(X, y)
    b = DecisionTreeRegressor(max_depth=6).fit(X[p], y[p])
    Q = rng.normal(size=(20, 5))
    assert np.array_equal(a.predict(Q), b.predict(Q))


def test_forest_single_tree_without_bootstrap_equals_tree():
    rng = np.random.default_rng(5)
    X = rng.normal(size=(40, 5))
    y = rng.normal(size=40)
    f = RandomForestRegressor(n_estimators=1, max_depth=4, bootstrap=False).fit(X, y)
    t = DecisionTreeRegressor(max_depth=4).fit(X, y)
    Q = rng.normal(size=(15, 5))
    assert np.array_equal(f.predict(Q), t.predict(Q))


def test_forest_is_mean_of_trees_and_seeded():
    rng = np.random.default_rng(6)
    X = rng.normal(size=(60, 5))
    y = X[:, 0] + rng.normal(size=60)
    f = RandomForestRegressor(n_estimators=7, max_depth=5, random_state=9).fit(X, y)
    Q = rng.normal(size=(10, 5))
    manual = np.mean([t.predict(Q) for t in f.estimators_], axis=0)
    assert np.allclose(f.predict(Q), manual, rtol=0, atol=1e-12)
    g = RandomForestRegressor(n_estimators=7, max_depth=5, random_state=9).fit(X, y)
    assert np.array_equal(f.predict(Q), g.predict(Q))


def test_forest_step_function_bound():
    X = np.array([[1.0], [2.0], [3.0], [4.0]])
    y = np.array([0.0, 0.0, 10.0, 10.0])
    f = RandomForestRegressor(n_estimators=100, max_depth=5, random_state=0).fit(X, y)
    assert np.mean(np.abs(f.predict(X) - y)) < 2.5
