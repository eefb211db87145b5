import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from alfalfa_yield.errors import (
    DegenerateVarianceError,
    EmptyInputError,
    LengthMismatchError,
    TooFewSamplesError,
    ZeroTruthError,
)
from alfalfa_yield.stats import compute_metrics, mae, pearson_r, percent_error, r2, t_two_sided_p, ttest_unpaired
from oracles import t_pvalue_oracle


def test_mae_examples():
    assert mae([1, 2, 3], [1, 2, 3]) == 0
    assert mae([1, 2, 3], [1, 2, 2]) == pytest.approx(1 / 3)
    assert mae([0], [5]) == 5
    with pytest.raises(LengthMismatchError):
        mae([1, 2], [1])
    with pytest.raises(EmptyInputError):
        mae([], [])


def test_r_and_r2_examples():
    assert pearson_r([1, 2, 3], [1, 2, 3]) == pytest.approx(1.0)
    assert r2([1, 2, 3], [1, 2, 3]) == 1.0
    assert pearson_r([1, 2, 3], [3, 2, 1]) == pytest.approx(-1.0)
    assert r2([1, 2, 3], [3, 2, 1]) == pytest.approx(-3.0)
    assert pearson_r([1, 2, 3], [1, 2, 2]) == pytest.approx(math.sqrt(3) / 2, abs=1e-4)
    assert r2([1, 2, 3], [1, 2, 2]) == pytest.approx(0.5, abs=1e-4)
    with pytest.raises(DegenerateVarianceError):
        r2([1, 1, 1], [1, 2, 3])
    with pytest.raises(DegenerateVarianceError):
        pearson_r([1, 2, 3], [2, 2, 2])


def test_percent_error_examples():
    assert percent_error([1, 2], [1, 2]) == 0
    assert percent_error([2], [1]) == 50
    assert percent_error([4, 2], [2, 1]) == 50
    with pytest.raises(ZeroTruthError):
        percent_error([0, 1], [0, 1])


def test_metrics_nan_on_constant_truth():
    notes = []
    m = compute_metrics([2.0, 2.0, 2.0], [1.0, 2.0, 3.0], notes)
    assert math.isnan(m.r2) and math.isnan(m.r)
    assert any("r2" in n for n in notes)


def test_ttest_examples():
    res = ttest_unpaired([0.9, 0.92, 0.94], [0.9, 0.92, 0.94])
    assert res.t == 0 and res.p == pytest.approx(1.0)
    res = ttest_unpaired([1, 2, 3], [2, 3, 4])
    assert res.t == pytest.approx(-1.2247, abs=1e-4)
    assert res.df == pytest.approx(4.0)
    assert res.p == pytest.approx(0.2879, abs=1e-4)
    res = ttest_unpaired([5, 5, 5], [5, 5])
    assert res.t == 0 and res.p == 1.0
    with pytest.raises(TooFewSamplesError):
        ttest_unpaired([1], [1, 2])


def test_pooled_variant_matches_student():
    a, b = [1.0, 2.0, 4.0, 7.0], [2.0, 2.5, 3.0]
    res = ttest_unpaired(a, b, equal_var=True)
    assert res.df == 5
    na, nb = 4, 3
    sp2 = (np.var(a, ddof=1) * 3 + np.var(b, ddof=1) * 2) / 5
    assert res.t == pytest.approx((np.mean(a) - np.mean(b)) / math.sqrt(sp2 * (1 / na + 1 / nb)))


@pytest.mark.parametrize("df", [1, 1.5, 2, 3, 4.7, 10, 29, 50, 120, 200])
@pytest.mark.parametrize("t", [0.0, 0.1, 0.7, 1.2247, 2.0, 3.5, 6.0, 10.0])
def test_pvalue_matches_quadrature(t, df):
    assert abs(t_two_sided_p(t, df) - t_pvalue_oracle(t, df)) < 1e-6


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-10, 10), min_size=2, max_size=12), st.lists(st.floats(-10, 10), min_size=2, max_size=12))
def test_ttest_swap_symmetry(a, b):
    x, y = ttest_unpaired(a, b), ttest_unpaired(b, a)
    assert 0 <= x.p <= 1
    if math.isfinite(x.t):
        assert x.t == pytest.approx(-y.t, abs=1e-12)
    assert x.p == pytest.approx(y.p, abs=1e-12)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-100, 100), min_size=3, max_size=20), st.floats(-5, 5), st.floats(0.1, 10))
def test_metric_invariances(y, c, scale):
    y = np.array(y)
    rng = np.random.default_rng(len(y))
    yhat = y + rng.normal(size=len(y))
    assert mae(y, yhat) == pytest.approx(mae(yhat, y))
    assert mae(y + c, yhat + c) == pytest.approx(mae(y, yhat), abs=1e-9)
    if np.ptp(y) > 1e-6:
        assert r2(y, np.full(len(y), y.mean())) == pytest.approx(0.0, abs=1e-12)
        assert pearson_r(y, scale * yhat + c) == pytest.approx(pearson_r(y, yhat), abs=1e-9)
