from datetime import datetime

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from iot_energy.ingest import UnivariateSeries
from iot_energy.preprocess import (
    ScalerParams,
    fit_scaler,
    inverse_transform,
    make_windows,
    prepare,
    split_train_test,
    train_size,
    transform,
)


@pytest.mark.parametrize("values, lo, hi", [([2, 4, 6], 2, 6), ([5], 5, 5), ([-1, 0, 1], -1, 1)])
def test_fit_scaler(values, lo, hi):
    p = fit_scaler(values)
    assert (p.min_value, p.max_value) == (lo, hi)


def test_fit_scaler_empty():
    with pytest.raises(ValueError):
        fit_scaler([])


def test_transform_examples():
    p = ScalerParams(2, 6)
    assert transform(p, 4) == 0.5
    assert transform(p, 2) == 0.0 and transform(p, 6) == 1.0
    assert inverse_transform(p, 0.5) == 4.0
    assert transform(ScalerParams(5, 5), 5) == 0.0
    np.testing.assert_array_equal(transform(ScalerParams(5, 5), [1, 5, 9]), [0, 0, 0])


def test_transform_out_of_range_not_clamped():
    assert transform(ScalerParams(0, 2), 3) == 1.5
    assert transform(ScalerParams(0, 2), -2) == -1.0


@settings(max_examples=200)
@given(st.lists(st.floats(-1e6, 1e6), min_size=2, max_size=30))
def test_transform_monotone_and_roundtrip(values):
    p = fit_scaler(values)
    x = np.sort(np.asarray(values))
    y = p.transform(x)
    assert np.all(np.diff(y) >= 0)
    if p.span > 0:
        assert y.min() == 0.0 and y.max() == 1.0
        # affine roundtrip error is a few ulps of the range magnitude
        scale = max(1.0, abs(p.min_value), abs(p.max_value))
        err = np.abs(p.inverse_transform(y) - x)
        assert np.all(err <= 4 * np.finfo(float).eps * scale)


def test_make_windows_enumeration(make_series):
    a, b, c, d, e = 1.0, 2.0, 3.0, 4.0, 5.0
    w = make_windows(make_series([a, b, c, d, e]), 2)
    np.testing.assert_array_equal(w.inputs, [[a, b], [b, c], [c, d]])
    np.testing.assert_array_equal(w.targets, [c, d, e])
    assert w.origin_timestamps[0] == np.datetime64("2007-01-01T00:02:00")


def test_make_windows_long_lookback_count(make_series):
    w = make_windows(make_series(np.zeros(260_640)), 100)
    assert len(w) == 260_540 and w.inputs.shape == (260_540, 100)


def test_make_windows_insufficient(make_series):
    with pytest.raises(ValueError, match="insufficient data"):
        make_windows(make_series(np.arange(30.0)), 30)


@settings(max_examples=50)
@given(st.lists(st.floats(-10, 10), min_size=2, max_size=60), st.data())
def test_windows_reconstruct_series(values, data):
    lookback = data.draw(st.integers(1, len(values) - 1))
    w = make_windows(UnivariateSeries(datetime(2007, 1, 1), 60, values), lookback)
    rebuilt = np.concatenate([w.inputs[:, 0], w.inputs[-1, 1:], w.targets[-1:]])
    np.testing.assert_array_equal(rebuilt, values)


@pytest.mark.parametrize("n, train", [(10, 8), (5, 4)])
def test_split_counts(make_series, n, train):
    w = make_windows(make_series(np.arange(n + 1.0)), 1)
    tr, te = split_train_test(w, 0.8)
    assert (len(tr), len(te)) == (train, n - train)
    assert tr.origin_timestamps[-1] < te.origin_timestamps[0]


def test_split_half_year_minute_counts():
    n = 260_540
    n_train = sum(1 for k in range(n) if k < 0.8 * n)  # independent counter
    assert n_train == 208_432
    assert train_size(n, 0.8) == 208_432 and n - train_size(n, 0.8) == 52_108


def test_split_errors(make_series):
    w = make_windows(make_series([1.0, 2.0, 3.0]), 1)
    with pytest.raises(ValueError):
        split_train_test(w, 0.0)
    with pytest.raises(ValueError, match="empty"):
        split_train_test(w, 0.4)


def test_prepare_scaler_scope(make_series):
    values = np.r_[np.linspace(0, 1, 80), np.full(20, 5.0)]
    s = make_series(values)
    train_fit = prepare(s, 5, fit_on="train")
    assert train_fit.scaler.max_value == 1.0
    assert train_fit.test.targets.max() == 5.0  # test extrapolates, not clamped
    all_fit = prepare(s, 5, fit_on="all")
    assert all_fit.scaler.max_value == 5.0
    assert len(train_fit.train) == 76 and len(train_fit.test) == 19
