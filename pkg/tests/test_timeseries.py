import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from fnn_forge.errors import CsvFormatError, InsufficientDataError, InvalidArgument, ZeroVarianceError
from fnn_forge.timeseries import (
    HankelMatrix,
    PointCloud,
    TimeSeries,
    build_hankel,
    downsample,
    read_csv,
    split_train_val_test,
    standardize,
    write_csv,
)


def test_standardize_two_points():
    out = standardize(TimeSeries([1.0, 3.0]))
    np.testing.assert_array_equal(out.values[:, 0], [-1.0, 1.0])


def test_standardize_constant_channel_rejected():
    with pytest.raises(ZeroVarianceError):
        standardize(TimeSeries(np.c_[np.arange(5.0), np.ones(5)]))


def test_standardized_lorenz_moments(lorenz_x):
    x = lorenz_x.values[:, 0]
    assert abs(x.mean()) <= 1e-10
    assert abs(x.var() - 1.0) <= 1e-10


@settings(max_examples=40, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(3, 40), st.integers(1, 3)),
              elements=st.floats(-1e3, 1e3, allow_nan=False)))
def test_standardize_is_idempotent(values):
    if np.any(values.std(axis=0) < 1e-6):
        return
    once = standardize(TimeSeries(values))
    twice = standardize(once)
    np.testing.assert_allclose(twice.values, once.values, atol=1e-12)


def test_hankel_examples():
    H = build_hankel(TimeSeries([1.0, 2, 3, 4, 5]), 3)
    np.testing.assert_array_equal(H.rows, [[1, 2, 3], [2, 3, 4], [3, 4, 5]])
    H = build_hankel(TimeSeries([7.0, 7, 7, 7]), 2)
    np.testing.assert_array_equal(H.rows, np.full((3, 2), 7.0))


def test_hankel_too_short():
    with pytest.raises(InsufficientDataError):
        build_hankel(TimeSeries([1.0, 2.0]), 3)


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 8), st.integers(0, 30), st.integers(0, 2**31 - 1))
def test_hankel_structure(T, extra, seed):
    x = np.random.default_rng(seed).normal(size=T + extra)
    H = build_hankel(TimeSeries(x), T)
    assert H.rows.shape == (len(x) - T + 1, T)
    # constant along anti-diagonals
    np.testing.assert_array_equal(H.rows[1:, :-1], H.rows[:-1, 1:])
    np.testing.assert_array_equal(H.rows[:, 0], x[:len(x) - T + 1])


def test_containers_are_read_only():
    H = build_hankel(TimeSeries(np.arange(6.0)), 3)
    with pytest.raises(ValueError):
        H.rows[0, 0] = 9.0
    with pytest.raises(InvalidArgument):
        HankelMatrix(np.zeros((3, 2)), 3)
    with pytest.raises(InvalidArgument):
        PointCloud([[np.nan, 1.0]])
    with pytest.raises(InvalidArgument):
        TimeSeries([1.0, np.inf])


def test_downsample():
    ts = TimeSeries(np.arange(6.0), dt=0.5)
    d = downsample(ts, 2)
    np.testing.assert_array_equal(d.values[:, 0], [0, 2, 4])
    assert d.dt == 1.0
    np.testing.assert_array_equal(downsample(ts, 1).values, ts.values)
    assert len(downsample(TimeSeries(np.zeros(125001)), 10)) == 12501
    with pytest.raises(InvalidArgument):
        downsample(ts, 0)


def test_split_tight_packing():
    ts = TimeSeries(np.arange(17000.0))
    parts = split_train_val_test(ts)
    assert [p.values[0, 0] for p in parts] == [0, 6000, 12000]
    assert all(len(p) == 5000 for p in parts)
    seen = np.concatenate([p.values[:, 0] for p in parts])
    assert len(np.unique(seen)) == len(seen)
    with pytest.raises(InsufficientDataError):
        split_train_val_test(TimeSeries(np.arange(16999.0)))


def test_csv_roundtrip_exact(tmp_path):
    m = np.random.default_rng(0).normal(size=(20, 3)) * 10.0 ** np.arange(-5, 10, 5)
    p = tmp_path / "m.csv"
    write_csv(p, m, ["a", "b", "c"])
    back = read_csv(p)
    np.testing.assert_array_equal(back.values, m)


def test_csv_diagnostics(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("a,b\n1,2\n3,oops\n")
    with pytest.raises(CsvFormatError) as err:
        read_csv(p)
    assert (err.value.row, err.value.column) == (3, 2)
    p.write_text("1,2\n3\n")
    with pytest.raises(CsvFormatError) as err:
        read_csv(p)
    assert err.value.row == 2
