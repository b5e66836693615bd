"""Discrete integral and path container tests."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from localest.errors import ConfigError, SchemaMismatch
from localest.measurements import (MeasurementPath, ito_integral,
                                   probe_inner_product, quadratic_variation,
                                   time_integral)


def test_time_integral_constant_exact():
    f = np.full(101, 3.0)
    assert time_integral(f, 0.01) == pytest.approx(3.0, rel=1e-14)


def test_time_integral_left_bias():
    # left sum of f(t) = t on [0, 1] is exactly 1/2 - dt/2
    n = 1000
    dt = 1.0 / n
    f = dt * np.arange(n + 1)
    assert time_integral(f, dt) == pytest.approx(0.5 - dt / 2.0, rel=1e-12)


def test_ito_integral_deterministic():
    # sum t_k (t_{k+1}^2 - t_k^2) -> int t d(t^2) = 2/3, O(dt) from the left
    n = 100_000
    t = np.linspace(0.0, 1.0, n + 1)
    val = ito_integral(t, t ** 2)
    assert val == pytest.approx(2.0 / 3.0, abs=2.0 / n)


def test_ito_integral_shape_mismatch():
    with pytest.raises(ValueError):
        ito_integral(np.zeros(5), np.zeros(6))


def test_quadratic_variation_simple():
    assert quadratic_variation([0.0, 1.0, -1.0]) == pytest.approx(5.0)


@given(hnp.arrays(np.float64, st.integers(2, 60),
                  elements=st.floats(-100, 100, allow_nan=False)))
@settings(max_examples=80, deadline=None)
def test_ito_identity_against_quadratic_variation(x):
    # exact discrete identity:
    # sum x_k dx_k = (x_n^2 - x_0^2)/2 - [x]/2
    lhs = ito_integral(x, x)
    rhs = 0.5 * (x[-1] ** 2 - x[0] ** 2) - 0.5 * quadratic_variation(x)
    assert lhs == pytest.approx(rhs, rel=1e-9, abs=1e-9)


def test_probe_inner_product_matches_trapezoid():
    # interior samples of functions vanishing at 0 and 1
    m = 2000
    h = 1.0 / m
    y = h * np.arange(1, m)
    f = np.sin(np.pi * y)
    g = np.sin(2.0 * np.pi * y) ** 2 * np.sin(np.pi * y)
    full = np.concatenate([[0.0], f * g, [0.0]])
    ref = np.trapezoid(full, dx=h)
    assert probe_inner_product(f, h, g) == pytest.approx(ref, rel=1e-12)


def test_measurement_path_roundtrip(tmp_path):
    rng = np.random.default_rng(7)
    path = MeasurementPath(
        dt=0.001,
        x=rng.standard_normal(50),
        x_lap=rng.standard_normal(50),
        meta={"delta": 0.05, "x0": 0.6, "kernel": "k1", "seed": 42},
    )
    f = tmp_path / "path.csv"
    path.to_csv(f)
    back = MeasurementPath.from_csv(f)
    np.testing.assert_array_equal(back.x, path.x)
    np.testing.assert_array_equal(back.x_lap, path.x_lap)
    assert back.dt == path.dt
    assert back.meta == path.meta
    assert back.horizon == pytest.approx(0.049)
    assert back.n_steps == 49


def test_measurement_path_rejects_bad_shapes():
    with pytest.raises(ConfigError):
        MeasurementPath(dt=0.1, x=np.zeros(5), x_lap=np.zeros(4))
    with pytest.raises(ConfigError):
        MeasurementPath(dt=-0.1, x=np.zeros(5), x_lap=np.zeros(5))


def test_measurement_path_downsample():
    p = MeasurementPath(dt=0.5, x=np.arange(9.0), x_lap=np.arange(9.0) ** 2)
    q = p.downsample(2)
    assert q.dt == 1.0
    np.testing.assert_array_equal(q.x, [0.0, 2.0, 4.0, 6.0, 8.0])
    with pytest.raises(ConfigError):
        p.downsample(3)


def test_from_csv_rejects_foreign_files(tmp_path):
    f = tmp_path / "bad.csv"
    f.write_text("a,b,c\n1,2,3\n")
    with pytest.raises(SchemaMismatch):
        MeasurementPath.from_csv(f)
