"""Estimator tests on crafted paths and single-mode exact simulations."""

import numpy as np
import pytest

from localest.errors import (AnalyticUnavailable, ConfigError,
                             DegenerateInformation)
from localest.estimators import (augmented_mle, estimate_curve, proxy_mle)
from localest.kernels import make_paper_kernels, rescale
from localest.measurements import (MeasurementPath, ito_integral,
                                   quadratic_variation, time_integral)
from localest.spectral_oracle import Channel, OracleModel

K1, K2 = make_paper_kernels()


def _path(x, x_lap, dt=0.01, **meta):
    return MeasurementPath(dt=dt, x=np.asarray(x, dtype=float),
                           x_lap=np.asarray(x_lap, dtype=float), meta=meta)


def test_augmented_matches_hand_computed_ratio():
    rng = np.random.default_rng(3)
    x = rng.standard_normal(200)
    xl = rng.standard_normal(200)
    p = _path(x, xl, dt=0.005, delta=0.1, x0=0.5)
    rep = augmented_mle(p)
    expected = ito_integral(xl, x) / time_integral(xl ** 2, 0.005)
    assert rep.theta_hat == pytest.approx(expected, rel=1e-14)
    assert rep.fisher_observed == pytest.approx(
        time_integral(xl ** 2, 0.005), rel=1e-14
    )
    assert rep.estimator == "augmented"
    assert rep.delta == 0.1 and rep.x0 == 0.5


def test_augmented_degenerate_information():
    p = _path(np.ones(50), np.zeros(50))
    with pytest.raises(DegenerateInformation):
        augmented_mle(p)
    with pytest.raises(ConfigError):
        augmented_mle(_path(np.ones(50), np.ones(50)), refine=3)


def test_proxy_formula_algebra_unit_ratio():
    # with ||K~'||^2 / (2||K||^2) = 1, QV = 2c and delta^-2 int X^2 dt = c
    # the estimate is exactly 2
    from localest.kernels import KernelSpec

    stub = KernelSpec(
        name="unit-ratio", eval=lambda x: x, deriv1=lambda x: x,
        deriv2=lambda x: x, antiderivative=lambda x: x,
        antiderivative_deriv=lambda x: x,
        _cache={("norm", 0): 1.0, ("anorm", 1): np.sqrt(2.0)},
    )
    rng = np.random.default_rng(21)
    x = rng.standard_normal(65)
    dt, delta = 0.01, 0.2
    p = _path(x, np.zeros(65), dt=dt, delta=delta, x0=0.5)
    c = time_integral(x ** 2, dt) / delta ** 2
    qv = quadratic_variation(x)
    rep = proxy_mle(p, stub)
    assert rep.theta_hat == pytest.approx(qv / c, rel=1e-14)
    assert rep.qv_used == pytest.approx(qv, rel=1e-14)
    assert rep.flags == ()


def test_proxy_formula_matches_hand_computation():
    rng = np.random.default_rng(22)
    x = rng.standard_normal(129)
    dt, delta = 0.005, 0.1
    p = _path(x, np.zeros(129), dt=dt, delta=delta, x0=0.5)
    rep = proxy_mle(p, K1)
    ratio = K1.antiderivative_norm(1) ** 2 / (2.0 * K1.norm() ** 2)
    denom = time_integral(x ** 2, dt) / delta ** 2
    expected = ratio * quadratic_variation(x) / denom
    assert rep.theta_hat == pytest.approx(expected, rel=1e-14)


def test_proxy_analytic_qv_uses_exact_mean():
    rng = np.random.default_rng(11)
    x = rng.standard_normal(101)
    p = _path(x, np.zeros(101), dt=0.01, delta=0.1, x0=0.5, sigma=1.5)
    rep = proxy_mle(p, K1, qv_mode="analytic")
    ratio = K1.antiderivative_norm(1) ** 2 / (2.0 * K1.norm() ** 2)
    qv = 1.0 * 1.5 ** 2 * K1.norm() ** 2
    denom = time_integral(x ** 2, 0.01) / 0.1 ** 2
    assert rep.theta_hat == pytest.approx(ratio * qv / denom, rel=1e-14)
    # sigma argument overrides metadata
    rep2 = proxy_mle(p, K1, qv_mode="analytic", sigma=3.0)
    assert rep2.theta_hat == pytest.approx(rep.theta_hat * 4.0, rel=1e-12)
    # no sigma anywhere: refuse
    p_bare = _path(x, np.zeros(101), dt=0.01, delta=0.1)
    with pytest.raises(AnalyticUnavailable):
        proxy_mle(p_bare, K1, qv_mode="analytic")


def test_proxy_flags_kernel_without_antiderivative():
    rng = np.random.default_rng(4)
    p = _path(rng.standard_normal(64), np.zeros(64), delta=0.2, x0=0.5)
    rep = proxy_mle(p, K2)
    assert rep.flags == ("assumption-violated",)
    assert np.isfinite(rep.theta_hat) and rep.theta_hat > 0


def test_proxy_degenerate_and_missing_delta():
    p = _path(np.zeros(64), np.zeros(64), delta=0.2)
    with pytest.raises(DegenerateInformation):
        proxy_mle(p, K1)
    p2 = _path(np.ones(64), np.zeros(64))
    with pytest.raises(ConfigError):
        proxy_mle(p2, K1)
    with pytest.raises(ConfigError):
        proxy_mle(_path(np.ones(64), np.zeros(64), delta=0.2), K1, qv_mode="x")


def test_refinement_cancels_discretisation_bias():
    # observe a single fast mode: the left-sum estimator is biased by
    # O(lambda dt); Richardson refinement must cut the bias well below it
    model = OracleModel(theta=1.0, sigma=1.0)
    k = 5
    lam_probe = Channel(probe=None, kind="value", coeffs=np.array([0.0] * (k - 1) + [1.0]))
    lap = Channel(probe=None, kind="laplacian",
                  coeffs=np.array([0.0] * (k - 1) + [-(np.pi * k) ** 2]))
    n, horizon, reps = 512, 1.0, 400
    means = {0: 0.0, 1: 0.0}
    for refine in (0, 1):
        vals = []
        for rep in range(reps):
            out = model.simulate([lam_probe, lap], horizon, n, 10_000 + rep,
                                 init="stationary", backend="numpy")
            path = MeasurementPath(dt=horizon / n, x=out[0], x_lap=out[1],
                                   meta={"delta": 0.1, "x0": 0.5})
            vals.append(augmented_mle(path, refine=refine).theta_hat)
        means[refine] = np.mean(vals)
    assert abs(means[1] - 1.0) < abs(means[0] - 1.0) / 3.0
    assert abs(means[0] - 1.0) > 0.05  # the raw bias is actually visible


def test_estimate_curve_collects_and_flags():
    rng = np.random.default_rng(9)
    good = _path(rng.standard_normal(100), rng.standard_normal(100),
                 delta=0.1, x0=0.3)
    bad = _path(np.ones(100), np.zeros(100), delta=0.1, x0=0.7)
    reports = estimate_curve([good, bad], "augmented")
    assert len(reports) == 2
    assert np.isfinite(reports[0].theta_hat)
    assert np.isnan(reports[1].theta_hat)
    assert reports[1].flags == ("failed:DegenerateInformation",)
    assert reports[1].x0 == 0.7
    with pytest.raises(ConfigError):
        estimate_curve([good], "median")
