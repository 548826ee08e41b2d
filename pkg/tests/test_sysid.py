import warnings
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import solve_ivp

from qgrom.errors import DomainError, NumericError
from qgrom.sysid import (
    ExtrapolationWarning,
    FeatureConfig,
    RhsModel,
    build_features,
    estimate_derivatives,
    eval_rhs,
    fit,
    lstsq_svd,
)

ROTATION = np.array([[0.0, 1.0], [-1.0, 0.0]])


def rotation_data(n=200, dt=0.05):
    t = dt * np.arange(n)
    y = np.column_stack([np.sin(t) + 2 * np.cos(t), np.cos(t) - 2 * np.sin(t)])
    return t, y, y @ ROTATION.T


def test_derivatives_of_constant_and_linear():
    np.testing.assert_array_equal(estimate_derivatives(np.ones((7, 2)), 0.3), 0.0)
    t = 0.3 * np.arange(7)
    np.testing.assert_allclose(estimate_derivatives(2.5 * t[:, None], 0.3), 2.5, rtol=1e-13)


def test_derivatives_second_order():
    errs = []
    for n in (50, 100, 200):
        t = np.linspace(0, 2 * np.pi, n)
        d = estimate_derivatives(np.sin(3 * t)[:, None], t[1] - t[0])[:, 0]
        errs.append(np.max(np.abs(d - 3 * np.cos(3 * t))))
    slopes = np.log(np.array(errs[:-1]) / errs[1:]) / np.log(np.array([99 / 49, 199 / 99]))
    assert np.all(slopes > 1.8), slopes


def test_derivatives_need_three_samples():
    with pytest.raises(DomainError):
        estimate_derivatives(np.zeros((2, 1)), 1.0)


def test_feature_layout():
    cfg = FeatureConfig(m=2, harmonics=1, mid=(0.0, 0.0), halfrange=(np.pi, np.pi))
    np.testing.assert_array_equal(build_features([0.0, 0.0], 0.0, cfg), [1, 0, 0, 0, 0, 0, 0, 1, 0, 1])
    y = np.array([2.0, 3.0])
    th = build_features(y, 0.0, cfg)
    np.testing.assert_allclose(th[:6], [1, 2, 3, 4, 6, 9])
    np.testing.assert_allclose(th[6:], [np.sin(2), np.cos(2), np.sin(3), np.cos(3)])


def test_feature_counts():
    assert FeatureConfig(m=30, fourier_mode="none").n_features == 496
    assert FeatureConfig(m=30).n_features == 3496
    cfg = FeatureConfig(m=3, harmonics=4)
    assert build_features(np.ones((5, 3)), np.zeros(5), cfg).shape == (5, cfg.n_features)


def test_time_mode_features():
    cfg = FeatureConfig(m=1, fourier_mode="time", harmonic_set=(1, 3), base_period=10.0)
    th = build_features([0.5], 2.5, cfg)
    np.testing.assert_allclose(th[3:], [1.0, 0.0, -1.0, 0.0], atol=1e-15)


def test_extrapolation_warns_not_raises():
    cfg = FeatureConfig(m=1, harmonics=1, mid=(0.0,), halfrange=(1.0,))
    with pytest.warns(ExtrapolationWarning):
        build_features([11.0], 0.0, cfg)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        build_features([9.0], 0.0, cfg)


def test_normalisation_from_training_range():
    cfg = FeatureConfig(m=2).with_normalisation(np.array([[0.0, -4.0], [2.0, 4.0]]))
    assert cfg.mid == (1.0, 0.0) and cfg.halfrange == (1.0, 4.0)


def test_zero_derivatives_give_zero_model():
    t, y, _ = rotation_data(50)
    model = fit(y, np.zeros_like(y), FeatureConfig(m=2, harmonics=3).with_normalisation(y))
    assert np.all(model.coefficients == 0.0)
    np.testing.assert_array_equal(model(y[3]), 0.0)


def test_rotation_recovered():
    t, y, dy = rotation_data()
    model = fit(y, dy, FeatureConfig(m=2, fourier_mode="none"))
    C = model.coefficients
    np.testing.assert_allclose(C[:, 1:3], ROTATION, atol=1e-6)
    C_other = np.delete(C, [1, 2], axis=1)
    assert np.max(np.abs(C_other)) <= 1e-6


def lorenz(t, s, sigma=10.0, rho=28.0, beta=8.0 / 3.0):
    x, y, z = s
    return [sigma * (y - x), x * (rho - z) - y, x * y - beta * z]


def test_lorenz_quadratic_coefficients():
    dt = 1e-3
    t = dt * np.arange(20001)
    sol = solve_ivp(lorenz, (0, t[-1]), [-8.0, 7.0, 27.0], t_eval=t, rtol=1e-12, atol=1e-12, method="DOP853")
    y = sol.y.T
    model = fit(y, estimate_derivatives(y, dt), FeatureConfig(m=3, fourier_mode="none"))
    C = model.coefficients
    # quadratic order: xx, xy, xz, yy, yz, zz at columns 4..9
    truth = np.zeros((3, 10))
    truth[0, 1:3] = [-10.0, 10.0]
    truth[1, [1, 2, 6]] = [28.0, -1.0, -1.0]
    truth[2, [3, 5]] = [-8.0 / 3.0, 1.0]
    np.testing.assert_allclose(C[1, 6], -1.0, rtol=1e-3)
    np.testing.assert_allclose(C[2, 5], 1.0, rtol=1e-3)
    quad = C[:, 4:]
    assert np.max(np.abs(quad - truth[:, 4:])) <= 1e-3
    np.testing.assert_allclose(C[:, 1:4], truth[:, 1:4], rtol=1e-3, atol=1e-3)


def test_linear_only_model_evaluates_exactly():
    cfg = FeatureConfig(m=2, fourier_mode="none")
    C = np.zeros((2, cfg.n_features))
    A = np.array([[1.5, -2.0], [0.25, 3.0]])
    C[:, 1:3] = A
    y = np.array([0.7, -1.1])
    np.testing.assert_array_equal(eval_rhs(RhsModel(cfg, C), y), A @ y)
    np.testing.assert_array_equal(eval_rhs(RhsModel(cfg, np.zeros_like(C)), y), 0.0)


def test_fit_residual_identity():
    r = np.random.default_rng(0)
    y = r.standard_normal((40, 3))
    dy = r.standard_normal((40, 3))
    cfg = FeatureConfig(m=3, harmonics=2).with_normalisation(y)
    model = fit(y, dy, cfg)
    resid = np.linalg.norm(eval_rhs(model, y) - dy, axis=0)
    np.testing.assert_allclose(resid, model.residual_norms, rtol=1e-8, atol=1e-12)


def test_fit_rejects_non_finite():
    y = np.ones((5, 1))
    dy = np.ones((5, 1))
    dy[2] = np.inf
    with pytest.raises(NumericError):
        fit(y, dy, FeatureConfig(m=1, fourier_mode="none"))


def test_time_mode_selects_forcing_harmonic():
    t = np.arange(400.0)
    y = np.column_stack([np.sin(2 * np.pi * 3 * t / 400)])
    dy = np.column_stack([0.1 * np.cos(2 * np.pi * 5 * t / 400)])
    cfg = FeatureConfig(m=1, poly_degree=1, fourier_mode="time", harmonics=2, base_period=400.0)
    model = fit(y, dy, cfg, t)
    assert 5 in model.config.harmonic_set


def test_ridge_shrinks_solution():
    r = np.random.default_rng(1)
    theta = r.standard_normal((20, 5))
    target = r.standard_normal((20, 2))
    c0, _ = lstsq_svd(theta, target)
    c1, _ = lstsq_svd(theta, target, ridge=10.0)
    assert np.linalg.norm(c1) < np.linalg.norm(c0)
    np.testing.assert_allclose(c0.T, np.linalg.lstsq(theta, target, rcond=None)[0], rtol=1e-10)


def test_config_round_trip():
    cfg = FeatureConfig(m=2, harmonics=3, mid=(1.0, 2.0), halfrange=(0.5, 0.25), ridge=1e-3)
    assert FeatureConfig.from_dict(cfg.to_dict()) == cfg


@given(st.integers(0, 2**32 - 1))
def test_exact_library_model_round_trip(seed):
    r = np.random.default_rng(seed)
    y = r.standard_normal((60, 2))
    cfg = FeatureConfig(m=2, fourier_mode="none")
    C = r.standard_normal((2, cfg.n_features))
    dy = build_features(y, 0.0, cfg) @ C.T
    model = fit(y, dy, cfg)
    np.testing.assert_allclose(eval_rhs(model, y), dy, rtol=1e-8, atol=1e-8 * np.abs(dy).max())


@given(st.integers(0, 2**32 - 1))
def test_duplicate_columns_do_not_change_predictions(seed):
    r = np.random.default_rng(seed)
    theta = r.standard_normal((15, 6))
    target = r.standard_normal((15, 2))
    c, _ = lstsq_svd(theta, target)
    dup = np.hstack([theta, theta[:, :2]])
    c2, _ = lstsq_svd(dup, target)
    np.testing.assert_allclose(dup @ c2.T, theta @ c.T, rtol=1e-8, atol=1e-10)


@given(st.integers(0, 2**32 - 1), st.floats(0.1, 10.0))
def test_scaling_covariance(seed, s):
    r = np.random.default_rng(seed)
    y = r.standard_normal((30, 2))
    A = r.standard_normal((2, 2))
    dy = y @ A.T
    cfg = replace(FeatureConfig(m=2, poly_degree=1, fourier_mode="none"))
    m1 = fit(y, dy, cfg.with_normalisation(y))
    m2 = fit(s * y, s * dy, cfg.with_normalisation(s * y))
    np.testing.assert_allclose(eval_rhs(m2, s * y), s * eval_rhs(m1, y), rtol=1e-8, atol=1e-9 * s)
