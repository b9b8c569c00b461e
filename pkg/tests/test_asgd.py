import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from edwsvr.asgd import (
    RNG_ALGORITHM,
    AsgdConfig,
    LinearModel,
    augment,
    averaging_rate,
    full_gradient,
    learning_rate,
    objective,
    predict_linear,
    stochastic_gradient,
    subgradient_s,
    train_asgd,
)
from edwsvr.data import Dataset
from edwsvr.oracle import finite_diff_check, minimize_linear_objective


def _problem(seed, n=60, d=3, noise=0.1):
    rng = np.random.default_rng(seed)
    X = rng.uniform(size=(n, d))
    y = X @ rng.normal(size=d) + 0.3 + noise * rng.normal(size=n)
    return Dataset(X, y)


def test_subgradient_examples():
    x = np.ones(3)
    np.testing.assert_array_equal(subgradient_s(np.zeros(3), x, 5.0, 1.0), -x)
    np.testing.assert_array_equal(subgradient_s(np.zeros(3), x, -5.0, 1.0), x)
    np.testing.assert_array_equal(subgradient_s(np.zeros(3), x, 0.5, 1.0), np.zeros(3))
    # w.x - y = eps exactly: boundary counts as inside
    w = np.array([1.0, 0.0, 0.0])
    np.testing.assert_array_equal(subgradient_s(w, x, 0.5, 0.5), np.zeros(3))
    np.testing.assert_array_equal(subgradient_s(w, x, 1.5, 0.5), np.zeros(3))


def test_stochastic_gradient_examples():
    w = np.array([0.4, -1.2])
    cfg = AsgdConfig(lambda1=0.0, c_upper=0.0)
    np.testing.assert_array_equal(stochastic_gradient(w, np.array([3.0, 1.0]), 7.0, 10, cfg), w)
    cfg = AsgdConfig(lambda1=1.0, c_upper=123.0, epsilon=3.0)
    g = stochastic_gradient(np.zeros(2), np.array([1.0, 1.0]), 2.0, 1, cfg)
    np.testing.assert_array_equal(g, [-4.0, -4.0])


def test_full_gradient_reduces_to_w():
    data = _problem(0)
    w = np.random.default_rng(1).normal(size=4)
    np.testing.assert_array_equal(full_gradient(w, data, AsgdConfig(lambda1=0.0, c_upper=0.0)), w)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.0, 5.0), st.floats(0.0, 5.0), st.floats(0.0, 0.5))
def test_unbiased_stochastic_gradient(seed, lam, C, eps):
    data = _problem(seed, n=40)
    cfg = AsgdConfig(lambda1=lam, c_upper=C, epsilon=eps)
    w = np.random.default_rng(seed + 1).normal(size=4)
    Xa = augment(data.features)
    avg = np.mean([stochastic_gradient(w, Xa[i], data.targets[i], data.n, cfg)
                   for i in range(data.n)], axis=0)
    full = full_gradient(w, data, cfg)
    assert np.linalg.norm(avg - full) <= 1e-10 * max(np.linalg.norm(full), 1.0)


def _away_from_kinks(w, data, eps, margin=1e-3):
    r = augment(data.features) @ w - data.targets
    return np.all(np.abs(np.abs(r) - eps) >= margin)


def test_finite_differences_away_from_kinks():
    data = _problem(3)
    cfg = AsgdConfig(lambda1=1.0, c_upper=1.0, epsilon=0.05)
    rng = np.random.default_rng(4)
    checked = 0
    while checked < 10:
        w = rng.normal(size=4)
        if not _away_from_kinks(w, data, cfg.epsilon, 2e-3):
            continue
        err = finite_diff_check(lambda v: objective(v, data, cfg),
                                lambda v: full_gradient(v, data, cfg), w)
        assert err < 1e-5
        checked += 1


def test_gradient_vanishes_at_smooth_minimizer():
    # the hinge is inactive at the minimizer when the tube is wide, so g is smooth there
    data = _problem(5)
    for cfg in (AsgdConfig(lambda1=1.0, c_upper=0.0), AsgdConfig(lambda1=2.0, c_upper=1.0, epsilon=10.0)):
        w_star = minimize_linear_objective(data, cfg)
        assert np.linalg.norm(full_gradient(w_star, data, cfg)) < 1e-6


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000))
def test_objective_convex(seed):
    data = _problem(7)
    cfg = AsgdConfig(lambda1=1.0, c_upper=2.0, epsilon=0.05)
    rng = np.random.default_rng(seed)
    w1, w2 = rng.normal(size=4) * 3, rng.normal(size=4) * 3
    mid = objective(0.5 * (w1 + w2), data, cfg)
    assert mid <= 0.5 * objective(w1, data, cfg) + 0.5 * objective(w2, data, cfg) + 1e-12


def test_objective_decreases_under_full_gradient_descent():
    data = _problem(8)
    cfg = AsgdConfig(lambda1=1.0, c_upper=0.5, epsilon=0.05)
    w = np.zeros(4)
    vals = [objective(w, data, cfg)]
    for _ in range(200):
        w = w - 1e-3 * full_gradient(w, data, cfg)
        vals.append(objective(w, data, cfg))
    assert all(b <= a + 1e-12 for a, b in zip(vals, vals[1:]))
    assert vals[-1] < vals[0]


def test_schedules():
    cfg = AsgdConfig(eta0=0.3, a=2.0, c_exp=0.5)
    assert learning_rate(0, cfg) == 0.3
    assert learning_rate(10, cfg) == pytest.approx(0.3 * (1 + 2 * 0.3 * 10) ** -0.5)
    flat = AsgdConfig(eta0=0.3, a=0.0)
    assert all(learning_rate(t, flat) == 0.3 for t in (0, 5, 10_000))
    assert averaging_rate(3, 10) == 1.0 and averaging_rate(10, 10) == 1.0
    assert averaging_rate(14, 10) == 0.25


def test_config_validation():
    for bad in (dict(T=0), dict(t0=-1), dict(eta0=0.0), dict(c_exp=1.5), dict(a=-1.0)):
        with pytest.raises(ValueError):
            AsgdConfig(**bad)


def test_train_deterministic_and_seeded():
    data = _problem(9)
    a = train_asgd(data, AsgdConfig(seed=3))
    b = train_asgd(data, AsgdConfig(seed=3))
    c = train_asgd(data, AsgdConfig(seed=4))
    assert np.array_equal(a.w_aug, b.w_aug)
    assert not np.array_equal(a.w_aug, c.w_aug)
    assert RNG_ALGORITHM == "PCG64"


def test_train_matches_reference_loop():
    # straightforward re-implementation of the update rule from the public pieces
    data = _problem(10, n=25)
    cfg = AsgdConfig(lambda1=1.0, c_upper=0.2, epsilon=0.05, T=3, seed=11)
    Xa = augment(data.features)
    order = np.random.Generator(np.random.PCG64(cfg.seed)).integers(0, data.n, cfg.T * data.n)
    w = np.zeros(Xa.shape[1])
    w_bar = np.zeros_like(w)
    for t, i in enumerate(order, start=1):
        w = w - learning_rate(t, cfg) * stochastic_gradient(w, Xa[i], data.targets[i], data.n, cfg)
        delta = averaging_rate(t, data.n)
        w_bar = delta * w + (1 - delta) * w_bar
    model = train_asgd(data, cfg)
    np.testing.assert_allclose(model.w_aug, w_bar, rtol=1e-10, atol=1e-12)
    np.testing.assert_allclose(model.info["last_iterate"], w, rtol=1e-10, atol=1e-12)


def test_pure_shrinkage():
    data = _problem(12)
    model = train_asgd(data, AsgdConfig(lambda1=0.0, c_upper=0.0))
    np.testing.assert_array_equal(model.w_aug, 0.0)


def _relative_gap(data, cfg):
    g_star = objective(minimize_linear_objective(data, cfg), data, cfg)
    g_bar = objective(train_asgd(data, cfg).w_aug, data, cfg)
    # g omits the constant y'y, so g* can be negative
    return (g_bar - g_star) / abs(g_star)


@pytest.mark.parametrize("seed", [0, 1, 2, 3, 4])
def test_tiny_problem_long_run_within_one_percent(seed):
    data = _problem(seed, n=20, d=2)
    cfg = AsgdConfig(lambda1=1.0, c_upper=0.1, epsilon=0.05, T=500, seed=0)
    assert _relative_gap(data, cfg) <= 0.01


def test_tiny_problem_large_c_noise_floor():
    # with C = 1 on 20 points the n*C-scaled steps leave a 1-6% gap under the
    # default schedule (oracle runs over 10 datasets); pin the observed ceiling
    data = _problem(2, n=20, d=2)
    cfg = AsgdConfig(lambda1=1.0, c_upper=1.0, epsilon=0.05, T=500, seed=0)
    assert 0.0 <= _relative_gap(data, cfg) <= 0.1


def test_predict_examples():
    m = LinearModel(np.array([0.0, 0.0, 2.5]))
    np.testing.assert_array_equal(predict_linear(m, np.random.default_rng(0).normal(size=(4, 2))), 2.5)
    assert predict_linear(LinearModel(np.array([1.0, 0.0, 0.0])), np.array([3.0, 7.0])) == 3.0
    with pytest.raises(ValueError):
        predict_linear(m, np.zeros(3))


def test_predictions_match_internal_residuals():
    data = _problem(14)
    model = train_asgd(data, AsgdConfig(T=2))
    w = model.info["last_iterate"]
    direct = predict_linear(LinearModel(w), data.features)
    np.testing.assert_allclose(direct, augment(data.features) @ w, rtol=1e-14)
