"""Acceptance criteria.

Each test prints one ``[ACCEPT n] PASS|FAIL`` line with the measured value
and the pinned tolerance, then asserts.
"""

import io
import math
import time

import numpy as np
import pytest

from conftest import random_instance
from edwsvr.asgd import AsgdConfig, augment, full_gradient, objective, stochastic_gradient, train_asgd
from edwsvr.baselines import EsvrConfig, train_esvr, train_ols
from edwsvr.bench import FitParams, cross_validate, fit_model, parse_report
from edwsvr.cd import CdConfig, dual_objective, precompute, solve_dual, train_cd
from edwsvr.cli import main
from edwsvr.data import Dataset, evaluate, load_bundled, synth_two_lines
from edwsvr.kernels import KernelSpec, gram_augmented
from edwsvr.modelio import dumps, loads
from edwsvr.oracle import finite_diff_check, minimize_linear_objective, solve_primal_pg

TIGHT = dict(tol=1e-10, max_sweeps=100_000)


@pytest.fixture
def verdict(capsys):
    def emit(number, title, ok, detail):
        with capsys.disabled():
            print(f"\n[ACCEPT {number}] {'PASS' if ok else 'FAIL'} {title}: {detail}")
        assert ok, f"criterion {number} failed: {detail}"
    return emit


def test_1_unbiased_stochastic_gradient(verdict):
    start = time.perf_counter()
    rng = np.random.default_rng(101)
    n, d = 200, 5
    X = rng.normal(size=(n, d))
    data = Dataset(X, X @ rng.normal(size=d) + 0.5 * rng.normal(size=n))
    cfg = AsgdConfig(lambda1=1.0, c_upper=1.0, epsilon=0.1)
    Xa = augment(data.features)
    worst = 0.0
    for _ in range(100):
        w = rng.normal(size=d + 1)
        avg = np.mean([stochastic_gradient(w, Xa[i], data.targets[i], n, cfg) for i in range(n)],
                      axis=0)
        full = full_gradient(w, data, cfg)
        worst = max(worst, np.linalg.norm(avg - full) / np.linalg.norm(full))
    elapsed = time.perf_counter() - start
    verdict(1, "stochastic gradient is unbiased", worst <= 1e-10 and elapsed < 5,
            f"max rel err {worst:.2e} (tol 1e-10), {elapsed:.2f}s (limit 5s)")


def test_2_gradient_finite_differences(verdict):
    start = time.perf_counter()
    rng = np.random.default_rng(102)
    n, d = 100, 5
    X = rng.uniform(size=(n, d))
    data = Dataset(X, X @ rng.normal(size=d) + 0.2 * rng.normal(size=n))
    cfg = AsgdConfig(lambda1=1.0, c_upper=1.0, epsilon=0.1)
    Xa = augment(X)
    worst, checked = 0.0, 0
    while checked < 50:
        w = rng.normal(size=d + 1)
        r = Xa @ w - data.targets
        if np.min(np.abs(np.abs(r) - cfg.epsilon)) < 1e-3:
            continue  # too close to a hinge kink
        err = finite_diff_check(lambda v: objective(v, data, cfg),
                                lambda v: full_gradient(v, data, cfg), w, step=1e-6)
        worst = max(worst, err)
        checked += 1
    elapsed = time.perf_counter() - start
    verdict(2, "gradient matches central differences", worst <= 1e-5 and elapsed < 5,
            f"max rel err {worst:.2e} over 50 points (tol 1e-5), {elapsed:.2f}s (limit 5s)")


def test_3_cd_matches_primal_oracle(verdict):
    start = time.perf_counter()
    rng = np.random.default_rng(103)
    worst = 0.0
    for trial in range(20):
        n, d = int(rng.integers(5, 31)), int(rng.integers(1, 4))
        data, spec = random_instance(rng, n, d, kind="linear" if trial % 2 else "rbf")
        cfg = CdConfig(lambda1=[0.0, 1.0, 10.0][trial % 3], c_upper=1.0, epsilon=0.05, **TIGHT)
        f_cd = train_cd(data, spec, cfg).predict(data.features)
        f_or = solve_primal_pg(data, spec, cfg)
        worst = max(worst, float(np.max(np.abs(f_cd - f_or))))
    elapsed = time.perf_counter() - start
    verdict(3, "CD equals primal oracle", worst <= 1e-3 and elapsed < 60,
            f"max |diff| {worst:.2e} over 20 instances (tol 1e-3), {elapsed:.1f}s (limit 60s)")


def test_4_zero_lambda_reduces_to_esvr(verdict):
    start = time.perf_counter()
    rng = np.random.default_rng(104)
    worst = 0.0
    for trial in range(10):
        n, d = int(rng.integers(5, 51)), int(rng.integers(1, 4))
        data, spec = random_instance(rng, n, d, kind="linear" if trial % 2 else "rbf")
        C, eps = float(rng.uniform(0.1, 2.0)), float(rng.uniform(0.0, 0.1))
        f_cd = train_cd(data, spec, CdConfig(0.0, C, eps, **TIGHT)).predict(data.features)
        f_svr = train_esvr(data, spec, EsvrConfig(C, eps, **TIGHT)).predict(data.features)
        worst = max(worst, float(np.max(np.abs(f_cd - f_svr))))
    elapsed = time.perf_counter() - start
    verdict(4, "lambda1 = 0 matches e-SVR", worst <= 1e-4 and elapsed < 30,
            f"max |diff| {worst:.2e} over 10 instances (tol 1e-4), {elapsed:.1f}s (limit 30s)")


def test_5_monotone_dual_descent_and_box(verdict):
    rng = np.random.default_rng(105)
    worst_rise, infeasible, updates = 0.0, 0, 0
    for trial, (n, lam, C) in enumerate([(50, 1.0, 1.0), (40, 0.0, 0.3), (30, 10.0, 5.0), (50, 1.0, 0.05)]):
        data, spec = random_instance(rng, n, 2, kind="linear" if trial % 2 else "rbf")
        cfg = CdConfig(lambda1=lam, c_upper=C, epsilon=0.02)
        pre = precompute(gram_augmented(spec, data), cfg)
        y = data.targets
        last = [dual_objective(pre, np.zeros(2 * n), y, cfg.epsilon)]

        def watch(k, state):
            nonlocal worst_rise, infeasible, updates
            f = dual_objective(pre, state.beta_prime, y, cfg.epsilon)
            worst_rise = max(worst_rise, f - last[0])
            last[0] = f
            bp = state.beta_prime
            infeasible += int(np.any(bp < 0.0) or np.any(bp > cfg.c_upper))
            updates += 1

        solve_dual(pre, y, cfg, callback=watch)
    ok = worst_rise <= 1e-12 and infeasible == 0
    verdict(5, "monotone dual descent, box feasible", ok,
            f"max rise {worst_rise:.2e} (tol 1e-12), {infeasible} infeasible states in {updates} updates")


def test_6_asgd_converges(verdict):
    start = time.perf_counter()
    rng = np.random.default_rng(42)
    n, d = 500, 10
    X = rng.uniform(size=(n, d))
    y = X @ (rng.normal(size=d) / np.sqrt(d)) + 0.3 + 0.1 * rng.normal(size=n)
    data = Dataset(X, y)
    cfg = AsgdConfig(lambda1=1.0, c_upper=1.0, epsilon=0.05, T=500, seed=1)
    g_star = objective(minimize_linear_objective(data, cfg), data, cfg)
    g_bar = objective(train_asgd(data, cfg).w_aug, data, cfg)
    elapsed = time.perf_counter() - start
    gap = (g_bar - g_star) / abs(g_star)
    verdict(6, "ASGD reaches the oracle objective", gap <= 0.01 and elapsed < 30,
            f"g(w_bar) {g_bar:.6f} vs g* {g_star:.6f}, rel gap {gap:.4f} (tol 0.01), "
            f"{elapsed:.1f}s (limit 30s)")


def test_7_two_lines_ordering(verdict):
    start = time.perf_counter()
    data = synth_two_lines(1000, 0.826, 0.165, 0.008, seed=0)
    line_a = data.groups == 0
    spec = KernelSpec("linear")
    C, eps = 0.01, 0.1

    def mse_a(model):
        return evaluate(model.predict(data.features)[line_a], data.targets[line_a]).mse

    ols = mse_a(train_ols(data))
    svr = mse_a(train_esvr(data, spec, EsvrConfig(c_upper=C, epsilon=eps)))
    dw = mse_a(train_cd(data, spec, CdConfig(lambda1=1.0, c_upper=C, epsilon=eps)))
    elapsed = time.perf_counter() - start
    ok = ols > svr and ols > dw and dw <= svr and elapsed < 10
    verdict(7, "two-lines ordering on line A", ok,
            f"MSE ols {ols:.5f} > svr {svr:.5f} >= dwsvr {dw:.5f}, {elapsed:.1f}s (limit 10s)")


def test_8_determinism_and_persistence(verdict):
    rng = np.random.default_rng(108)
    X = rng.uniform(-3, 3, size=(80, 4))
    data = Dataset(X, np.sin(X[:, 0]) * 10 + X[:, 1] + rng.normal(size=80))
    query = rng.uniform(-4, 4, size=(40, 4))
    problems = []
    for method in ("cd-rbf", "cd-linear", "esvr-rbf", "esvr-linear", "asgd", "ols"):
        params = FitParams(seed=7)
        a, b = fit_model(method, data, params, 0.95), fit_model(method, data, params, 0.95)
        if dumps(a) != dumps(b):
            problems.append(f"{method} retrain differs")
        back = loads(dumps(a))
        if not np.array_equal(back.predict(query), a.predict(query)):
            problems.append(f"{method} round trip changes predictions")
    r1 = cross_validate(data, ["cd-rbf", "asgd", "ols"], folds=5, repeats=2, seed=3)
    r2 = cross_validate(data, ["cd-rbf", "asgd", "ols"], folds=5, repeats=2, seed=3)
    if r1.to_text() != r2.to_text():
        problems.append("CV reports differ")
    verdict(8, "determinism and persistence", not problems,
            "; ".join(problems) or "6 methods bitwise stable, round trips exact, CV reports identical")


def test_9_end_to_end_cv(verdict, tmp_path):
    start = time.perf_counter()
    report_path = tmp_path / "report.tsv"
    out = io.StringIO()
    code = main(["cv", "--bundled", "friedman500", "--folds", "5", "--repeats", "3",
                 "--methods", "cd-rbf,cd-linear,esvr,asgd,ols", "--report", str(report_path)],
                out=out)
    elapsed = time.perf_counter() - start
    rows = parse_report(report_path.read_text()) if code == 0 else []
    methods = {r[1] for r in rows}
    finite = all(math.isfinite(r[3]) and math.isfinite(r[4]) for r in rows)
    ok = (code == 0 and methods == {"cd-rbf", "cd-linear", "esvr-rbf", "asgd", "ols"}
          and len(rows) == 10 and finite and all(r[5] == 3 for r in rows) and elapsed < 300)
    verdict(9, "cv 5x3 on bundled data", ok,
            f"exit {code}, {len(rows)} finite rows for {len(methods)} methods, {elapsed:.1f}s (limit 300s)")
    with_sd = {r[1]: r for r in rows if r[2] == "r2"}
    assert load_bundled().n == 500
    assert all(r[4] >= 0 for r in with_sd.values())
