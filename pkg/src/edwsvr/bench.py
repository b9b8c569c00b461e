"""Cross-validated comparison of the solvers under a common preprocessing protocol.

Each fold fits min-max normalization (features and target) and, optionally,
PCA on its training split only, trains every requested method on the
transformed data and scores raw-unit predictions on the held-out split.
"""

from __future__ import annotations

import itertools
import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .asgd import AsgdConfig, train_asgd
from .baselines import EsvrConfig, train_esvr, train_ols
from .cd import CdConfig, train_cd
from .data import Dataset, evaluate, fit_preprocessing, make_folds
from .kernels import KernelSpec

METHODS = ("cd-rbf", "cd-linear", "esvr-rbf", "esvr-linear", "asgd", "ols")
REPORT_HEADER = "# edwsvr-report v1\tdataset\tmethod\tmetric\tmean\tsd\tcount"


@dataclass
class FitParams:
    lambda1: float = 1.0
    c_upper: float = 1.0
    epsilon: float = 0.1
    gamma: float | None = None  # None: 1/d after preprocessing
    tol: float = 1e-6
    max_sweeps: int = 1000
    T: int = 5
    t0: int | None = None
    eta0: float = 0.1
    a: float = 1.0
    c_exp: float = 0.75
    seed: int = 0


def resolve_methods(names, default_kernel="rbf"):
    """Expand ``cd``/``esvr`` to their kernel-qualified names and validate the rest."""
    out = []
    for name in names:
        name = name.strip()
        if name in ("cd", "esvr"):
            name = f"{name}-{default_kernel}"
        if name not in METHODS:
            raise ValueError(f"unknown method {name!r}; choose from {', '.join(METHODS)}")
        out.append(name)
    return out


def fit_transformed(method, data: Dataset, params: FitParams):
    """Train ``method`` on already-preprocessed data."""
    solver, _, kernel = method.partition("-")
    if kernel == "rbf":
        spec = KernelSpec.rbf(params.gamma if params.gamma is not None else 1.0 / data.d)
    else:
        spec = KernelSpec("linear")
    if solver == "cd":
        cfg = CdConfig(lambda1=params.lambda1, c_upper=params.c_upper, epsilon=params.epsilon,
                       max_sweeps=params.max_sweeps, tol=params.tol)
        return train_cd(data, spec, cfg)
    if solver == "esvr":
        cfg = EsvrConfig(c_upper=params.c_upper, epsilon=params.epsilon,
                         max_sweeps=params.max_sweeps, tol=params.tol)
        return train_esvr(data, spec, cfg)
    if solver == "asgd":
        cfg = AsgdConfig(lambda1=params.lambda1, c_upper=params.c_upper, epsilon=params.epsilon,
                         T=params.T, t0=params.t0, eta0=params.eta0, a=params.a,
                         c_exp=params.c_exp, seed=params.seed)
        return train_asgd(data, cfg)
    if solver == "ols":
        return train_ols(data)
    raise ValueError(f"unknown method {method!r}")


def fit_model(method, train: Dataset, params: FitParams, pca_var=None):
    """Fit preprocessing on ``train`` and a model on the transformed data; predictions come back in raw units."""
    pre = fit_preprocessing(train, pca_var)
    model = fit_transformed(method, pre.transform(train), params)
    model.preprocessing = pre
    return model


def _grid_candidates(params: FitParams, grid):
    if not grid:
        return [params]
    keys = sorted(grid)
    return [replace(params, **dict(zip(keys, combo)))
            for combo in itertools.product(*(grid[k] for k in keys))]


def select_params(method, train: Dataset, params: FitParams, grid, pca_var, seed, holdout=0.2):
    """Pick the grid point with the lowest MSE on an inner validation split of ``train``."""
    candidates = _grid_candidates(params, grid)
    if len(candidates) == 1:
        return candidates[0]
    rng = np.random.default_rng(seed)
    perm = rng.permutation(train.n)
    n_val = max(1, int(round(holdout * train.n)))
    val, fit = perm[:n_val], perm[n_val:]
    inner_train, inner_val = train.subset(np.sort(fit)), train.subset(np.sort(val))
    best, best_mse = None, math.inf
    for cand in candidates:
        model = fit_model(method, inner_train, cand, pca_var)
        mse = evaluate(model.predict(inner_val.features), inner_val.targets).mse
        if mse < best_mse:
            best, best_mse = cand, mse
    return best


@dataclass
class BenchReport:
    dataset: str
    methods: list[str]
    # (method, metric) -> (mean, sd, count)
    summary: dict = field(default_factory=dict)
    # method -> mean wall-clock seconds per fit; excluded from equality
    fit_seconds: dict = field(default_factory=dict, compare=False)

    def records(self, timing=False):
        rows = []
        for method in self.methods:
            for metric in ("mse", "r2"):
                mean, sd, count = self.summary[(method, metric)]
                rows.append((self.dataset, method, metric, mean, sd, count))
            if timing:
                rows.append((self.dataset, method, "fit_seconds", self.fit_seconds[method], 0.0,
                             self.summary[(method, "mse")][2]))
        return rows

    def to_text(self, timing=False) -> str:
        lines = [REPORT_HEADER]
        for dataset, method, metric, mean, sd, count in self.records(timing):
            lines.append(f"{dataset}\t{method}\t{metric}\t{float(mean)!r}\t{float(sd)!r}\t{count}")
        return "\n".join(lines) + "\n"

    def table(self) -> str:
        width = max(12, *(len(m) for m in self.methods))
        head = f"{'method':<{width}}  {'MSE mean':>12}  {'MSE sd':>10}  {'R2 mean':>8}  {'R2 sd':>8}  {'s/fit':>7}"
        lines = [f"dataset: {self.dataset}", head, "-" * len(head)]
        for m in self.methods:
            mse, msd, _ = self.summary[(m, "mse")]
            r2, rsd, _ = self.summary[(m, "r2")]
            lines.append(f"{m:<{width}}  {mse:12.6g}  {msd:10.3g}  {r2:8.4f}  {rsd:8.4f}  "
                         f"{self.fit_seconds.get(m, float('nan')):7.3f}")
        return "\n".join(lines)


def parse_report(text: str) -> list[tuple]:
    rows = []
    for line in text.splitlines():
        if not line or line.startswith("#"):
            continue
        dataset, method, metric, mean, sd, count = line.split("\t")
        rows.append((dataset, method, metric, float(mean), float(sd), int(count)))
    return rows


def _mean_sd(values):
    arr = np.asarray(values, dtype=np.float64)
    sd = float(arr.std(ddof=1)) if arr.size > 1 else 0.0
    return float(arr.mean()), sd


def cross_validate(data: Dataset, methods, params: FitParams | None = None, folds=5, repeats=30,
                   seed=0, pca_var=0.95, grid=None, dataset_name="data") -> BenchReport:
    """Repeated k-fold evaluation.

    Per repeat, fold metrics are averaged into one estimate; the report
    holds the mean and sample standard deviation of those estimates
    across repeats. Repeat ``r`` splits with seed ``(seed, r)``.
    """
    params = params or FitParams()
    methods = list(methods)
    if data.n < folds:
        raise ValueError(f"dataset has {data.n} samples, fewer than {folds} folds")

    per_repeat = {(m, metric): [] for m in methods for metric in ("mse", "r2")}
    seconds = {m: 0.0 for m in methods}
    fits = 0
    for r in range(repeats):
        fold_seed = int(np.random.SeedSequence([seed, r]).generate_state(1)[0])
        plan = make_folds(data.n, folds, fold_seed)
        fold_scores = {key: [] for key in per_repeat}
        for fold in range(folds):
            train_idx, test_idx = plan.split(fold)
            train, test = data.subset(train_idx), data.subset(test_idx)
            for m in methods:
                chosen = select_params(m, train, params, grid, pca_var, seed=fold_seed + fold)
                start = time.perf_counter()
                model = fit_model(m, train, chosen, pca_var)
                seconds[m] += time.perf_counter() - start
                metrics = evaluate(model.predict(test.features), test.targets)
                fold_scores[(m, "mse")].append(metrics.mse)
                fold_scores[(m, "r2")].append(metrics.r2)
            fits += 1
        for key, values in fold_scores.items():
            per_repeat[key].append(float(np.mean(values)))

    report = BenchReport(dataset_name, methods)
    for key, values in per_repeat.items():
        mean, sd = _mean_sd(values)
        report.summary[key] = (mean, sd, repeats)
    report.fit_seconds = {m: seconds[m] / fits for m in methods}
    return report
