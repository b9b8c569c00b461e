"""Kernel e-DWSVR trained by dual coordinate descent.

The primal

    min_w  1/2 ||w||^2 + (lambda1/n) (w'XX'w - 2 (Xy)'w) + C sum(xi + xi*)
    s.t.   y_i - w.phi(x_i) <= eps + xi_i,  w.phi(x_i) - y_i <= eps + xi*_i

is rewritten through ``w = X theta`` into a quadratic over ``theta`` with
``Q = 2 lambda1 G'G / n + G`` and ``p = -2 lambda1 G y / n``. Its dual over
``beta' = [beta, beta*] in [0, C]^2n`` has Hessian blocks ``+-H`` with
``H = G Q^-1 G``, and the primal coefficients are recovered as

    theta = Q^-1 (G (beta - beta*) - p) = A (beta - beta* + 2 lambda1 y / n),   A = Q^-1 G.

Coordinates are indexed 0..2n-1: ``k < n`` addresses ``beta[k]`` and
``k >= n`` addresses ``beta*[k - n]``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numba import njit
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from .data import Dataset, Preprocessing
from .kernels import GramMatrix, KernelSpec, gram_augmented, kernel_rows

SPARSITY_THRESHOLD = 1e-12
MAX_RIDGE = 1e-2


class SolverError(RuntimeError):
    """Numerical failure inside a solver (e.g. an unfactorizable system)."""


@dataclass
class CdConfig:
    lambda1: float = 1.0
    c_upper: float = 1.0
    epsilon: float = 0.1
    max_sweeps: int = 1000
    tol: float = 1e-6
    # relative to trace(Q)/n; escalated x10 on factorization failure
    ridge: float = 1e-8

    def __post_init__(self):
        if self.lambda1 < 0 or self.c_upper < 0 or self.epsilon < 0:
            raise ValueError("lambda1, C and epsilon must be nonnegative")
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.ridge < 0:
            raise ValueError("ridge must be nonnegative")
        if self.max_sweeps < 0:
            raise ValueError("max_sweeps must be nonnegative")


@dataclass
class PrecomputedDual:
    G: GramMatrix
    A: np.ndarray
    H: np.ndarray
    h_diag: np.ndarray
    q_factor: tuple
    lambda1: float
    ridge_used: float

    @property
    def n(self) -> int:
        return self.H.shape[0]


@dataclass
class DualState:
    beta_prime: np.ndarray  # [beta, beta*], length 2n
    theta: np.ndarray

    @property
    def n(self) -> int:
        return self.theta.shape[0]

    @property
    def beta(self):
        return self.beta_prime[: self.n]

    @property
    def beta_star(self):
        return self.beta_prime[self.n:]

    def copy(self) -> "DualState":
        return DualState(self.beta_prime.copy(), self.theta.copy())


@dataclass
class DualModel:
    theta: np.ndarray
    support_points: np.ndarray
    spec: KernelSpec
    preprocessing: Preprocessing | None = None
    info: dict = field(default_factory=dict, compare=False)

    def predict(self, X):
        return predict_dual(self, X)


def precompute(G: GramMatrix, cfg: CdConfig) -> PrecomputedDual:
    """Factor Q once and form A = Q^-1 G and H = G A."""
    Gv = G.values
    n = Gv.shape[0]
    Q = (2.0 * cfg.lambda1 / n) * (Gv.T @ Gv) + Gv
    Q = 0.5 * (Q + Q.T)
    scale = np.trace(Q) / n

    ridge = cfg.ridge
    while True:
        try:
            factor = cho_factor(Q + (ridge * scale) * np.eye(n), lower=True)
            break
        except LinAlgError:
            ridge = max(ridge * 10.0, 1e-8)
            if ridge > MAX_RIDGE:
                raise SolverError(
                    "Q is not positive definite even with ridge "
                    f"{MAX_RIDGE:g} * trace(Q)/n; the Gram matrix is badly conditioned"
                ) from None

    A = cho_solve(factor, Gv)
    H = Gv @ A
    H = 0.5 * (H + H.T)
    return PrecomputedDual(G, A, H, np.diag(H).copy(), factor, cfg.lambda1, ridge)


def cd_gradient(k, theta, G, y, epsilon) -> float:
    """Partial derivative of the dual objective along coordinate ``k`` (0-based)."""
    Gv = getattr(G, "values", G)
    n = Gv.shape[0]
    if not 0 <= k < 2 * n:
        raise IndexError(f"coordinate {k} outside [0, {2 * n})")
    i = k if k < n else k - n
    residual = float(Gv[i] @ theta) - y[i]
    return epsilon + residual if k < n else epsilon - residual


def theta_from_duals(pre: PrecomputedDual, beta_prime, y) -> np.ndarray:
    """theta = Q^-1 (G (beta - beta*) - p), computed from scratch."""
    n = pre.n
    delta = beta_prime[:n] - beta_prime[n:]
    p = -(2.0 * pre.lambda1 / n) * (pre.G.values @ y)
    return cho_solve(pre.q_factor, pre.G.values @ delta - p)


def dual_objective(pre: PrecomputedDual, beta_prime, y, epsilon) -> float:
    """Dual objective with the constant term dropped.

    1/2 d'Hd + (2 lambda1/n) d'Hy - y'd + eps * sum(beta'),  d = beta - beta*.
    """
    n = pre.n
    delta = beta_prime[:n] - beta_prime[n:]
    Hd = pre.H @ delta
    c = 2.0 * pre.lambda1 / n
    return float(0.5 * delta @ Hd + c * (delta @ (pre.H @ y)) - y @ delta
                 + epsilon * beta_prime.sum())


def initial_state(pre: PrecomputedDual, y) -> DualState:
    n = pre.n
    theta = (2.0 * pre.lambda1 / n) * (pre.A @ y)
    return DualState(np.zeros(2 * n), theta)


def cd_update(k, state: DualState, pre: PrecomputedDual, cfg: CdConfig, y) -> DualState:
    """One clipped Newton step on coordinate ``k``; updates ``state`` in place and returns it."""
    n = pre.n
    grad = cd_gradient(k, state.theta, pre.G, y, cfg.epsilon)
    i = k if k < n else k - n
    old = state.beta_prime[k]
    new = min(max(old - grad / pre.h_diag[i], 0.0), cfg.c_upper)
    step = new - old
    if step != 0.0:
        state.beta_prime[k] = new
        state.theta += (step if k < n else -step) * pre.A[:, i]
    return state


@njit(cache=True)
def _cd_sweeps(H, At, y, eps, C, beta_prime, theta, fitted, max_sweeps, tol):
    n = y.shape[0]
    for sweep in range(max_sweeps):
        max_step = 0.0
        for k in range(2 * n):
            if k < n:
                i = k
                grad = eps + (fitted[i] - y[i])
            else:
                i = k - n
                grad = eps - (fitted[i] - y[i])
            old = beta_prime[k]
            new = old - grad / H[i, i]
            if new < 0.0:
                new = 0.0
            elif new > C:
                new = C
            step = new - old
            if step != 0.0:
                beta_prime[k] = new
                s = step if k < n else -step
                for j in range(n):
                    theta[j] += s * At[i, j]
                    fitted[j] += s * H[i, j]
                if abs(step) > max_step:
                    max_step = abs(step)
        if max_step < tol:
            return sweep + 1, True
    return max_sweeps, False


def _run_python(pre, state, y, cfg, callback):
    n = pre.n
    for sweep in range(cfg.max_sweeps):
        max_step = 0.0
        for k in range(2 * n):
            old = state.beta_prime[k]
            cd_update(k, state, pre, cfg, y)
            max_step = max(max_step, abs(state.beta_prime[k] - old))
            callback(k, state)
        if max_step < cfg.tol:
            return sweep + 1, True
    return cfg.max_sweeps, False


def solve_dual(pre: PrecomputedDual, y, cfg: CdConfig, callback=None) -> tuple[DualState, dict]:
    """Run cyclic CD sweeps (ascending k) from the zero dual point.

    ``callback(k, state)``, when given, is invoked after every coordinate
    update; that path runs in pure Python and is meant for instrumentation.
    """
    y = np.ascontiguousarray(y, dtype=np.float64)
    state = initial_state(pre, y)
    if cfg.c_upper == 0.0 or cfg.max_sweeps == 0:
        return state, {"sweeps": 0, "converged": True}
    if callback is not None:
        sweeps, converged = _run_python(pre, state, y, cfg, callback)
    else:
        fitted = pre.G.values @ state.theta
        sweeps, converged = _cd_sweeps(
            pre.H, np.ascontiguousarray(pre.A.T), y, float(cfg.epsilon), float(cfg.c_upper),
            state.beta_prime, state.theta, fitted, int(cfg.max_sweeps), float(cfg.tol),
        )
    return state, {"sweeps": int(sweeps), "converged": bool(converged)}


def train_cd(data: Dataset, spec: KernelSpec, cfg: CdConfig | None = None,
             callback=None) -> DualModel:
    cfg = cfg or CdConfig()
    G = gram_augmented(spec, data)
    pre = precompute(G, cfg)
    state, info = solve_dual(pre, data.targets, cfg, callback)
    info["ridge"] = pre.ridge_used
    keep = np.abs(state.theta) > SPARSITY_THRESHOLD
    return DualModel(state.theta[keep].copy(), data.features[keep].copy(), spec, info=info)


def predict_dual(model: DualModel, X):
    """Evaluate sum_i theta_i (K(x_i, x) + 1); ``X`` is one query or a matrix of queries.

    When the model carries preprocessing, ``X`` is in raw units and the
    result is mapped back to raw target units.
    """
    X = np.asarray(X, dtype=np.float64)
    single = X.ndim == 1
    Xm = X.reshape(1, -1) if single else X
    if model.preprocessing is not None:
        if Xm.shape[1] != model.preprocessing.input_dim:
            raise ValueError(f"expected {model.preprocessing.input_dim} features, got {Xm.shape[1]}")
        Xm = model.preprocessing.transform_features(Xm)
    if model.theta.size == 0:
        out = np.zeros(Xm.shape[0])
    else:
        out = kernel_rows(model.spec, model.support_points, Xm) @ model.theta
    if model.preprocessing is not None:
        out = model.preprocessing.inverse_targets(out)
    return float(out[0]) if single else out


def slack_diagnostics(model, data: Dataset, epsilon):
    """Slacks (xi, xi*) of each sample relative to the eps-tube of ``model``."""
    f = np.asarray(model.predict(data.features))
    xi = np.maximum(0.0, data.targets - f - epsilon)
    xi_star = np.maximum(0.0, f - data.targets - epsilon)
    return xi, xi_star
