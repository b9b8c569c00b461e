"""Reference regressors: bias-augmented e-SVR and ordinary least squares."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .asgd import LinearModel, augment
from .cd import SPARSITY_THRESHOLD, DualModel
from .data import Dataset
from .kernels import KernelSpec, gram_augmented

OLS_RIDGE = 1e-10


@dataclass
class EsvrConfig:
    c_upper: float = 1.0
    epsilon: float = 0.1
    max_sweeps: int = 1000
    tol: float = 1e-6

    def __post_init__(self):
        if self.c_upper < 0 or self.epsilon < 0:
            raise ValueError("C and epsilon must be nonnegative")
        if not self.tol > 0:
            raise ValueError("tol must be positive")


def esvr_dual_objective(G, y, alpha_pair, epsilon) -> float:
    """1/2 theta'G theta + eps sum(alpha + alpha*) - y'theta with theta = alpha - alpha*."""
    n = y.shape[0]
    theta = alpha_pair[:n] - alpha_pair[n:]
    return float(0.5 * theta @ G @ theta + epsilon * alpha_pair.sum() - y @ theta)


@njit(cache=True)
def _esvr_sweeps(G, y, eps, C, alpha_pair, theta, fitted, max_sweeps, tol):
    n = y.shape[0]
    for sweep in range(max_sweeps):
        max_step = 0.0
        for k in range(2 * n):
            i = k if k < n else k - n
            r = fitted[i] - y[i]
            grad = eps + r if k < n else eps - r
            old = alpha_pair[k]
            new = old - grad / G[i, i]
            if new < 0.0:
                new = 0.0
            elif new > C:
                new = C
            step = new - old
            if step != 0.0:
                alpha_pair[k] = new
                s = step if k < n else -step
                theta[i] += s
                for j in range(n):
                    fitted[j] += s * G[i, j]
                if abs(step) > max_step:
                    max_step = abs(step)
        if max_step < tol:
            return sweep + 1, True
    return max_sweeps, False


def _esvr_python(G, y, cfg, alpha_pair, theta, callback):
    n = y.shape[0]
    for sweep in range(cfg.max_sweeps):
        max_step = 0.0
        for k in range(2 * n):
            i = k if k < n else k - n
            r = float(G[i] @ theta) - y[i]
            grad = cfg.epsilon + r if k < n else cfg.epsilon - r
            old = alpha_pair[k]
            new = min(max(old - grad / G[i, i], 0.0), cfg.c_upper)
            if new != old:
                alpha_pair[k] = new
                theta[i] += (new - old) if k < n else (old - new)
                max_step = max(max_step, abs(new - old))
            callback(k, alpha_pair, theta)
        if max_step < cfg.tol:
            return sweep + 1, True
    return cfg.max_sweeps, False


def train_esvr(data: Dataset, spec: KernelSpec, cfg: EsvrConfig | None = None,
               callback=None) -> DualModel:
    """Coordinate descent on the e-SVR dual with the bias folded into the kernel.

    Folding the bias in removes the sum(alpha - alpha*) = 0 constraint, so
    every alpha_i and alpha*_i can be updated on its own. ``callback(k,
    alpha_pair, theta)`` switches to a pure-Python loop for instrumentation.
    """
    cfg = cfg or EsvrConfig()
    G = gram_augmented(spec, data).values
    y = np.ascontiguousarray(data.targets)
    n = y.shape[0]
    alpha_pair = np.zeros(2 * n)
    theta = np.zeros(n)
    if cfg.c_upper == 0.0 or cfg.max_sweeps == 0:
        sweeps, converged = 0, True
    elif callback is not None:
        sweeps, converged = _esvr_python(G, y, cfg, alpha_pair, theta, callback)
    else:
        sweeps, converged = _esvr_sweeps(G, y, float(cfg.epsilon), float(cfg.c_upper), alpha_pair,
                                         theta, np.zeros(n), int(cfg.max_sweeps), float(cfg.tol))
    keep = np.abs(theta) > SPARSITY_THRESHOLD
    info = {"sweeps": int(sweeps), "converged": bool(converged), "alpha_pair": alpha_pair}
    return DualModel(theta[keep].copy(), data.features[keep].copy(), spec, info=info)


def train_ols(data: Dataset) -> LinearModel:
    """Least squares on [x, 1] through the normal equations with a 1e-10 ridge."""
    Xa = augment(data.features)
    gram = Xa.T @ Xa + OLS_RIDGE * np.eye(Xa.shape[1])
    w = np.linalg.solve(gram, Xa.T @ data.targets)
    return LinearModel(w)
