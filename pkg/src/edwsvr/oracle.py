"""Slow, independent reference solvers for checking the production solvers.

Nothing here reuses the solver code paths: Gram matrices are rebuilt with
plain loops, inverses are dense pseudo-inverses instead of Cholesky solves,
and optimization is done with first-order methods.
"""

from __future__ import annotations

import math

import numpy as np


def _kernel(spec, a, b):
    if spec.kind == "linear":
        return float(sum(ai * bi for ai, bi in zip(a, b)))
    return math.exp(-spec.gamma * sum((ai - bi) ** 2 for ai, bi in zip(a, b)))


def reference_gram(spec, X):
    """Augmented Gram matrix K(x_i, x_j) + 1 built entry by entry."""
    X = np.asarray(X, dtype=np.float64)
    n = X.shape[0]
    K = np.empty((n, n))
    for i in range(n):
        for j in range(i, n):
            K[i, j] = K[j, i] = _kernel(spec, X[i], X[j]) + 1.0
    return K


def primal_objective(K, y, theta, lambda1, c_upper, epsilon) -> float:
    """Regularized e-DWSVR primal in theta with the slacks written as hinges."""
    n = y.shape[0]
    f = K @ theta
    hinge = np.maximum(0.0, np.abs(f - y) - epsilon)
    return float(0.5 * theta @ f + (lambda1 / n) * (f @ f - 2.0 * y @ f) + c_upper * hinge.sum())


def _smoothed(t, mu):
    # Huber-type smoothing of max(0, t); exact for t <= 0, error at most mu/2
    out = np.where(t > mu, t - 0.5 * mu, 0.5 * t * t / mu)
    return np.where(t > 0.0, out, 0.0)


def minimize_smoothed(B, y, lambda1, c_upper, epsilon, steps=20000, step_size=None,
                      history=None, mu_start=1e-1, mu_final=1e-7, z0=None):
    """Minimize 1/2||z||^2 + (l1/n)(||Bz||^2 - 2y'Bz) + C sum max(0, |Bz - y| - eps).

    The hinge is replaced by a Huber smoothing whose width shrinks
    geometrically from ``mu_start`` to ``mu_final``; each stage runs
    monotone accelerated gradient descent (restarted whenever a step
    fails to descend) for at most ``steps`` iterations. ``history``, if a
    list, receives ``(mu, objective)`` after every iteration; within a
    stage these values never increase.
    """
    B = np.asarray(B, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n = y.shape[0]
    lam1, C, eps = lambda1, c_upper, epsilon
    top = float(np.linalg.norm(B, 2)) ** 2

    def objective(z, mu):
        f = B @ z
        r = f - y
        return 0.5 * z @ z + (lam1 / n) * (f @ f - 2.0 * y @ f) + C * _smoothed(np.abs(r) - eps, mu).sum()

    def gradient(z, mu):
        r = B @ z - y
        slope = np.sign(r) * np.clip((np.abs(r) - eps) / mu, 0.0, 1.0)
        return z + B.T @ ((2.0 * lam1 / n) * r + C * slope)

    z = np.zeros(B.shape[1]) if z0 is None else np.array(z0, dtype=np.float64)
    mu = mu_start
    while True:
        L = 1.0 + top * (2.0 * lam1 / n + C / mu)
        eta = step_size if step_size is not None else 1.0 / L
        fz = objective(z, mu)
        v, t = z, 1.0
        for _ in range(steps):
            move = eta * gradient(v, mu)
            cand = v - move
            fc = objective(cand, mu)
            if fc <= fz:
                t_next = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t * t))
                v = cand + ((t - 1.0) / t_next) * (cand - z)
                z, fz, t = cand, fc, t_next
            elif v is z:
                break  # a plain gradient step from the best point no longer descends
            else:
                v, t = z, 1.0  # momentum overshot: restart from the best point
            if history is not None:
                history.append((mu, fz))
            if np.max(np.abs(move)) < 1e-13:
                break
        if mu <= mu_final:
            break
        mu = max(mu / 10.0, mu_final)
    return z


def solve_primal_pg(data, spec, cfg, steps=20000, step_size=None, history=None,
                    mu_start=1e-1, mu_final=1e-7):
    """Minimize the e-DWSVR primal directly and return the fitted values on the training set.

    The representer form w = X theta is parametrized as z = L' theta with
    K = L L' (eigen-factor of the augmented Gram matrix), so that
    ||w||^2 = ||z||^2, f = L z, and the problem is 1-strongly convex in z.
    See ``minimize_smoothed`` for the descent itself.
    """
    K = reference_gram(spec, data.features)
    evals, evecs = np.linalg.eigh(K)
    B = evecs * np.sqrt(np.clip(evals, 0.0, None))
    z = minimize_smoothed(B, data.targets, cfg.lambda1, cfg.c_upper, cfg.epsilon,
                          steps=steps, step_size=step_size, history=history,
                          mu_start=mu_start, mu_final=mu_final)
    return B @ z


def minimize_linear_objective(data, cfg, steps=20000, mu_final=1e-9):
    """Deterministic full-gradient minimizer of the linear e-DWSVR objective over [w, b]."""
    X = np.asarray(data.features, dtype=np.float64)
    Xa = np.hstack([X, np.ones((X.shape[0], 1))])
    return minimize_smoothed(Xa, data.targets, cfg.lambda1, cfg.c_upper, cfg.epsilon,
                             steps=steps, mu_final=mu_final)


def solve_box_qp_pg(M, q, c_upper, steps=100000, step_size=None, x0=None, tol=0.0):
    """Projected gradient for min 1/2 x'Mx + q'x subject to 0 <= x <= c_upper."""
    M = np.asarray(M, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if step_size is None:
        top = float(np.linalg.eigvalsh(0.5 * (M + M.T)).max())
        step_size = 1.0 / top if top > 0 else 1.0
    x = np.zeros_like(q) if x0 is None else np.clip(np.asarray(x0, dtype=np.float64), 0.0, c_upper)
    for _ in range(steps):
        x_new = np.clip(x - step_size * (M @ x + q), 0.0, c_upper)
        if np.max(np.abs(x_new - x)) <= tol:
            x = x_new
            break
        x = x_new
    return x


def box_qp_objective(M, q, x) -> float:
    return float(0.5 * x @ M @ x + q @ x)


def dual_route_predictions(data, spec, cfg, steps=200000):
    """Fitted values obtained by solving the box-constrained dual with projected gradient.

    Uses a dense pseudo-inverse of Q, so it also covers singular Gram matrices.
    """
    y = np.asarray(data.targets, dtype=np.float64)
    n = y.shape[0]
    K = reference_gram(spec, data.features)
    c = 2.0 * cfg.lambda1 / n
    Q = c * K @ K + K
    H = K @ np.linalg.pinv(Q, hermitian=True) @ K
    H = 0.5 * (H + H.T)
    Hy = H @ y
    M = np.block([[H, -H], [-H, H]])
    q = np.concatenate([cfg.epsilon - y + c * Hy, cfg.epsilon + y - c * Hy])
    x = solve_box_qp_pg(M, q, cfg.c_upper, steps=steps)
    delta = x[:n] - x[n:]
    return H @ (delta + c * y)


def esvr_dual_route_predictions(data, spec, c_upper, epsilon, steps=200000):
    """Fitted values of the bias-augmented e-SVR via projected gradient on its dual."""
    y = np.asarray(data.targets, dtype=np.float64)
    n = y.shape[0]
    K = reference_gram(spec, data.features)
    M = np.block([[K, -K], [-K, K]])
    q = np.concatenate([epsilon - y, epsilon + y])
    x = solve_box_qp_pg(M, q, c_upper, steps=steps)
    return K @ (x[:n] - x[n:])


def finite_diff_check(objective, gradient, point, step=1e-6) -> float:
    """Largest deviation between central differences and ``gradient(point)``, relative to the gradient scale."""
    x = np.asarray(point, dtype=np.float64)
    analytic = np.asarray(gradient(x), dtype=np.float64)
    numeric = np.empty_like(x)
    for j in range(x.size):
        e = np.zeros_like(x)
        e[j] = step
        numeric[j] = (objective(x + e) - objective(x - e)) / (2.0 * step)
    scale = max(np.max(np.abs(analytic)), np.max(np.abs(numeric)), np.finfo(float).tiny)
    return float(np.max(np.abs(numeric - analytic)) / scale)
