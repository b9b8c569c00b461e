"""Linear e-DWSVR trained by averaged stochastic gradient descent.

Objective over the bias-augmented weight vector ``w`` (inputs carry a
trailing 1):

    g(w) = 1/2 ||w||^2 + (lambda1/n) sum_i ((w.x_i)^2 - 2 y_i w.x_i)
           + C sum_i max(0, y_i - w.x_i - eps, w.x_i - y_i - eps)

Sampling uses numpy's ``PCG64`` bit generator seeded with ``seed``; all
T*n indices are drawn up front with ``Generator.integers(0, n, T*n)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data import Dataset, Preprocessing

RNG_ALGORITHM = "PCG64"


@dataclass
class AsgdConfig:
    lambda1: float = 1.0
    c_upper: float = 1.0
    epsilon: float = 0.1
    T: int = 5
    t0: int | None = None  # None: average from the end of the first pass (t0 = n)
    eta0: float = 0.1
    a: float = 1.0
    c_exp: float = 0.75
    seed: int = 0

    def __post_init__(self):
        if self.T < 1:
            raise ValueError("T must be at least 1")
        if self.t0 is not None and self.t0 < 0:
            raise ValueError("t0 must be nonnegative")
        if not self.eta0 > 0:
            raise ValueError("eta0 must be positive")
        if self.a < 0:
            raise ValueError("a must be nonnegative")
        if not 0 < self.c_exp <= 1:
            raise ValueError("c_exp must lie in (0, 1]")
        if self.lambda1 < 0 or self.c_upper < 0 or self.epsilon < 0:
            raise ValueError("lambda1, C and epsilon must be nonnegative")


@dataclass
class LinearModel:
    w_aug: np.ndarray
    preprocessing: Preprocessing | None = None
    info: dict = field(default_factory=dict, compare=False)

    def predict(self, X):
        return predict_linear(self, X)


def augment(X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        return np.append(X, 1.0)
    return np.hstack([X, np.ones((X.shape[0], 1))])


def subgradient_s(w_aug, x_aug, y, epsilon) -> np.ndarray:
    """Subgradient of max(0, y - w.x - eps, w.x - y - eps); zero on and inside the tube."""
    r = float(w_aug @ x_aug) - y
    if r > epsilon:
        return np.array(x_aug, dtype=np.float64)
    if -r > epsilon:
        return -np.array(x_aug, dtype=np.float64)
    return np.zeros_like(w_aug, dtype=np.float64)


def stochastic_gradient(w_aug, x_aug, y, n, cfg) -> np.ndarray:
    """Single-sample estimate 2 l1 x x'w + w - 2 l1 y x + n C s(w); its mean over i is the full gradient."""
    lam = cfg.lambda1
    return (2.0 * lam * float(x_aug @ w_aug)) * x_aug + w_aug - (2.0 * lam * y) * x_aug \
        + (n * cfg.c_upper) * subgradient_s(w_aug, x_aug, y, cfg.epsilon)


def _hinge_signs(Xa, y, w, eps):
    r = Xa @ w - y
    return np.where(r > eps, 1.0, 0.0) - np.where(-r > eps, 1.0, 0.0)


def full_gradient(w_aug, data, cfg) -> np.ndarray:
    """Exact gradient of g (subgradient at kinks, using the zero-on-boundary convention)."""
    Xa, y = _augmented(data)
    n = y.shape[0]
    lam = cfg.lambda1
    signs = _hinge_signs(Xa, y, w_aug, cfg.epsilon)
    return (2.0 * lam / n) * (Xa.T @ (Xa @ w_aug)) + w_aug - (2.0 * lam / n) * (Xa.T @ y) \
        + cfg.c_upper * (Xa.T @ signs)


def objective(w_aug, data, cfg) -> float:
    """g(w) with the constant y'y term omitted."""
    Xa, y = _augmented(data)
    n = y.shape[0]
    f = Xa @ w_aug
    hinge = np.maximum(0.0, np.abs(f - y) - cfg.epsilon)
    return float(0.5 * w_aug @ w_aug + (cfg.lambda1 / n) * (f @ f - 2.0 * y @ f)
                 + cfg.c_upper * hinge.sum())


def _augmented(data):
    if isinstance(data, Dataset):
        return augment(data.features), data.targets
    Xa, y = data
    return np.asarray(Xa, dtype=np.float64), np.asarray(y, dtype=np.float64)


def learning_rate(t, cfg) -> float:
    return cfg.eta0 * (1.0 + cfg.a * cfg.eta0 * t) ** (-cfg.c_exp)


def averaging_rate(t, t0) -> float:
    return 1.0 / max(1.0, t - t0)


def train_asgd(data: Dataset, cfg: AsgdConfig | None = None) -> LinearModel:
    """Averaged SGD on g starting from w = 0; returns the averaged iterate."""
    cfg = cfg or AsgdConfig()
    Xa = augment(data.features)
    y = data.targets
    n, dim = Xa.shape
    t0 = n if cfg.t0 is None else cfg.t0
    lam2 = 2.0 * cfg.lambda1
    nC = n * cfg.c_upper
    eps = cfg.epsilon

    rng = np.random.Generator(np.random.PCG64(cfg.seed))
    order = rng.integers(0, n, size=cfg.T * n)

    w = np.zeros(dim)
    w_bar = np.zeros(dim)
    for t, i in enumerate(order, start=1):
        x = Xa[i]
        fx = float(x @ w)
        r = fx - y[i]
        # gradient coefficient on x: quadratic terms plus the hinge subgradient
        coef = lam2 * (fx - y[i])
        if r > eps:
            coef += nC
        elif -r > eps:
            coef -= nC
        phi = cfg.eta0 * (1.0 + cfg.a * cfg.eta0 * t) ** (-cfg.c_exp)
        w = (1.0 - phi) * w - (phi * coef) * x
        delta = 1.0 / max(1.0, t - t0)
        w_bar = delta * w + (1.0 - delta) * w_bar
    return LinearModel(w_bar, info={"iterations": int(order.size), "last_iterate": w})


def predict_linear(model: LinearModel, X):
    X = np.asarray(X, dtype=np.float64)
    single = X.ndim == 1
    Xm = X.reshape(1, -1) if single else X
    if model.preprocessing is not None:
        if Xm.shape[1] != model.preprocessing.input_dim:
            raise ValueError(f"expected {model.preprocessing.input_dim} features, got {Xm.shape[1]}")
        Xm = model.preprocessing.transform_features(Xm)
    if Xm.shape[1] + 1 != model.w_aug.shape[0]:
        raise ValueError(f"expected {model.w_aug.shape[0] - 1} features, got {Xm.shape[1]}")
    out = Xm @ model.w_aug[:-1] + model.w_aug[-1]
    if model.preprocessing is not None:
        out = model.preprocessing.inverse_targets(out)
    return float(out[0]) if single else out
