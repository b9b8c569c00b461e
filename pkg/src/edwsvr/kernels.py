"""Kernel evaluation and the bias-augmented Gram matrix.

The intercept is absorbed by appending a constant 1 to every mapped input,
so every kernel value used for training or prediction carries a ``+ 1``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist


@dataclass(frozen=True)
class KernelSpec:
    kind: str = "linear"
    gamma: float | None = None

    def __post_init__(self):
        if self.kind not in ("linear", "rbf"):
            raise ValueError(f"unknown kernel {self.kind!r}")
        if self.kind == "rbf" and (self.gamma is None or not self.gamma > 0):
            raise ValueError("rbf kernel needs gamma > 0")

    @classmethod
    def rbf(cls, gamma):
        return cls("rbf", float(gamma))

    @classmethod
    def default_rbf(cls, d):
        """RBF kernel with gamma = 1/d."""
        return cls("rbf", 1.0 / max(d, 1))


@dataclass
class GramMatrix:
    values: np.ndarray
    spec: KernelSpec
    augmented: bool = True

    @property
    def n(self) -> int:
        return self.values.shape[0]


def kernel_eval(spec: KernelSpec, a, b) -> float:
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.size} vs {b.size}")
    if spec.kind == "linear":
        return float(a @ b)
    diff = a - b
    return float(np.exp(-spec.gamma * (diff @ diff)))


def _cross(spec, A, B):
    if spec.kind == "linear":
        return A @ B.T
    return np.exp(-spec.gamma * cdist(A, B, "sqeuclidean"))


def gram_augmented(spec: KernelSpec, data) -> GramMatrix:
    """Return G[i, j] = K(x_i, x_j) + 1 over the rows of ``data`` (a Dataset or matrix)."""
    X = np.asarray(getattr(data, "features", data), dtype=np.float64)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    G = _cross(spec, X, X) + 1.0
    if spec.kind == "linear":
        G = 0.5 * (G + G.T)
    return GramMatrix(G, spec)


def kernel_rows(spec: KernelSpec, support_points, queries) -> np.ndarray:
    """Augmented kernel values between every query (rows) and every support point (columns)."""
    S = np.asarray(support_points, dtype=np.float64)
    Qm = np.asarray(queries, dtype=np.float64)
    if Qm.ndim == 1:
        Qm = Qm.reshape(1, -1)
    if S.shape[0] == 0:
        return np.zeros((Qm.shape[0], 0))
    if S.ndim != 2 or S.shape[1] != Qm.shape[1]:
        raise ValueError(f"dimension mismatch: supports have {S.shape[-1]} columns, "
                         f"query has {Qm.shape[1]}")
    return _cross(spec, Qm, S) + 1.0


def kernel_row(spec: KernelSpec, support_points, query) -> np.ndarray:
    query = np.asarray(query, dtype=np.float64).ravel()
    S = np.asarray(support_points, dtype=np.float64)
    if S.size == 0:
        return np.zeros(0)
    return kernel_rows(spec, S, query.reshape(1, -1))[0]
