"""Versioned, line-oriented text format for trained models.

Floats are written with ``repr`` so a save/load round trip is exact::

    edwsvr-model v1
    kind dual                       # or: kind linear
    kernel rbf 0.5                  # dual only; or: kernel linear
    normalization 2                 # or: normalization none
    feature <min> <max>             # one line per input feature
    target <min> <max>
    pca none                        # or: pca <d> <k> <retained>, then
                                    #   mean <d values>, then d lines
                                    #   component <k values>
    coefficients <k> <d>            # dual: k lines "<theta> <x_1> ... <x_d>"
    weights <d+1>                   # linear: one line with all weights
    end
"""

from __future__ import annotations

import io

import numpy as np

from .asgd import LinearModel
from .cd import DualModel
from .data import NormalizationMap, PcaTransform, Preprocessing
from .kernels import KernelSpec

HEADER = "edwsvr-model v1"


class ModelFormatError(ValueError):
    pass


def _fmt(values):
    return " ".join(repr(float(v)) for v in np.ravel(values))


def dumps(model) -> str:
    out = io.StringIO()
    w = out.write
    w(HEADER + "\n")
    if isinstance(model, DualModel):
        w("kind dual\n")
        if model.spec.kind == "rbf":
            w(f"kernel rbf {float(model.spec.gamma)!r}\n")
        else:
            w("kernel linear\n")
    elif isinstance(model, LinearModel):
        w("kind linear\n")
    else:
        raise TypeError(f"cannot serialize {type(model).__name__}")

    pre = model.preprocessing
    if pre is None:
        w("normalization none\n")
    else:
        nm = pre.norm
        w(f"normalization {nm.feature_min.size}\n")
        for lo, hi in zip(nm.feature_min, nm.feature_max):
            w(f"feature {_fmt([lo, hi])}\n")
        w(f"target {_fmt([nm.target_min, nm.target_max])}\n")
        if pre.pca is None:
            w("pca none\n")
        else:
            p = pre.pca
            d, k = p.components.shape
            w(f"pca {d} {k} {float(p.retained_variance_fraction)!r}\n")
            w(f"mean {_fmt(p.mean)}\n")
            for row in p.components:
                w(f"component {_fmt(row)}\n")

    if isinstance(model, DualModel):
        w(f"coefficients {model.theta.size} {model.support_points.shape[1]}\n")
        for coef, row in zip(model.theta, model.support_points):
            w(f"{_fmt([coef, *row])}\n")
    else:
        w(f"weights {model.w_aug.size}\n")
        w(f"{_fmt(model.w_aug)}\n")
    w("end\n")
    return out.getvalue()


class _Lines:
    def __init__(self, text):
        self.lines = text.splitlines()
        self.pos = 0

    def next(self, keyword=None):
        if self.pos >= len(self.lines):
            raise ModelFormatError("unexpected end of model file")
        parts = self.lines[self.pos].split()
        self.pos += 1
        if keyword is not None and (not parts or parts[0] != keyword):
            raise ModelFormatError(f"line {self.pos}: expected {keyword!r}")
        return parts


def _floats(parts):
    try:
        return np.array([float(p) for p in parts])
    except ValueError as exc:
        raise ModelFormatError(str(exc)) from None


def loads(text: str):
    lines = _Lines(text)
    header = " ".join(lines.next())
    if header != HEADER:
        raise ModelFormatError(f"unsupported model header {header!r}")
    kind = lines.next("kind")[1]
    if kind not in ("dual", "linear"):
        raise ModelFormatError(f"unknown model kind {kind!r}")
    spec = None
    if kind == "dual":
        parts = lines.next("kernel")
        spec = KernelSpec("rbf", float(parts[2])) if parts[1] == "rbf" else KernelSpec(parts[1])

    parts = lines.next("normalization")
    pre = None
    if parts[1] != "none":
        d = int(parts[1])
        bounds = np.array([_floats(lines.next("feature")[1:]) for _ in range(d)]).reshape(d, 2)
        t_lo, t_hi = _floats(lines.next("target")[1:])
        norm = NormalizationMap(bounds[:, 0].copy(), bounds[:, 1].copy(), float(t_lo), float(t_hi))
        parts = lines.next("pca")
        pca = None
        if parts[1] != "none":
            pd_, k, retained = int(parts[1]), int(parts[2]), float(parts[3])
            mean = _floats(lines.next("mean")[1:])
            comps = np.array([_floats(lines.next("component")[1:]) for _ in range(pd_)]).reshape(pd_, k)
            pca = PcaTransform(mean, comps, retained)
        pre = Preprocessing(norm, pca)

    if kind == "dual":
        parts = lines.next("coefficients")
        k, d = int(parts[1]), int(parts[2])
        rows = np.array([_floats(lines.next()) for _ in range(k)]).reshape(k, d + 1)
        model = DualModel(rows[:, 0].copy(), rows[:, 1:].copy(), spec, pre)
    else:
        size = int(lines.next("weights")[1])
        w_aug = _floats(lines.next())
        if w_aug.size != size:
            raise ModelFormatError(f"expected {size} weights, found {w_aug.size}")
        model = LinearModel(w_aug, pre)
    lines.next("end")
    return model


def save_model(model, path):
    with open(path, "w") as fh:
        fh.write(dumps(model))


def load_model(path):
    with open(path) as fh:
        return loads(fh.read())
