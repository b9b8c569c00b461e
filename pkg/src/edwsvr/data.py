"""Dataset ingestion, preprocessing, fold splitting, metrics and synthetic data."""

from __future__ import annotations

import csv
import math
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


class DataFormatError(ValueError):
    """Raised when a dataset file cannot be parsed."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


@dataclass
class Dataset:
    features: np.ndarray
    targets: np.ndarray
    feature_names: list[str] | None = None

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        self.targets = np.asarray(self.targets, dtype=np.float64).ravel()
        if self.features.ndim == 1:
            self.features = self.features.reshape(-1, 1)
        if self.features.ndim != 2:
            raise ValueError("features must be a 2-d array")
        n = self.features.shape[0]
        if n < 1:
            raise ValueError("dataset must contain at least one sample")
        if self.targets.shape[0] != n:
            raise ValueError(f"{n} feature rows but {self.targets.shape[0]} targets")
        if not (np.all(np.isfinite(self.features)) and np.all(np.isfinite(self.targets))):
            raise ValueError("dataset contains non-finite values")
        if self.feature_names is not None and len(self.feature_names) != self.features.shape[1]:
            raise ValueError("feature_names length does not match feature count")

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]

    def subset(self, index) -> "Dataset":
        index = np.asarray(index)
        return Dataset(self.features[index], self.targets[index], self.feature_names)


# ---------------------------------------------------------------------------
# Reading and writing
# ---------------------------------------------------------------------------

def _parse_float(text, line):
    try:
        value = float(text)
    except ValueError:
        raise DataFormatError(f"non-numeric value {text!r}", line) from None
    if not math.isfinite(value):
        raise DataFormatError(f"non-finite value {text!r}", line)
    return value


def read_csv_table(path):
    """Header names and an (n, width) float array from a CSV file with a header row."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    # csv.reader yields [] for blank lines; keep line numbers for messages
    numbered = [(i + 1, row) for i, row in enumerate(rows) if row and any(c.strip() for c in row)]
    if not numbered:
        raise DataFormatError(f"{path}: empty file")
    _, header = numbered[0]
    header = [h.strip() for h in header]
    width = len(header)
    body = numbered[1:]
    if not body:
        raise DataFormatError(f"{path}: no data rows")
    values = np.empty((len(body), width))
    for r, (line, row) in enumerate(body):
        if len(row) != width:
            raise DataFormatError(f"expected {width} fields, found {len(row)}", line)
        values[r] = [_parse_float(c.strip(), line) for c in row]
    return header, values


def _load_csv(path, target_column):
    header, values = read_csv_table(path)
    width = len(header)
    if target_column is None:
        target_idx = width - 1
    elif isinstance(target_column, int) or str(target_column).lstrip("-").isdigit():
        target_idx = int(target_column)
        if target_idx < 0:
            target_idx += width
        if not 0 <= target_idx < width:
            raise DataFormatError(f"target column index {target_column} out of range")
    else:
        if target_column not in header:
            raise DataFormatError(f"missing target column {target_column!r}")
        target_idx = header.index(target_column)
    keep = [j for j in range(width) if j != target_idx]
    return Dataset(values[:, keep], values[:, target_idx], [header[j] for j in keep])


_PAIR = re.compile(r"^(\d+):(\S+)$")


def _load_sparse(path, n_features):
    targets, rows = [], []
    max_index = 0
    with open(path) as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            targets.append(_parse_float(parts[0], line_no))
            entries = {}
            prev = 0
            for tok in parts[1:]:
                m = _PAIR.match(tok)
                if m is None:
                    raise DataFormatError(f"malformed index:value pair {tok!r}", line_no)
                idx = int(m.group(1))
                if idx < 1 or idx <= prev:
                    raise DataFormatError("indices must be 1-based and ascending", line_no)
                prev = idx
                entries[idx] = _parse_float(m.group(2), line_no)
            max_index = max(max_index, prev)
            rows.append(entries)
    if not rows:
        raise DataFormatError(f"{path}: empty file")
    d = max_index if n_features is None else n_features
    if max_index > d:
        raise DataFormatError(f"feature index {max_index} exceeds declared width {d}")
    features = np.zeros((len(rows), d))
    for r, entries in enumerate(rows):
        for idx, value in entries.items():
            features[r, idx - 1] = value
    return Dataset(features, np.array(targets))


def load_dataset(path, format="csv", target_column=None, n_features=None) -> Dataset:
    """Read a dataset from disk.

    ``format`` is ``"csv"`` (header row, comma separated) or ``"sparse"``
    (``<target> <index>:<value> ...`` with 1-based ascending indices).
    For CSV, ``target_column`` is a header name or a column index and
    defaults to the last column. For sparse files ``n_features`` fixes
    the width; otherwise the largest index seen is used.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(path)
    if format == "csv":
        return _load_csv(path, target_column)
    if format == "sparse":
        return _load_sparse(path, n_features)
    raise ValueError(f"unknown dataset format {format!r}")


def write_dataset(path, data: Dataset, format="csv", target_name="y"):
    """Write ``data`` in a form ``load_dataset`` reads back bit-exactly."""
    if format == "csv":
        names = data.feature_names or [f"x{j + 1}" for j in range(data.d)]
        with open(path, "w", newline="") as fh:
            fh.write(",".join([*names, target_name]) + "\n")
            for row, y in zip(data.features, data.targets):
                fh.write(",".join(repr(float(v)) for v in (*row, y)) + "\n")
    elif format == "sparse":
        with open(path, "w") as fh:
            for row, y in zip(data.features, data.targets):
                pairs = [f"{j + 1}:{float(v)!r}" for j, v in enumerate(row) if v != 0.0]
                fh.write(" ".join([repr(float(y)), *pairs]) + "\n")
    else:
        raise ValueError(f"unknown dataset format {format!r}")


# ---------------------------------------------------------------------------
# Min-max normalization
# ---------------------------------------------------------------------------

@dataclass
class NormalizationMap:
    feature_min: np.ndarray
    feature_max: np.ndarray
    target_min: float
    target_max: float

    def transform_features(self, X):
        X = np.asarray(X, dtype=np.float64)
        span = self.feature_max - self.feature_min
        # constant features collapse to 0
        out = np.zeros(np.broadcast_shapes(X.shape, span.shape))
        return np.divide(X - self.feature_min, span, out=out, where=span > 0)

    def inverse_features(self, Z):
        Z = np.asarray(Z, dtype=np.float64)
        return Z * (self.feature_max - self.feature_min) + self.feature_min

    def transform_targets(self, y):
        y = np.asarray(y, dtype=np.float64)
        span = self.target_max - self.target_min
        if span <= 0:
            return np.zeros_like(y)
        return (y - self.target_min) / span

    def inverse_targets(self, t):
        t = np.asarray(t, dtype=np.float64)
        return t * (self.target_max - self.target_min) + self.target_min


def fit_minmax(train: Dataset) -> NormalizationMap:
    return NormalizationMap(
        feature_min=train.features.min(axis=0),
        feature_max=train.features.max(axis=0),
        target_min=float(train.targets.min()),
        target_max=float(train.targets.max()),
    )


def apply_minmax(nmap: NormalizationMap, data: Dataset) -> Dataset:
    """Map features and targets affinely; values outside the fitted range are not clipped."""
    return Dataset(
        nmap.transform_features(data.features),
        nmap.transform_targets(data.targets),
        data.feature_names,
    )


# ---------------------------------------------------------------------------
# PCA
# ---------------------------------------------------------------------------

@dataclass
class PcaTransform:
    mean: np.ndarray
    components: np.ndarray  # d x k, orthonormal columns
    retained_variance_fraction: float

    @property
    def k(self) -> int:
        return self.components.shape[1]

    def transform(self, X):
        return (np.asarray(X, dtype=np.float64) - self.mean) @ self.components


def fit_pca(train: Dataset, variance_threshold=0.95) -> PcaTransform:
    """Fit a PCA keeping the fewest components whose explained variance reaches the threshold."""
    if not 0.0 < variance_threshold <= 1.0:
        raise ValueError("variance_threshold must lie in (0, 1]")
    if train.n < 2:
        raise ValueError("PCA needs at least two samples")
    mean = train.features.mean(axis=0)
    centered = train.features - mean
    _, sing, vt = np.linalg.svd(centered, full_matrices=False)
    var = sing**2
    total = var.sum()
    if total <= 0.0:
        raise ValueError("zero total variance: all rows are identical")

    # tail[k] = variance discarded when keeping the first k components
    tail = np.concatenate([np.cumsum(var[::-1])[::-1], [0.0]])
    retained = 1.0 - tail / total
    k = int(np.argmax(retained >= variance_threshold))
    k = max(k, 1)

    components = vt[:k].T.copy()
    # deterministic sign: largest-magnitude loading positive
    for j in range(k):
        col = components[:, j]
        if col[np.argmax(np.abs(col))] < 0:
            components[:, j] = -col
    return PcaTransform(mean, components, float(retained[k]))


def apply_pca(t: PcaTransform, data: Dataset) -> Dataset:
    return Dataset(t.transform(data.features), data.targets)


@dataclass
class Preprocessing:
    """Normalization followed by an optional PCA projection, fitted on a training split."""

    norm: NormalizationMap
    pca: PcaTransform | None = None

    def transform_features(self, X):
        Z = self.norm.transform_features(X)
        if self.pca is not None:
            Z = self.pca.transform(Z)
        return Z

    def transform(self, data: Dataset) -> Dataset:
        out = apply_minmax(self.norm, data)
        if self.pca is not None:
            out = apply_pca(self.pca, out)
        return out

    def inverse_targets(self, t):
        return self.norm.inverse_targets(t)

    @property
    def input_dim(self) -> int:
        return self.norm.feature_min.shape[0]


def fit_preprocessing(train: Dataset, pca_var=None) -> Preprocessing:
    norm = fit_minmax(train)
    pca = None
    if pca_var is not None:
        pca = fit_pca(apply_minmax(norm, train), pca_var)
    return Preprocessing(norm, pca)


# ---------------------------------------------------------------------------
# Folds and metrics
# ---------------------------------------------------------------------------

@dataclass
class FoldPlan:
    k: int
    assignments: np.ndarray
    seed: int

    def split(self, fold):
        """Return (train_index, test_index) for one fold."""
        test = np.flatnonzero(self.assignments == fold)
        train = np.flatnonzero(self.assignments != fold)
        return train, test

    def sizes(self):
        return np.bincount(self.assignments, minlength=self.k)


def make_folds(n, k, seed=0) -> FoldPlan:
    if k < 2:
        raise ValueError("need at least two folds")
    if n < k:
        raise ValueError(f"cannot split {n} samples into {k} folds")
    perm = np.random.default_rng(seed).permutation(n)
    assignments = np.empty(n, dtype=np.int64)
    assignments[perm] = np.arange(n) % k
    return FoldPlan(k, assignments, seed)


@dataclass(frozen=True)
class Metrics:
    mse: float
    r2: float  # nan when the targets have zero variance

    @property
    def r2_defined(self) -> bool:
        return not math.isnan(self.r2)


def evaluate(predictions, targets) -> Metrics:
    pred = np.asarray(predictions, dtype=np.float64).ravel()
    y = np.asarray(targets, dtype=np.float64).ravel()
    if pred.shape != y.shape:
        raise ValueError(f"length mismatch: {pred.size} predictions, {y.size} targets")
    if y.size == 0:
        raise ValueError("empty input")
    sse = float(np.sum((pred - y) ** 2))
    mse = sse / y.size
    sst = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - sse / sst if (y.size >= 2 and sst > 0.0) else math.nan
    return Metrics(mse, r2)


def mean_functional_margin(predictions, targets) -> float:
    """Mean squared residual of the fit; the quantity e-DWSVR penalises alongside the margin."""
    return evaluate(predictions, targets).mse


# ---------------------------------------------------------------------------
# Synthetic data
# ---------------------------------------------------------------------------

@dataclass
class TwoLines(Dataset):
    groups: np.ndarray = field(default=None)  # 0 = line A, 1 = line B, 2 = outlier


def synth_two_lines(n=1000, frac_a=0.826, frac_b=0.165, frac_outlier=0.008,
                    offset=0.3, noise_sd=0.01, seed=0, outlier_shift=10.0) -> TwoLines:
    """Two parallel lines plus a few far outliers.

    Line A is ``y = x``, line B is ``y = x + offset``. Outliers sit
    ``outlier_shift`` away from line A, above it for x > 0.5 and below it
    otherwise, so they rotate a least-squares fit rather than shift it.
    Counts are ``floor(frac * n)`` per group with the remainder assigned
    to line A.
    """
    fracs = (frac_a, frac_b, frac_outlier)
    if min(fracs) < 0 or sum(fracs) > 1 + 1e-12:
        raise ValueError("fractions must be nonnegative and sum to at most 1")
    n_b = int(math.floor(frac_b * n + 1e-9))
    n_out = int(math.floor(frac_outlier * n + 1e-9))
    n_a = n - n_b - n_out
    groups = np.repeat(np.array([0, 1, 2]), [n_a, n_b, n_out])

    rng = np.random.default_rng(seed)
    x = rng.uniform(0.0, 1.0, size=n)
    noise = rng.normal(0.0, 1.0, size=n) * noise_sd
    y = x + noise
    y[groups == 1] += offset
    out = groups == 2
    y[out] += outlier_shift * np.where(x[out] > 0.5, 1.0, -1.0)
    return TwoLines(x.reshape(-1, 1), y, ["x"], groups=groups)



def synth_friedman(n=500, d=10, noise_sd=1.0, seed=0) -> Dataset:
    """Friedman #1 benchmark: y depends nonlinearly on the first five of ``d`` uniform inputs."""
    if d < 5:
        raise ValueError("synth_friedman needs d >= 5")
    rng = np.random.default_rng(seed)
    X = rng.uniform(0.0, 1.0, size=(n, d))
    y = (10.0 * np.sin(np.pi * X[:, 0] * X[:, 1]) + 20.0 * (X[:, 2] - 0.5) ** 2
         + 10.0 * X[:, 3] + 5.0 * X[:, 4] + noise_sd * rng.normal(size=n))
    return Dataset(X, y, [f"x{j + 1}" for j in range(d)])


BUNDLED = {"friedman500": "friedman500.csv"}


def bundled_path(name="friedman500") -> Path:
    """Filesystem path of a dataset shipped inside the package."""
    if name not in BUNDLED:
        raise KeyError(f"no bundled dataset {name!r}; available: {', '.join(BUNDLED)}")
    return Path(__file__).parent / "datasets" / BUNDLED[name]


def load_bundled(name="friedman500") -> Dataset:
    return load_dataset(bundled_path(name), target_column="y")
