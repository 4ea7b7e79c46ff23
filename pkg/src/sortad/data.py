"""Dataset ingestion, robust scaling, padding, and labeled splits."""

import math
from dataclasses import dataclass

import numpy as np
import pandas as pd
from sklearn.base import BaseEstimator, TransformerMixin

from .errors import DataError
from .validation import as_binary_labels, as_float_matrix, require_fitted


@dataclass
class Dataset:
    """Feature matrix with optional binary anomaly labels (1 = anomaly)."""

    features: np.ndarray
    labels: np.ndarray = None
    name: str = ""

    def __post_init__(self):
        self.features = as_float_matrix(self.features, "features", allow_empty=True)
        if self.labels is not None:
            self.labels = as_binary_labels(self.labels, self.features.shape[0])

    def __len__(self):
        return self.features.shape[0]


class RobustScaler(BaseEstimator, TransformerMixin):
    """Center by the median and scale by the interquartile range.

    Quantiles use linear interpolation; a zero IQR (constant feature) is
    replaced by 1 so constant columns pass through centered but unscaled.
    """

    def fit(self, X, y=None):
        X = as_float_matrix(X, "X")
        self.medians_ = np.median(X, axis=0)
        q25, q75 = np.quantile(X, [0.25, 0.75], axis=0)
        iqrs = q75 - q25
        iqrs[iqrs == 0.0] = 1.0
        self.iqrs_ = iqrs
        return self

    def transform(self, X):
        require_fitted(self, "medians_")
        X = as_float_matrix(X, "X", allow_empty=True)
        if X.shape[1] != self.medians_.shape[0]:
            raise ValueError(
                f"expected {self.medians_.shape[0]} columns, got {X.shape[1]}"
            )
        return (X - self.medians_) / self.iqrs_

    def inverse_transform(self, X):
        require_fitted(self, "medians_")
        X = as_float_matrix(X, "X", allow_empty=True)
        if X.shape[1] != self.medians_.shape[0]:
            raise ValueError(
                f"expected {self.medians_.shape[0]} columns, got {X.shape[1]}"
            )
        return X * self.iqrs_ + self.medians_


def pad_even(xs):
    """Append one all-zero column when the feature count is odd."""
    xs = np.asarray(xs, dtype=float)
    if xs.ndim != 2:
        raise ValueError(f"xs must be 2-dimensional, got shape {xs.shape}")
    if xs.shape[1] % 2 == 0:
        return xs.copy()
    return np.hstack([xs, np.zeros((xs.shape[0], 1))])


def _check_fractions(fractions):
    fractions = [float(f) for f in fractions]
    if len(fractions) == 0:
        raise ValueError("fractions must be non-empty")
    if any(f < 0 for f in fractions):
        raise ValueError("fractions must be non-negative")
    if abs(sum(fractions) - 1.0) > 1e-8:
        raise ValueError(f"fractions must sum to 1, got {sum(fractions)}")
    return fractions


def _allocate(n, fractions):
    # Largest-remainder apportionment; ties favor the earlier split so the
    # allocation is deterministic.
    exact = [n * f for f in fractions]
    counts = [math.floor(e) for e in exact]
    order = sorted(
        range(len(fractions)), key=lambda k: (-(exact[k] - counts[k]), k)
    )
    for k in order[: n - sum(counts)]:
        counts[k] += 1
    return counts


def stratified_split(dataset, fractions, seed):
    """Split preserving the anomaly rate: each class is shuffled and
    apportioned separately, so every split's rate matches the global rate
    within the rounding of one sample."""
    if dataset.labels is None:
        raise ValueError("stratified_split requires labels")
    fractions = _check_fractions(fractions)
    rng = np.random.default_rng(seed)
    anomaly_idx = rng.permutation(np.flatnonzero(dataset.labels == 1))
    normal_idx = rng.permutation(np.flatnonzero(dataset.labels == 0))
    anomaly_counts = _allocate(len(anomaly_idx), fractions)
    normal_counts = _allocate(len(normal_idx), fractions)
    splits = []
    a_start = n_start = 0
    for k, (na, nn) in enumerate(zip(anomaly_counts, normal_counts)):
        if na + nn == 0:
            raise ValueError(f"split {k} receives zero samples")
        rows = np.sort(
            np.concatenate(
                [anomaly_idx[a_start : a_start + na], normal_idx[n_start : n_start + nn]]
            )
        )
        a_start += na
        n_start += nn
        splits.append(
            Dataset(
                features=dataset.features[rows],
                labels=dataset.labels[rows],
                name=f"{dataset.name}[{k}]" if dataset.name else f"split{k}",
            )
        )
    return splits


def sequential_split(dataset, fractions):
    """Split by row order (causality-preserving); anomaly rates are whatever
    the cut points produce."""
    fractions = _check_fractions(fractions)
    counts = _allocate(len(dataset), fractions)
    splits = []
    start = 0
    for k, count in enumerate(counts):
        if count == 0:
            raise ValueError(f"split {k} receives zero samples")
        rows = np.arange(start, start + count)
        start += count
        splits.append(
            Dataset(
                features=dataset.features[rows],
                labels=None if dataset.labels is None else dataset.labels[rows],
                name=f"{dataset.name}[{k}]" if dataset.name else f"split{k}",
            )
        )
    return splits


def load_csv(path, label_col=None, name=None):
    """Read a headered CSV into a Dataset.

    All non-label columns must be numeric; rows containing NaN are dropped.
    Returns (dataset, n_dropped_rows).
    """
    try:
        # the default float parser is fast but not correctly rounded; exact
        # parsing keeps scoring deterministic across save/load cycles
        frame = pd.read_csv(path, float_precision="round_trip")
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as exc:
        raise DataError(f"cannot parse {path}: {exc}") from exc
    if label_col is not None:
        if label_col not in frame.columns:
            raise DataError(f"label column {label_col!r} not found in {path}")
        label_series = frame[label_col]
        frame = frame.drop(columns=[label_col])
    else:
        label_series = None
    if frame.shape[1] == 0:
        raise DataError(f"{path} has no feature columns")
    for col in frame.columns:
        converted = pd.to_numeric(frame[col], errors="coerce")
        if converted.isna().all() and not frame[col].isna().all():
            raise DataError(f"feature column {col!r} in {path} is not numeric")
        frame[col] = converted
    keep = ~frame.isna().any(axis=1)
    if label_series is not None:
        labels_numeric = pd.to_numeric(label_series, errors="coerce")
        keep &= ~labels_numeric.isna()
    n_dropped = int((~keep).sum())
    frame = frame[keep]
    if frame.shape[0] == 0:
        raise DataError(f"{path} has no complete rows")
    features = frame.to_numpy(dtype=float)
    labels = None
    if label_series is not None:
        label_values = labels_numeric[keep].to_numpy()
        if not np.all(np.isin(label_values, (0, 1))):
            raise DataError(f"label column {label_col!r} must contain only 0 and 1")
        labels = label_values.astype(int)
    dataset_name = name if name is not None else str(path)
    try:
        return Dataset(features=features, labels=labels, name=dataset_name), n_dropped
    except ValueError as exc:
        raise DataError(f"invalid data in {path}: {exc}") from exc
