"""Brute-force k-nearest-neighbour baseline.

Every query scans all stored rows (O(n * d) per query); distance ties go to
the lower training-row index. No feature scaling is applied.
"""

from dataclasses import dataclass

import numpy as np

from .dataset import DatasetMatrix
from .errors import ConfigError, DimensionMismatch, KTooLarge


@dataclass(frozen=True, eq=False)
class KnnModel:
    rows: np.ndarray
    labels: np.ndarray
    k: int = 5
    distance: str = "euclidean"

    @property
    def n_features(self):
        return self.rows.shape[1]


def knn_fit(d, labels=None, k=5):
    if isinstance(d, DatasetMatrix):
        rows = d.rows
        labels = d.labels if labels is None else labels
    else:
        rows = d
    rows = np.array(rows, dtype=np.float64, copy=True)
    labels = np.array(labels, dtype=np.int8, copy=True)
    if rows.ndim != 2 or labels.shape != (rows.shape[0],):
        raise DimensionMismatch("rows and labels disagree")
    if not np.isfinite(rows).all():
        raise DimensionMismatch("training rows must be finite")
    if int(k) != k or k < 1:
        raise ConfigError(f"k must be a positive integer, got {k}")
    if k > rows.shape[0]:
        raise KTooLarge(f"k={k} exceeds {rows.shape[0]} training rows")
    rows.setflags(write=False)
    labels.setflags(write=False)
    return KnnModel(rows, labels, int(k))


def _as_queries(m, X):
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[None, :]
    if X.ndim != 2 or X.shape[1] != m.n_features:
        raise DimensionMismatch(f"model expects {m.n_features} features, got shape {X.shape}")
    return X


def knn_neighbors(m, row):
    """Indices of the k nearest training rows, nearest first."""
    q = _as_queries(m, row)[0]
    d2 = ((m.rows - q) ** 2).sum(axis=1)
    return np.argsort(d2, kind="stable")[: m.k]


def knn_predict_score(m, row):
    """Fraction of the k nearest neighbours that are positive."""
    return float(m.labels[knn_neighbors(m, row)].mean())


def knn_predict_label(m, row):
    nn = knn_neighbors(m, row)
    score = m.labels[nn].mean()
    if score == 0.5:
        return int(m.labels[nn[0]])
    return int(score > 0.5)


def knn_predict(m, X):
    """(scores, labels) for a batch of queries."""
    X = _as_queries(m, X)
    scores = np.empty(X.shape[0])
    labels = np.empty(X.shape[0], dtype=np.int8)
    for i, q in enumerate(X):
        d2 = ((m.rows - q) ** 2).sum(axis=1)
        nn = np.argsort(d2, kind="stable")[: m.k]
        s = m.labels[nn].mean()
        scores[i] = s
        labels[i] = m.labels[nn[0]] if s == 0.5 else s > 0.5
    return scores, labels
