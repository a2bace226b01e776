"""Two feature rankings for a trained ensemble.

``prediction_values_change`` credits each feature with the split gain it
realized during training, as a percentage of the total. ``loss_function_change``
is permutation importance: the rise in weighted logloss when one column is
shuffled, averaged over seeded repeats. Both approximate, rather than
replicate, the importances of the reference boosting library.
"""

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from .boosting import row_weights, weighted_logloss
from .dataset import DatasetMatrix
from .errors import ConfigError, DimensionMismatch, ModelMissingGainRecords
from .parallel import ordered_map

PREDICTION_VALUES_CHANGE = "prediction_values_change"
LOSS_FUNCTION_CHANGE = "loss_function_change"


@dataclass(frozen=True)
class ImportanceReport:
    """``scores`` holds (feature, score) sorted by score descending, then by
    the feature's column index."""

    method: str
    scores: tuple
    normalization: str
    feature_order: tuple = ()

    @classmethod
    def build(cls, method, feature_names, values, normalization):
        order = sorted(range(len(feature_names)), key=lambda j: (-values[j], j))
        scores = tuple((feature_names[j], float(values[j])) for j in order)
        return cls(method, scores, normalization, tuple(feature_names))

    def names(self):
        return [name for name, _ in self.scores]

    def as_dict(self):
        return dict(self.scores)

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["method", "feature", "score", "rank"])
        for rank, (name, score) in enumerate(self.scores, start=1):
            w.writerow([self.method, name, repr(score), rank])
        return buf.getvalue()

    def to_json(self):
        return {
            "method": self.method,
            "normalization": self.normalization,
            "scores": [[n, s] for n, s in self.scores],
        }


def used_features(model):
    """Indices of features appearing in at least one non-null split."""
    used = set()
    for tree in model.trees:
        for f, t in zip(tree.features, tree.thresholds):
            if not math.isinf(t):
                used.add(f)
    return used


def prediction_values_change(model):
    if not model.has_gains:
        raise ModelMissingGainRecords("model carries no recorded split gains")
    totals = [0.0] * model.n_features
    for tree in model.trees:
        for f, gain in zip(tree.features, tree.gains):
            totals[f] += gain
    grand = math.fsum(totals)
    if grand > 0:
        values = [100.0 * t / grand for t in totals]
        norm = "percent"
    else:
        values = [0.0] * model.n_features
        norm = "raw"
    return ImportanceReport.build(PREDICTION_VALUES_CHANGE, model.feature_names, values, norm)


def loss_function_change(model, data, labels=None, weights=None, repeats=5, seed=0):
    """Mean increase in weighted logloss when each column is permuted.

    ``data`` is a DatasetMatrix (its labels are used when ``labels`` is
    omitted) or a bare matrix. Weights default to the model's class weights.
    The permutation for (feature j, repeat r) comes from an RNG seeded with
    (seed, j, r), so every feature's score is independent of evaluation
    order. Features the model never splits on score exactly 0 without being
    evaluated.
    """
    if repeats < 1:
        raise ConfigError(f"repeats must be >= 1, got {repeats}")
    if isinstance(data, DatasetMatrix):
        X = data.rows
        if labels is None:
            labels = data.labels
        if tuple(data.feature_names) != tuple(model.feature_names):
            raise DimensionMismatch("dataset columns differ from the model's features")
    else:
        X = np.asarray(data, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != model.n_features:
        raise DimensionMismatch(f"model expects {model.n_features} features, got {X.shape}")
    labels = np.asarray(labels)
    if weights is None:
        weights = row_weights(labels, model.class_weights)
    weights = np.asarray(weights, dtype=np.float64)
    # per-tree contributions; a permutation of column j only touches trees
    # that split on j, and re-summing in tree order reproduces raw_score bit
    # for bit
    X = model._check(X)
    contrib = [t.leaf_values[t.leaf_index(X)] for t in model.trees]
    baseline = weighted_logloss(_sum_raw(model.base_score, contrib, X.shape[0]), labels, weights)

    def score(j):
        touched = [i for i, t in enumerate(model.trees) if j in t.features]
        deltas = []
        for r in range(repeats):
            rng = np.random.default_rng([int(seed), j, r])
            col = X[rng.permutation(X.shape[0]), j]
            parts = list(contrib)
            for i in touched:
                t = model.trees[i]
                parts[i] = t.leaf_values[_leaf_index_with(t, X, j, col)]
            raw = _sum_raw(model.base_score, parts, X.shape[0])
            deltas.append(weighted_logloss(raw, labels, weights) - baseline)
        return math.fsum(deltas) / repeats

    used = sorted(used_features(model))
    values = [0.0] * model.n_features
    for j, v in zip(used, ordered_map(score, used)):
        values[j] = v
    return ImportanceReport.build(LOSS_FUNCTION_CHANGE, model.feature_names, values, "raw")


def _sum_raw(base, parts, n):
    raw = np.full(n, base)
    for c in parts:
        raw += c
    return raw


def _leaf_index_with(tree, X, j, col):
    idx = np.zeros(X.shape[0], dtype=np.int64)
    for level, (f, t) in enumerate(zip(tree.features, tree.thresholds)):
        values = col if f == j else X[:, f]
        idx |= (values > t).astype(np.int64) << level
    return idx


def top_k(report, k):
    if k < 1:
        raise ConfigError(f"k must be >= 1, got {k}")
    return report.names()[:k]
