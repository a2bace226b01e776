"""Gradient boosting of oblivious trees on class-weighted logistic loss.

Every level of an oblivious tree applies one (feature, threshold) test to
all rows, so a row's leaf is the bit-string of its comparisons: bit ``l`` is
set iff ``x[feature_l] > threshold_l``. Splits are chosen on histogram bins;
an edge index ``j`` of a feature corresponds to the test "bin > j", which
matches "value > edges[j]" because edges never equal a training value.
"""

import json
import math
import os
from dataclasses import asdict, dataclass, field
from typing import Optional

import numba
import numpy as np
from numba import njit, prange
from scipy.special import expit

from .dataset import BinnedDataset, DatasetMatrix, quantile_bin, require_both_classes
from .errors import (
    ConfigError,
    CorruptModel,
    DegenerateLabels,
    DimensionMismatch,
    ModelIoError,
    SchemaVersionMismatch,
    TrainingError,
)
from .parallel import thread_count

SCHEMA_VERSION = 1
MAX_DEPTH = 16
WEIGHTING_MODES = ("none", "balanced")

if "NUMBA_THREADING_LAYER" not in os.environ:
    # tbb may be present but too old; omp is safe to enter from several threads
    numba.config.THREADING_LAYER_PRIORITY = ["omp", "tbb", "workqueue"]

_P_LO = np.finfo(np.float64).tiny
_P_HI = 1.0 - 2.0**-53


@dataclass(frozen=True)
class TrainConfig:
    iterations: int = 100
    depth: int = 6
    learning_rate: float = 0.1
    l2_leaf_reg: float = 3.0
    class_weighting: str = "balanced"
    seed: int = 0
    max_bins: int = 255

    def __post_init__(self):
        if int(self.iterations) != self.iterations or self.iterations < 1:
            raise ConfigError(f"iterations must be a positive integer, got {self.iterations}")
        if int(self.depth) != self.depth or not 1 <= self.depth <= MAX_DEPTH:
            raise ConfigError(f"depth must be an integer in [1, {MAX_DEPTH}], got {self.depth}")
        if not 0 < self.learning_rate <= 1:
            raise ConfigError(f"learning_rate must lie in (0, 1], got {self.learning_rate}")
        if not self.l2_leaf_reg >= 0:
            raise ConfigError(f"l2_leaf_reg must be >= 0, got {self.l2_leaf_reg}")
        if self.class_weighting not in WEIGHTING_MODES:
            raise ConfigError(f"class_weighting must be one of {WEIGHTING_MODES}")
        if not 2 <= self.max_bins <= 65536:
            raise ConfigError(f"max_bins must lie in [2, 65536], got {self.max_bins}")

    def to_json(self):
        return asdict(self)

    @classmethod
    def from_json(cls, doc):
        return cls(**doc)


# Hyperparameters reported for the three models of the AML workflow.
REDUCTION_CONFIG = TrainConfig(iterations=200, depth=6, learning_rate=0.1)
COMPACT34_CONFIG = TrainConfig(iterations=200, depth=5, learning_rate=0.1)
DIAGNOSIS_CONFIG = TrainConfig(iterations=100, depth=11, learning_rate=0.1)


@dataclass(frozen=True, eq=False)
class ObliviousTree:
    features: tuple
    thresholds: tuple
    leaf_values: np.ndarray
    gains: Optional[tuple] = None

    @property
    def depth(self):
        return len(self.features)

    def leaf_index(self, X):
        idx = np.zeros(X.shape[0], dtype=np.int64)
        for level, (f, t) in enumerate(zip(self.features, self.thresholds)):
            idx |= (X[:, f] > t).astype(np.int64) << level
        return idx


@dataclass(eq=False)
class GbdtModel:
    trees: list
    base_score: float
    learning_rate: float
    feature_names: tuple
    class_weights: tuple
    config: TrainConfig
    # weighted mean training logloss before the first tree and after each one;
    # not persisted
    loss_history: Optional[list] = field(default=None, repr=False)

    @property
    def n_features(self):
        return len(self.feature_names)

    @property
    def has_gains(self):
        return all(t.gains is not None for t in self.trees)

    def _check(self, X):
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise DimensionMismatch(
                f"model expects {self.n_features} features, got shape {X.shape}"
            )
        if not np.isfinite(X).all():
            raise DimensionMismatch("input contains non-finite values")
        return X

    def raw_score(self, X):
        X = self._check(X)
        raw = np.full(X.shape[0], self.base_score)
        for tree in self.trees:
            raw += tree.leaf_values[tree.leaf_index(X)]
        return raw

    def predict_proba(self, X):
        return _logistic(self.raw_score(X))

    def predict_label(self, X, threshold=0.5):
        _check_threshold(threshold)
        return (self.predict_proba(X) >= threshold).astype(np.int8)


def _logistic(z):
    return np.clip(expit(z), _P_LO, _P_HI)


def _check_threshold(threshold):
    if not 0 < threshold < 1:
        raise ConfigError(f"threshold must lie in (0, 1), got {threshold}")


def predict_proba(model, row):
    """Probability of the positive class for one feature vector."""
    row = np.asarray(row, dtype=np.float64)
    if row.ndim != 1:
        raise DimensionMismatch(f"expected a 1-D row, got shape {row.shape}")
    return float(model.predict_proba(row[None, :])[0])


def predict_label(model, row, threshold=0.5):
    _check_threshold(threshold)
    return int(predict_proba(model, row) >= threshold)


def class_weights(labels, mode="balanced"):
    """(w_pos, w_neg). Balanced weights are N / (2 N_c)."""
    if mode not in WEIGHTING_MODES:
        raise ConfigError(f"unknown class weighting {mode!r}")
    if mode == "none":
        return 1.0, 1.0
    labels = np.asarray(labels)
    require_both_classes(labels)
    n = labels.size
    n_pos = int((labels == 1).sum())
    return n / (2 * n_pos), n / (2 * (n - n_pos))


def row_weights(labels, weights_pair):
    labels = np.asarray(labels)
    return np.where(labels == 1, weights_pair[0], weights_pair[1]).astype(np.float64)


def weighted_logloss(raw, labels, weights):
    """Weighted mean logistic loss computed from raw scores."""
    y = np.asarray(labels, dtype=np.float64)
    per_row = np.logaddexp(0.0, raw) - y * raw
    return float(np.dot(weights, per_row) / weights.sum())


# --- training ---------------------------------------------------------------


def _leaf_sums(leaf, values, n_leaves):
    return np.bincount(leaf, weights=values, minlength=n_leaves)


def _safe_ratio(num, den):
    out = np.zeros_like(num)
    np.divide(num, den, out=out, where=den > 0)
    return out


@njit(cache=True)
def _score(G, H, lam):
    den = H + lam
    return G * G / den if den > 0.0 else 0.0


@njit(parallel=True, cache=True)
def _split_gains(bins, n_edges, leaf, n_leaves, g, h, lam, out):
    """Fill ``out[f, j]`` with the oblivious gain of splitting on "bin > j".

    For each leaf the term  s(GL) + s(GR) - s(GP)  is exactly zero for edges
    below the leaf's lowest occupied bin and at or above its highest, so only
    the occupied span is visited. Leaves are always added in index order.
    """
    n, p = bins.shape
    for f in prange(p):
        nb = n_edges[f] + 1
        if nb == 1:
            continue
        G = np.zeros((n_leaves, nb))
        H = np.zeros((n_leaves, nb))
        lo = np.full(n_leaves, nb, dtype=np.int64)
        hi = np.full(n_leaves, -1, dtype=np.int64)
        for i in range(n):
            l = leaf[i]
            b = np.int64(bins[i, f])
            G[l, b] += g[i]
            H[l, b] += h[i]
            if b < lo[l]:
                lo[l] = b
            if b > hi[l]:
                hi[l] = b
        gains = np.zeros(nb - 1)
        for l in range(n_leaves):
            if hi[l] <= lo[l]:
                continue
            gp = 0.0
            hp = 0.0
            for b in range(lo[l], hi[l] + 1):
                gp += G[l, b]
                hp += H[l, b]
            sp = _score(gp, hp, lam)
            gl = 0.0
            hl = 0.0
            for b in range(lo[l], hi[l]):
                gl += G[l, b]
                hl += H[l, b]
                gains[b] += _score(gl, hl, lam) + _score(gp - gl, hp - hl, lam) - sp
        for j in range(nb - 1):
            out[f, j] = gains[j]


def _set_threads():
    numba.set_num_threads(max(1, min(thread_count(), numba.config.NUMBA_NUM_THREADS)))


def split_gains(bins, n_edges, leaf, g, h, lam):
    """Gain of every (feature, edge) candidate, -inf where a feature has no such edge.

    ``leaf`` holds each row's current leaf id; empty leaves are irrelevant and
    are compacted away before the histogram pass.
    """
    _, compact = np.unique(leaf, return_inverse=True)
    n_leaves = int(compact.max()) + 1 if compact.size else 0
    width = max(int(n_edges.max(initial=0)), 1)
    out = np.full((bins.shape[1], width), -np.inf)
    _set_threads()
    _split_gains(bins, n_edges, compact.astype(np.int64), n_leaves,
                 np.ascontiguousarray(g), np.ascontiguousarray(h), float(lam), out)
    return out


def best_split(bins, n_edges, leaf, g, h, lam):
    """Best oblivious split for the current leaf assignment.

    Returns (feature, edge, gain); feature is None when no candidate has
    positive gain. Ties go to the lowest feature index, then the lowest edge.
    """
    if bins.shape[1] == 0 or n_edges.max(initial=0) == 0:
        return None, None, 0.0
    gains = split_gains(bins, n_edges, leaf, g, h, lam)
    flat = int(np.argmax(gains))
    f, j = divmod(flat, gains.shape[1])
    gain = float(gains[f, j])
    if not gain > 0:
        return None, None, 0.0
    return f, j, gain


def train(binned: BinnedDataset, labels, weights=None, config: TrainConfig = TrainConfig(),
          feature_names=None):
    """Fit an ensemble of ``config.iterations`` oblivious trees.

    ``weights`` are per-row sample weights; when omitted they come from
    ``config.class_weighting``. Training is fully deterministic: there is no
    sampling, and every reduction runs in a fixed order.
    """
    labels = np.asarray(labels).astype(np.int8)
    bins = np.asarray(binned.bin_indices)
    n, n_features = bins.shape
    if labels.shape != (n,):
        raise DimensionMismatch("labels length does not match binned rows")
    if n < 2:
        raise DegenerateLabels("need at least two rows to train")
    require_both_classes(labels)
    cw = class_weights(labels, config.class_weighting)
    w = row_weights(labels, cw) if weights is None else np.asarray(weights, dtype=np.float64)
    if w.shape != (n,) or not (np.isfinite(w).all() and (w > 0).all()):
        raise TrainingError("weights must be finite, positive, one per row")

    y = labels.astype(np.float64)
    w_pos, w_neg = float(w[labels == 1].sum()), float(w[labels == 0].sum())
    base_score = math.log(w_pos / w_neg)
    n_edges = np.array([len(e) for e in binned.bin_edges], dtype=np.int64)
    lam = float(config.l2_leaf_reg)
    lr = float(config.learning_rate)
    depth = int(config.depth)

    raw = np.full(n, base_score)
    history = [weighted_logloss(raw, labels, w)]
    trees = []
    for _ in range(config.iterations):
        p = expit(raw)
        g = w * (p - y)
        h = w * p * (1.0 - p)
        leaf = np.zeros(n, dtype=np.int64)
        feats, thresholds, gains = [], [], []
        for level in range(depth):
            f, j, gain = best_split(bins, n_edges, leaf, g, h, lam)
            if f is None:
                feats.append(0)
                thresholds.append(math.inf)
                gains.append(0.0)
                continue
            feats.append(f)
            thresholds.append(float(binned.bin_edges[f][j]))
            gains.append(gain)
            leaf |= (bins[:, f] > j).astype(np.int64) << level
        n_leaves = 1 << depth
        G = _leaf_sums(leaf, g, n_leaves)
        H = _leaf_sums(leaf, h, n_leaves)
        values = -lr * _safe_ratio(G, H + lam)
        values.setflags(write=False)
        trees.append(ObliviousTree(tuple(feats), tuple(thresholds), values, tuple(gains)))
        raw = raw + values[leaf]
        if not np.isfinite(raw).all():
            raise TrainingError("raw scores diverged")
        history.append(weighted_logloss(raw, labels, w))

    names = feature_names if feature_names is not None else binned.source_feature_names
    if len(names) != n_features:
        names = tuple(f"f{j}" for j in range(n_features))
    return GbdtModel(trees, base_score, lr, tuple(names), cw, config, history)


def fit(d: DatasetMatrix, config: TrainConfig = TrainConfig()):
    """Bin ``d`` and train on it with class weights from ``config``."""
    binned = quantile_bin(d, config.max_bins)
    return train(binned, d.labels, None, config, d.feature_names)


# --- persistence ------------------------------------------------------------


def model_to_json(model):
    trees = []
    for t in model.trees:
        levels = []
        for i, (f, thr) in enumerate(zip(t.features, t.thresholds)):
            lv = {"feature": int(f), "threshold": None if math.isinf(thr) else float(thr)}
            if t.gains is not None:
                lv["gain"] = float(t.gains[i])
            levels.append(lv)
        trees.append({"levels": levels, "leaf_values": [float(v) for v in t.leaf_values]})
    return {
        "schema_version": SCHEMA_VERSION,
        "base_score": float(model.base_score),
        "learning_rate": float(model.learning_rate),
        "feature_names": list(model.feature_names),
        "trees": trees,
        "class_weights": [float(model.class_weights[0]), float(model.class_weights[1])],
        "config": model.config.to_json(),
    }


def model_from_json(doc):
    if not isinstance(doc, dict) or "schema_version" not in doc:
        raise CorruptModel("not a model document")
    if doc["schema_version"] != SCHEMA_VERSION:
        raise SchemaVersionMismatch(
            f"model schema_version {doc['schema_version']!r}, expected {SCHEMA_VERSION}"
        )
    try:
        names = tuple(str(n) for n in doc["feature_names"])
        trees = []
        for t in doc["trees"]:
            levels = t["levels"]
            feats = tuple(int(lv["feature"]) for lv in levels)
            thr = tuple(math.inf if lv["threshold"] is None else float(lv["threshold"])
                        for lv in levels)
            gains = None
            if all("gain" in lv for lv in levels):
                gains = tuple(float(lv["gain"]) for lv in levels)
            values = np.array(t["leaf_values"], dtype=np.float64)
            if values.shape != (1 << len(levels),):
                raise CorruptModel("leaf_values length must be 2**depth")
            if any(not 0 <= f < len(names) for f in feats):
                raise CorruptModel("split feature index out of range")
            values.setflags(write=False)
            trees.append(ObliviousTree(feats, thr, values, gains))
        cw = tuple(float(x) for x in doc["class_weights"])
        if len(cw) != 2:
            raise CorruptModel("class_weights must have two entries")
        config = TrainConfig.from_json(doc["config"])
        return GbdtModel(trees, float(doc["base_score"]), float(doc["learning_rate"]),
                         names, cw, config)
    except (KeyError, TypeError, ValueError) as exc:
        raise CorruptModel(f"malformed model document: {exc}") from exc


def dumps_model(model):
    return json.dumps(model_to_json(model), indent=1) + "\n"


def save_model(model, path):
    try:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(dumps_model(model))
    except OSError as exc:
        raise ModelIoError(str(exc)) from exc


def load_model(path):
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ModelIoError(str(exc)) from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CorruptModel(f"{path}: {exc}") from exc
    return model_from_json(doc)
