"""Binary classification metrics with AML (label 1) as the positive class."""

import math
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.stats import rankdata

from .errors import LengthMismatch, OneClassOnly, TooFewFolds, UndefinedMetric

METRIC_NAMES = ("specificity", "sensitivity", "auc", "f1", "accuracy")
# row labels of the printed tables, in print order
ROW_LABELS = {
    "specificity": "Spec.",
    "sensitivity": "Sens.",
    "auc": "AUC",
    "f1": "F1-score",
    "accuracy": "Accuracy",
}
Z95 = 1.96


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def total(self):
        return self.tp + self.fp + self.tn + self.fn

    def to_json(self):
        return {"tp": self.tp, "fp": self.fp, "tn": self.tn, "fn": self.fn}


@dataclass(frozen=True)
class MetricsReport:
    """Scalar metrics; ``None`` marks a metric whose denominator was zero."""

    matrix: ConfusionMatrix
    sensitivity: Optional[float]
    specificity: Optional[float]
    f1: Optional[float]
    accuracy: Optional[float]
    auc: Optional[float] = None

    def get(self, name):
        return getattr(self, name)

    def require(self, name):
        value = self.get(name)
        if value is None:
            raise UndefinedMetric(f"{name} is undefined for {self.matrix}")
        return value

    def to_json(self):
        doc = {name: self.get(name) for name in METRIC_NAMES}
        doc["confusion_matrix"] = self.matrix.to_json()
        return doc


def confusion(labels, predictions):
    labels = np.asarray(labels)
    predictions = np.asarray(predictions)
    if labels.shape != predictions.shape or labels.ndim != 1:
        raise LengthMismatch(f"labels {labels.shape} vs predictions {predictions.shape}")
    if labels.size == 0:
        raise LengthMismatch("need at least one prediction")
    pos, pred = labels == 1, predictions == 1
    return ConfusionMatrix(
        tp=int((pos & pred).sum()),
        fp=int((~pos & pred).sum()),
        tn=int((~pos & ~pred).sum()),
        fn=int((pos & ~pred).sum()),
    )


def _ratio(num, den, name):
    if den == 0:
        raise UndefinedMetric(f"{name}: zero denominator")
    return num / den


def sensitivity(m):
    return _ratio(m.tp, m.tp + m.fn, "sensitivity")


def specificity(m):
    return _ratio(m.tn, m.tn + m.fp, "specificity")


def f1_score(m):
    return _ratio(2 * m.tp, 2 * m.tp + m.fp + m.fn, "f1")


def accuracy(m):
    return _ratio(m.tp + m.tn, m.total, "accuracy")


def _or_none(fn, m):
    try:
        return fn(m)
    except UndefinedMetric:
        return None


def scalar_metrics(m, auc_value=None):
    return MetricsReport(
        matrix=m,
        sensitivity=_or_none(sensitivity, m),
        specificity=_or_none(specificity, m),
        f1=_or_none(f1_score, m),
        accuracy=_or_none(accuracy, m),
        auc=auc_value,
    )


def auc(labels, scores):
    """Mann-Whitney AUC with ties credited one half, via mid-ranks."""
    labels = np.asarray(labels)
    scores = np.asarray(scores, dtype=np.float64)
    if labels.shape != scores.shape:
        raise LengthMismatch(f"labels {labels.shape} vs scores {scores.shape}")
    pos = labels == 1
    n_pos = int(pos.sum())
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise OneClassOnly("AUC needs both classes")
    if not np.isfinite(scores).all():
        raise ValueError("scores must be finite")
    # mid-ranks are multiples of 1/2, so the sum below is exact
    ranks = rankdata(scores, method="average")
    u = ranks[pos].sum() - n_pos * (n_pos + 1) / 2
    return float(u / (n_pos * n_neg))


def evaluate(labels, scores, predictions):
    """Full report: confusion-derived metrics plus AUC of ``scores``."""
    report = scalar_metrics(confusion(labels, predictions))
    try:
        a = auc(labels, scores)
    except OneClassOnly:
        a = None
    return MetricsReport(report.matrix, report.sensitivity, report.specificity,
                         report.f1, report.accuracy, a)


@dataclass(frozen=True)
class CvSummary:
    per_fold: tuple
    mean: dict
    std: dict
    ci95: dict
    pooled: Optional[MetricsReport] = field(default=None)

    @property
    def k(self):
        return len(self.per_fold)

    def to_json(self):
        doc = {
            "k": self.k,
            "mean": self.mean,
            "std": self.std,
            "ci95": {k: (list(v) if v is not None else None) for k, v in self.ci95.items()},
            "per_fold": [r.to_json() for r in self.per_fold],
        }
        if self.pooled is not None:
            doc["pooled"] = self.pooled.to_json()
        return doc


def aggregate_cv(per_fold, pooled=None):
    """Per-metric sample mean, sample std (K-1) and mean +/- 1.96 std/sqrt(K) in [0, 1].

    Folds where a metric is undefined are left out of that metric; a metric
    defined on fewer than two folds is reported as ``None``.
    """
    per_fold = tuple(per_fold)
    if len(per_fold) < 2:
        raise TooFewFolds(f"need at least 2 folds, got {len(per_fold)}")
    mean, std, ci = {}, {}, {}
    for name in METRIC_NAMES:
        vals = [r.get(name) for r in per_fold if r.get(name) is not None]
        if len(vals) < len(per_fold):
            warnings.warn(
                f"{name} undefined on {len(per_fold) - len(vals)} of {len(per_fold)} folds",
                stacklevel=2,
            )
        if len(vals) < 2:
            mean[name] = std[name] = ci[name] = None
            continue
        k = len(vals)
        m = math.fsum(vals) / k
        s = math.sqrt(math.fsum((v - m) ** 2 for v in vals) / (k - 1))
        half = Z95 * s / math.sqrt(k)
        mean[name], std[name] = m, s
        ci[name] = (max(0.0, m - half), min(1.0, m + half))
    return CvSummary(per_fold, mean, std, ci, pooled)


def _fmt(v):
    return "n/a" if v is None else f"{v:.4f}"


def format_table(columns):
    """Aligned plain-text table; ``columns`` maps a heading to a metric dict
    or MetricsReport. Rows follow Spec., Sens., AUC, F1-score, Accuracy."""
    heads = list(columns)
    getters = []
    for h in heads:
        col = columns[h]
        getters.append(col.get)
    width = max(len(v) for v in ROW_LABELS.values())
    colw = [max(len(h), 8) for h in heads]
    lines = ["Metrics".ljust(width) + "  " + "  ".join(h.rjust(w) for h, w in zip(heads, colw))]
    for name in METRIC_NAMES:
        cells = [_fmt(get(name)).rjust(w) for get, w in zip(getters, colw)]
        lines.append(ROW_LABELS[name].ljust(width) + "  " + "  ".join(cells))
    return "\n".join(lines) + "\n"


def format_confusion(m):
    """2x2 layout: negatives on the first row (tn, fn), positives second (fp, tp)."""
    w = max(len(str(x)) for x in (m.tn, m.fn, m.fp, m.tp))
    return (f"{str(m.tn).rjust(w)}  {str(m.fn).rjust(w)}\n"
            f"{str(m.fp).rjust(w)}  {str(m.tp).rjust(w)}\n")
