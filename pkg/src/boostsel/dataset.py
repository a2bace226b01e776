"""Labeled expression matrices: CSV ingest, filtering, stratified splits, binning."""

import csv
import hashlib
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from .errors import (
    ConfigError,
    DatasetError,
    DegenerateLabels,
    DimensionMismatch,
    DuplicateFeatureName,
    DuplicateSampleId,
    MissingColumn,
    MissingValues,
    NoAgeColumn,
    NonNumericCell,
    TooFewRowsPerClass,
)

POSITIVE = 1
NEGATIVE = 0


def _frozen(a):
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class DatasetMatrix:
    """Numeric feature matrix with binary labels (1 = positive class).

    The only non-finite values allowed are NaNs in the age column, which mark
    a missing age; :func:`drop_missing_age` removes those rows.
    """

    feature_names: tuple
    rows: np.ndarray
    labels: np.ndarray
    sample_ids: tuple
    age_column: Optional[int] = None

    def __post_init__(self):
        names = tuple(str(n) for n in self.feature_names)
        ids = tuple(str(s) for s in self.sample_ids)
        rows = np.asarray(self.rows, dtype=np.float64)
        if rows.ndim == 1 and rows.size == 0:
            rows = rows.reshape(0, len(names))
        labels = np.asarray(self.labels).astype(np.int8)
        if rows.ndim != 2 or rows.shape[1] != len(names):
            raise DimensionMismatch(
                f"rows have shape {rows.shape}, expected (*, {len(names)})"
            )
        if labels.shape != (rows.shape[0],) or len(ids) != rows.shape[0]:
            raise DimensionMismatch("labels, sample_ids and rows disagree on row count")
        if len(set(names)) != len(names):
            raise DuplicateFeatureName(f"duplicate feature names: {_dupes(names)}")
        if len(set(ids)) != len(ids):
            raise DuplicateSampleId(f"duplicate sample ids: {_dupes(ids)}")
        if not np.isin(labels, (NEGATIVE, POSITIVE)).all():
            raise DatasetError("labels must be 0 (negative) or 1 (positive)")
        if self.age_column is not None and not 0 <= self.age_column < len(names):
            raise DimensionMismatch(f"age_column {self.age_column} out of range")
        finite = np.isfinite(rows)
        if self.age_column is not None:
            finite[:, self.age_column] |= np.isnan(rows[:, self.age_column])
        if not finite.all():
            r, c = np.argwhere(~finite)[0]
            raise MissingValues(f"non-finite value at row {r}, column {names[c]!r}")
        object.__setattr__(self, "feature_names", names)
        object.__setattr__(self, "sample_ids", ids)
        object.__setattr__(self, "rows", _frozen(rows))
        object.__setattr__(self, "labels", _frozen(labels))

    @property
    def n_rows(self):
        return self.rows.shape[0]

    @property
    def n_features(self):
        return self.rows.shape[1]

    def class_counts(self):
        """(positive count, negative count)."""
        pos = int(self.labels.sum())
        return pos, self.n_rows - pos

    def has_missing(self):
        return bool(np.isnan(self.rows).any())

    def subset(self, indices):
        idx = np.asarray(indices, dtype=np.int64)
        return DatasetMatrix(
            self.feature_names,
            self.rows[idx],
            self.labels[idx],
            tuple(self.sample_ids[i] for i in idx),
            self.age_column,
        )

    def project(self, names):
        """Keep only ``names``, in the given order."""
        index = {n: i for i, n in enumerate(self.feature_names)}
        missing = [n for n in names if n not in index]
        if missing:
            raise MissingColumn(f"features not in dataset: {missing}")
        cols = [index[n] for n in names]
        age = None
        if self.age_column is not None and self.age_column in cols:
            age = cols.index(self.age_column)
        return DatasetMatrix(tuple(names), self.rows[:, cols], self.labels, self.sample_ids, age)

    def fingerprint(self):
        h = hashlib.sha256()
        h.update(json.dumps([self.feature_names, self.sample_ids]).encode())
        h.update(np.ascontiguousarray(self.rows).tobytes())
        h.update(np.ascontiguousarray(self.labels).tobytes())
        return {"rows": self.n_rows, "columns": self.n_features, "sha256": h.hexdigest()}


def _dupes(items):
    seen, out = set(), []
    for x in items:
        if x in seen and x not in out:
            out.append(x)
        seen.add(x)
    return out


def require_both_classes(labels):
    labels = np.asarray(labels)
    pos = int((labels == POSITIVE).sum())
    if pos == 0 or pos == labels.size:
        raise DegenerateLabels(
            f"need both classes, got {pos} positive / {labels.size - pos} negative"
        )


def ingest_csv(
    path,
    label_column="label",
    positive_label="AML",
    id_column="id",
    age_column=None,
    missing_age_tokens=("",),
):
    """Read a comma-delimited UTF-8 file with a header row.

    Every column other than ``id_column`` and ``label_column`` becomes a
    feature, in file order. Age cells matching ``missing_age_tokens`` are
    read as NaN; anything else that does not parse as a finite real raises
    :class:`NonNumericCell`.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DatasetError(f"{path}: empty file") from None
        records = list(reader)

    for col in (id_column, label_column) + ((age_column,) if age_column else ()):
        if col not in header:
            raise MissingColumn(f"column {col!r} not in header of {path}")
    if len(set(header)) != len(header):
        raise DuplicateFeatureName(f"duplicate header names: {_dupes(header)}")
    id_at = header.index(id_column)
    label_at = header.index(label_column)
    feature_at = [i for i in range(len(header)) if i not in (id_at, label_at)]
    names = [header[i] for i in feature_at]
    age_idx = names.index(age_column) if age_column else None
    missing_tokens = set(missing_age_tokens)

    ids, raw_labels = [], []
    rows = np.empty((len(records), len(names)), dtype=np.float64)
    for r, rec in enumerate(records):
        line = r + 2  # 1-based, header is line 1
        if len(rec) != len(header):
            raise DatasetError(f"{path}:{line}: expected {len(header)} cells, got {len(rec)}")
        ids.append(rec[id_at].strip())
        raw_labels.append(rec[label_at].strip())
        for j, i in enumerate(feature_at):
            cell = rec[i].strip()
            if j == age_idx and cell in missing_tokens:
                rows[r, j] = np.nan
                continue
            try:
                v = float(cell)
            except ValueError:
                raise NonNumericCell(line, header[i], cell) from None
            if not math.isfinite(v):
                raise NonNumericCell(line, header[i], cell)
            rows[r, j] = v

    classes = sorted(set(raw_labels))
    if len(classes) < 2:
        raise DegenerateLabels(f"label column {label_column!r} has values {classes}")
    if len(classes) > 2:
        raise DatasetError(f"label column {label_column!r} has more than two values: {classes}")
    if positive_label not in classes:
        raise DegenerateLabels(f"positive label {positive_label!r} not among {classes}")
    labels = np.array([lab == positive_label for lab in raw_labels], dtype=np.int8)
    return DatasetMatrix(tuple(names), rows, labels, tuple(ids), age_idx)


def drop_missing_age(d):
    """Remove rows whose age is missing, preserving row order."""
    if d.age_column is None:
        raise NoAgeColumn("dataset has no age column")
    keep = np.flatnonzero(~np.isnan(d.rows[:, d.age_column]))
    if keep.size == d.n_rows:
        return d
    return d.subset(keep)


# --- splits -----------------------------------------------------------------


@dataclass(frozen=True)
class SplitPlan:
    train_indices: tuple
    validation_indices: tuple
    seed: int
    train_fraction: float

    def to_json(self):
        return {
            "seed": self.seed,
            "train_fraction": self.train_fraction,
            "train_indices": list(self.train_indices),
            "validation_indices": list(self.validation_indices),
        }

    @classmethod
    def from_json(cls, doc):
        return cls(
            tuple(doc["train_indices"]),
            tuple(doc["validation_indices"]),
            int(doc["seed"]),
            float(doc["train_fraction"]),
        )


@dataclass(frozen=True)
class FoldPlan:
    folds: tuple
    seed: int

    @property
    def k(self):
        return len(self.folds)

    def train_indices(self, i):
        return tuple(sorted(j for f, fold in enumerate(self.folds) if f != i for j in fold))

    def to_json(self):
        return {"seed": self.seed, "k": self.k, "folds": [list(f) for f in self.folds]}

    @classmethod
    def from_json(cls, doc):
        return cls(tuple(tuple(f) for f in doc["folds"]), int(doc["seed"]))


def _labels_of(d):
    return d.labels if isinstance(d, DatasetMatrix) else np.asarray(d)


def _check_seed(seed):
    seed = int(seed)
    if not 0 <= seed < 2**64:
        raise ConfigError(f"seed must be an unsigned 64-bit integer, got {seed}")
    return seed


def _round_half_up(x: Fraction) -> int:
    return math.floor(x + Fraction(1, 2))


def stratified_split(d, train_fraction=0.8, seed=0):
    """Per-class random split; each class sends round-half-up(n_c * (1 - f)) rows
    to validation.

    ``d`` may be a DatasetMatrix or a plain label array. The fraction is taken
    at its decimal value (0.8 means exactly 4/5) so boundary rounding does not
    depend on binary float error.
    """
    if not 0 < train_fraction < 1:
        raise ConfigError(f"train_fraction must lie in (0, 1), got {train_fraction}")
    seed = _check_seed(seed)
    labels = _labels_of(d)
    require_both_classes(labels)
    val_share = 1 - Fraction(repr(float(train_fraction)))
    rng = np.random.default_rng(seed)
    train, val = [], []
    for cls in (POSITIVE, NEGATIVE):
        idx = np.flatnonzero(labels == cls)
        n_val = _round_half_up(idx.size * val_share)
        perm = idx[rng.permutation(idx.size)]
        val.extend(perm[:n_val].tolist())
        train.extend(perm[n_val:].tolist())
    if not train or not val:
        raise DatasetError(
            f"split with train_fraction={train_fraction} leaves an empty part "
            f"for {labels.size} rows"
        )
    return SplitPlan(tuple(sorted(train)), tuple(sorted(val)), seed, float(train_fraction))


def stratified_kfold(d, k=10, seed=0):
    """Stratified K-fold partition.

    Each class is shuffled and dealt round-robin over the folds; the dealing
    position carries over from one class to the next so fold sizes stay
    balanced as well.
    """
    if int(k) != k or k < 2:
        raise ConfigError(f"k must be an integer >= 2, got {k}")
    k = int(k)
    seed = _check_seed(seed)
    labels = _labels_of(d)
    require_both_classes(labels)
    rng = np.random.default_rng(seed)
    folds = [[] for _ in range(k)]
    offset = 0
    for cls in (POSITIVE, NEGATIVE):
        idx = np.flatnonzero(labels == cls)
        if idx.size < k:
            raise TooFewRowsPerClass(f"class {cls} has {idx.size} rows, fewer than k={k}")
        perm = idx[rng.permutation(idx.size)]
        for j, i in enumerate(perm):
            folds[(offset + j) % k].append(int(i))
        offset = (offset + idx.size) % k
    return FoldPlan(tuple(tuple(sorted(f)) for f in folds), seed)


# --- binning ----------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class BinnedDataset:
    bin_edges: tuple
    bin_indices: np.ndarray
    source_feature_names: tuple = field(default=())

    @property
    def n_rows(self):
        return self.bin_indices.shape[0]

    @property
    def n_features(self):
        return self.bin_indices.shape[1]

    def n_bins(self, j):
        return len(self.bin_edges[j]) + 1

    def transform(self, rows):
        """Bin new rows with these edges."""
        rows = np.asarray(rows, dtype=np.float64)
        if rows.ndim != 2 or rows.shape[1] != self.n_features:
            raise DimensionMismatch(f"expected {self.n_features} columns, got shape {rows.shape}")
        return _apply_edges(rows, self.bin_edges)


def _apply_edges(rows, edges):
    n_max = max((len(e) for e in edges), default=0) + 1
    dtype = np.uint8 if n_max <= 256 else np.uint16 if n_max <= 65536 else np.uint32
    out = np.empty(rows.shape, dtype=dtype)
    for j, e in enumerate(edges):
        out[:, j] = np.searchsorted(e, rows[:, j], side="right")
    return out


def _midpoint(a, b):
    m = a * 0.5 + b * 0.5
    return m if a < m < b else None


def feature_edges(values, max_bins=255):
    """Bin edges for one column.

    With at most ``max_bins`` distinct values every gap between neighbours
    gets an edge. Otherwise, for each probability i/max_bins (0 < i < max_bins)
    the lower empirical quantile is taken and an edge is placed halfway to the
    next distinct value. Edges never coincide with a value in the column, so
    "bin id > j" and "value > edge j" agree on the data the edges came from.
    """
    u = np.unique(np.asarray(values, dtype=np.float64))
    if u.size <= 1:
        return np.empty(0)
    if u.size <= max_bins:
        cands = zip(u[:-1], u[1:])
    else:
        s = np.sort(np.asarray(values, dtype=np.float64))
        i = np.arange(1, max_bins, dtype=np.int64)
        q = s[(i * s.size + max_bins - 1) // max_bins - 1]
        pos = np.searchsorted(u, q, side="right")
        keep = pos < u.size
        cands = zip(q[keep], u[pos[keep]])
    edges = sorted({m for a, b in cands if (m := _midpoint(a, b)) is not None})
    return np.array(edges, dtype=np.float64)


def quantile_bin(d, max_bins=255):
    """Discretize every feature; returns a :class:`BinnedDataset`.

    ``d`` may be a DatasetMatrix or a bare 2-D array.
    """
    if max_bins < 2:
        raise ConfigError(f"max_bins must be >= 2, got {max_bins}")
    if isinstance(d, DatasetMatrix):
        rows, names = d.rows, d.feature_names
    else:
        rows = np.asarray(d, dtype=np.float64)
        names = tuple(f"f{j}" for j in range(rows.shape[1]))
    if np.isnan(rows).any():
        raise MissingValues("cannot bin a matrix with missing values")
    edges = tuple(_frozen(feature_edges(rows[:, j], max_bins)) for j in range(rows.shape[1]))
    return BinnedDataset(edges, _frozen(_apply_edges(rows, edges)), tuple(names))


def dataset_from_arrays(X, y, feature_names: Optional[Sequence[str]] = None, sample_ids=None):
    """Convenience constructor for in-memory data."""
    X = np.asarray(X, dtype=np.float64)
    if feature_names is None:
        feature_names = [f"f{j}" for j in range(X.shape[1])]
    if sample_ids is None:
        sample_ids = [f"s{i}" for i in range(X.shape[0])]
    return DatasetMatrix(tuple(feature_names), X, np.asarray(y), tuple(sample_ids))
