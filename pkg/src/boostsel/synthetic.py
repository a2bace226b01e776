"""Synthetic cohorts for demos and tests."""

import csv
from importlib import resources

import numpy as np

from .dataset import DatasetMatrix


def make_planted(n_rows=300, n_features=50, n_informative=5, shift=1.5,
                 positive_fraction=0.75, seed=0):
    """Gaussian noise columns; the first ``n_informative`` are shifted by
    ``shift`` standard deviations in positive rows.

    Returns (DatasetMatrix, names of the informative columns). Column names
    are shuffled-order free: informative ones are ``inf0..``, the rest
    ``noise0..``, interleaved at seeded random positions.
    """
    rng = np.random.default_rng(seed)
    n_pos = int(round(n_rows * positive_fraction))
    labels = np.zeros(n_rows, dtype=np.int8)
    labels[rng.permutation(n_rows)[:n_pos]] = 1
    X = rng.standard_normal((n_rows, n_features))
    cols = rng.permutation(n_features)
    informative = cols[:n_informative]
    X[:, informative] += shift * labels[:, None]
    names = [""] * n_features
    for i, c in enumerate(informative):
        names[c] = f"inf{i}"
    for i, c in enumerate(cols[n_informative:]):
        names[c] = f"noise{i}"
    ids = tuple(f"s{i:05d}" for i in range(n_rows))
    d = DatasetMatrix(tuple(names), X, labels, ids)
    return d, [names[c] for c in informative]


def probe_list(name):
    """Read one of the shipped probe-set lists: ``probesets_34``,
    ``probesets_26_keep`` or ``probesets_8_exclude``."""
    text = resources.files("boostsel.data").joinpath(f"{name}.txt").read_text("utf-8")
    return [line.strip() for line in text.splitlines() if line.strip()]


def make_cohort(n_rows=400, n_noise=30, shift=1.2, missing_age_fraction=0.1, seed=0):
    """Desk-scale stand-in for the AML cohort.

    The 34 shipped probe-set IDs carry signal (the 8 on the exclusion list
    included), ``n_noise`` extra probe columns do not, and an ``age`` column
    is weakly informative with some cells missing. Returns a list of CSV
    records (header first) with columns id, label, age, probes...
    """
    rng = np.random.default_rng(seed)
    probes = probe_list("probesets_34")
    noise = [f"NOISE{i:04d}_at" for i in range(n_noise)]
    labels = rng.random(n_rows) < 0.75
    X = rng.normal(6.0, 1.0, size=(n_rows, len(probes) + n_noise))
    X[:, : len(probes)] += shift * rng.uniform(0.5, 1.5, len(probes)) * labels[:, None]
    age = np.clip(rng.normal(48.9, 17.0, n_rows) + 6.0 * labels, 1, 95).round()
    missing = rng.random(n_rows) < missing_age_fraction
    records = [["id", "label", "age"] + probes + noise]
    for i in range(n_rows):
        records.append(
            [f"GSM{i:06d}", "AML" if labels[i] else "healthy",
             "" if missing[i] else f"{age[i]:.0f}"]
            + [f"{v:.6f}" for v in X[i]]
        )
    return records


def write_csv(records, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        csv.writer(fh, lineterminator="\n").writerows(records)
