"""Wide model -> dual top-K intersection -> exclusion list -> compact model."""

from dataclasses import dataclass, field
from typing import Optional

from . import __version__
from .boosting import DIAGNOSIS_CONFIG, REDUCTION_CONFIG, TrainConfig, fit
from .dataset import stratified_split
from .errors import (
    ConfigError,
    EmptySelection,
    FeatureUniverseMismatch,
    MissingColumn,
    MissingValues,
)
from .evaluation import cross_validate, evaluate_gbdt, gbdt_runner
from .importance import loss_function_change, prediction_values_change, top_k


@dataclass(frozen=True)
class SelectionConfig:
    top_k: int = 100
    exclusion_list: frozenset = frozenset()
    always_include: tuple = ()
    wide_config: TrainConfig = REDUCTION_CONFIG
    compact_config: TrainConfig = DIAGNOSIS_CONFIG
    seed: int = 0
    # the compact model's re-split; None reuses ``seed``
    compact_seed: Optional[int] = None
    train_fraction: float = 0.8
    cv_folds: int = 10
    importance_repeats: int = 5
    threshold: float = 0.5

    def __post_init__(self):
        object.__setattr__(self, "exclusion_list", frozenset(self.exclusion_list))
        object.__setattr__(self, "always_include", tuple(dict.fromkeys(self.always_include)))
        if self.top_k < 1:
            raise ConfigError(f"top_k must be >= 1, got {self.top_k}")
        clash = self.exclusion_list & set(self.always_include)
        if clash:
            raise ConfigError(f"features both excluded and always included: {sorted(clash)}")
        if self.importance_repeats < 1:
            raise ConfigError("importance_repeats must be >= 1")

    def to_json(self):
        return {
            "top_k": self.top_k,
            "exclusion_list": sorted(self.exclusion_list),
            "always_include": list(self.always_include),
            "wide_config": self.wide_config.to_json(),
            "compact_config": self.compact_config.to_json(),
            "seed": self.seed,
            "compact_seed": self.compact_seed,
            "train_fraction": self.train_fraction,
            "cv_folds": self.cv_folds,
            "importance_repeats": self.importance_repeats,
            "threshold": self.threshold,
        }


@dataclass(frozen=True)
class SelectionResult:
    intersection: tuple
    after_exclusion: tuple
    final_features: tuple
    reports: tuple
    provenance: dict
    validation: object = None
    wide_model: object = field(default=None, repr=False, compare=False)

    def to_json(self):
        return {
            "intersection": list(self.intersection),
            "after_exclusion": list(self.after_exclusion),
            "final_features": list(self.final_features),
            "reports": [r.to_json() for r in self.reports],
            "validation": self.validation.to_json() if self.validation is not None else None,
            "provenance": self.provenance,
        }


def intersect_top_k(r1, r2, k):
    """Features in both top-k lists, in ``r1`` rank order."""
    if set(r1.names()) != set(r2.names()):
        raise FeatureUniverseMismatch("importance reports cover different features")
    second = set(top_k(r2, k))
    return [name for name in top_k(r1, k) if name in second]


def apply_exclusions(features, exclusion_list):
    excluded = set(exclusion_list)
    return [f for f in features if f not in excluded]


def run_pipeline(d, cfg: SelectionConfig):
    """Run the selection flow on ``d``.

    Returns (SelectionResult, compact model, CvSummary). The compact model is
    validated on the held-out part and cross-validated on the training part.
    Rows with missing age must be dropped beforehand.
    """
    if d.has_missing():
        raise MissingValues("dataset has missing values; drop rows with missing age first")
    absent = [n for n in cfg.always_include if n not in d.feature_names]
    if absent:
        raise MissingColumn(f"always-include features not in dataset: {absent}")

    split = stratified_split(d, cfg.train_fraction, cfg.seed)
    train = d.subset(split.train_indices)
    wide = fit(train, cfg.wide_config)
    by_gain = prediction_values_change(wide)
    by_loss = loss_function_change(wide, train, repeats=cfg.importance_repeats, seed=cfg.seed)
    reports = (by_gain, by_loss)

    intersection = intersect_top_k(by_gain, by_loss, cfg.top_k)
    after = apply_exclusions(intersection, cfg.exclusion_list)
    if not after:
        raise EmptySelection(
            f"no feature left after excluding {len(cfg.exclusion_list)} names from "
            f"an intersection of {len(intersection)}",
            reports,
        )
    rank = {name: i for i, name in enumerate(by_gain.names())}
    final = sorted(set(after) | set(cfg.always_include), key=rank.__getitem__)

    compact_seed = cfg.seed if cfg.compact_seed is None else cfg.compact_seed
    projected = d.project(final)
    split2 = stratified_split(projected, cfg.train_fraction, compact_seed)
    train2 = projected.subset(split2.train_indices)
    valid2 = projected.subset(split2.validation_indices)
    compact = fit(train2, cfg.compact_config)
    validation = evaluate_gbdt(compact, valid2, cfg.threshold)
    cv = cross_validate(train2, gbdt_runner(cfg.compact_config, cfg.threshold),
                        cfg.cv_folds, compact_seed)

    provenance = {
        "library_version": __version__,
        "config": cfg.to_json(),
        "dataset": d.fingerprint(),
        "wide_split": {"train": len(split.train_indices),
                       "validation": len(split.validation_indices)},
        "compact_split": {"train": len(split2.train_indices),
                          "validation": len(split2.validation_indices)},
        "exclusion_warnings": [
            f"excluded feature {name!r} not in intersection"
            for name in sorted(cfg.exclusion_list - set(intersection))
        ],
    }
    result = SelectionResult(tuple(intersection), tuple(after), tuple(final), reports,
                             provenance, validation, wide)
    return result, compact, cv
