"""Model scoring on held-out data and stratified K-fold cross-validation."""

from functools import partial

import numpy as np

from .boosting import TrainConfig, _check_threshold, fit
from .dataset import stratified_kfold
from .knn import knn_fit, knn_predict
from .metrics import aggregate_cv, evaluate


def gbdt_outputs(model, X, threshold=0.5):
    """(scores, labels). Scores are raw log-odds: AUC is invariant under the
    logistic link, and raw scores do not saturate at 0 or 1."""
    _check_threshold(threshold)
    raw = model.raw_score(X)
    return raw, (model.predict_proba(X) >= threshold).astype(np.int8)


def evaluate_gbdt(model, d, threshold=0.5):
    scores, preds = gbdt_outputs(model, d.rows, threshold)
    return evaluate(d.labels, scores, preds)


def evaluate_knn(model, d):
    scores, preds = knn_predict(model, d.rows)
    return evaluate(d.labels, scores, preds)


def _gbdt_fit_predict(config, threshold, train, test):
    return gbdt_outputs(fit(train, config), test.rows, threshold)


def _knn_fit_predict(k, train, test):
    return knn_predict(knn_fit(train, k=k), test.rows)


def gbdt_runner(config: TrainConfig, threshold=0.5):
    return partial(_gbdt_fit_predict, config, threshold)


def knn_runner(k=5):
    return partial(_knn_fit_predict, k)


def cross_validate(d, runner, k=10, seed=0, pooled=False):
    """Stratified K-fold CV of ``runner(train, test) -> (scores, labels)``.

    Metrics are computed per fold and aggregated; with ``pooled`` the
    out-of-fold predictions are also concatenated into one extra report.
    """
    plan = stratified_kfold(d, k, seed)
    reports = []
    all_labels, all_scores, all_preds = [], [], []
    for i, fold in enumerate(plan.folds):
        train = d.subset(plan.train_indices(i))
        test = d.subset(fold)
        scores, preds = runner(train, test)
        reports.append(evaluate(test.labels, scores, preds))
        all_labels.append(test.labels)
        all_scores.append(scores)
        all_preds.append(preds)
    pooled_report = None
    if pooled:
        pooled_report = evaluate(
            np.concatenate(all_labels), np.concatenate(all_scores), np.concatenate(all_preds)
        )
    return aggregate_cv(reports, pooled_report)
