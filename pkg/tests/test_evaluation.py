import numpy as np
import pytest

from boostsel.boosting import TrainConfig, fit
from boostsel.errors import ConfigError
from boostsel.evaluation import (
    cross_validate,
    evaluate_gbdt,
    gbdt_outputs,
    gbdt_runner,
    knn_runner,
)
from boostsel.synthetic import make_planted

from oracles import exhaustive_best, exhaustive_best_matrix, pairwise_auc, pairwise_auc_counts


@pytest.fixture(scope="module")
def data():
    return make_planted(n_rows=120, n_features=8, seed=5)[0]


def test_gbdt_outputs_are_raw_scores(data):
    m = fit(data, TrainConfig(iterations=10, depth=3))
    scores, labels = gbdt_outputs(m, data.rows)
    assert np.array_equal(scores, m.raw_score(data.rows))
    assert np.array_equal(labels, m.predict_label(data.rows))
    with pytest.raises(ConfigError):
        gbdt_outputs(m, data.rows, threshold=1.0)
    assert evaluate_gbdt(m, data).auc > 0.5


def test_cross_validate_gbdt_and_pooled(data):
    cv = cross_validate(data, gbdt_runner(TrainConfig(iterations=10, depth=3)), k=4,
                        seed=2, pooled=True)
    assert cv.k == 4
    assert sum(r.matrix.total for r in cv.per_fold) == data.n_rows
    assert cv.pooled.matrix.total == data.n_rows
    assert cross_validate(data, gbdt_runner(TrainConfig(iterations=10, depth=3)), k=4,
                          seed=2, pooled=True).to_json() == cv.to_json()


def test_cross_validate_knn(data):
    cv = cross_validate(data, knn_runner(5), k=5, seed=0)
    assert 0.5 < cv.mean["auc"] <= 1.0
    lo, hi = cv.ci95["auc"]
    assert 0.0 <= lo <= cv.mean["auc"] <= hi <= 1.0


# the vectorized oracles used by the acceptance suite agree with the plain ones
def test_vectorized_oracles_agree():
    rng = np.random.default_rng(0)
    for _ in range(20):
        n = int(rng.integers(4, 40))
        y = rng.integers(0, 2, n)
        y[:2] = [0, 1]
        s = rng.integers(0, 5, n)
        assert pairwise_auc_counts(y, s) == pairwise_auc(y, s)
        X = rng.normal(size=(n, 3)).round(1)
        leaf = rng.integers(0, 4, n)
        g, h = rng.normal(size=n), rng.uniform(0.1, 1, n)
        a, _ = exhaustive_best(X, leaf, g, h, 3.0)
        b, _ = exhaustive_best_matrix(X, leaf, g, h, 3.0)
        assert b == pytest.approx(a, rel=1e-12, abs=1e-14)
