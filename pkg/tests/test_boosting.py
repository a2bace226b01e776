import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from boostsel.boosting import (
    GbdtModel,
    ObliviousTree,
    TrainConfig,
    class_weights,
    dumps_model,
    fit,
    load_model,
    predict_label,
    predict_proba,
    save_model,
    train,
)
from boostsel.dataset import dataset_from_arrays, quantile_bin
from boostsel.errors import (
    ConfigError,
    CorruptModel,
    DegenerateLabels,
    DimensionMismatch,
    ModelIoError,
    SchemaVersionMismatch,
    TrainingError,
)

from oracles import exhaustive_best, oblivious_gain, replay_levels, sigmoid, weighted_logloss


def one_tree_model(leaf_values, features=(0,), thresholds=(0.5,), base=0.0, n_features=1):
    tree = ObliviousTree(tuple(features), tuple(thresholds),
                         np.asarray(leaf_values, dtype=float), (1.0,) * len(features))
    names = tuple(f"f{j}" for j in range(n_features))
    return GbdtModel([tree], base, 0.1, names, (1.0, 1.0), TrainConfig())


# --- config -----------------------------------------------------------------


@pytest.mark.parametrize("kw", [
    {"iterations": 0}, {"depth": 0}, {"depth": 17}, {"learning_rate": 0.0},
    {"learning_rate": 1.5}, {"l2_leaf_reg": -1.0}, {"class_weighting": "auto"},
    {"max_bins": 1},
])
def test_config_validation(kw):
    with pytest.raises(ConfigError):
        TrainConfig(**kw)


# --- class weights ----------------------------------------------------------


def test_class_weights_balanced_examples():
    assert class_weights([1] * 50 + [0] * 50) == (1.0, 1.0)
    wp, wn = class_weights([1] * 1629 + [0] * 548)
    assert wp == pytest.approx(2177 / 3258) and wn == pytest.approx(2177 / 1096)
    assert round(wp, 4) == 0.6682 and round(wn, 4) == 1.9863
    # classes contribute equally and the total mass is N
    assert 1629 * wp == pytest.approx(548 * wn) == pytest.approx(2177 / 2)


def test_class_weights_none_and_degenerate():
    assert class_weights([1, 1, 0], "none") == (1.0, 1.0)
    with pytest.raises(DegenerateLabels):
        class_weights([1, 1, 1])


# --- training: hand-derived and degenerate cases ----------------------------


def test_depth1_hand_computed():
    # p = 0.5 everywhere, g = +-0.5, h = 0.25; each side G = +-1, H = 0.5
    d = dataset_from_arrays(np.array([[0.0], [0.0], [1.0], [1.0]]), [0, 0, 1, 1])
    cfg = TrainConfig(iterations=1, depth=1, learning_rate=0.1, class_weighting="none")
    m = fit(d, cfg)
    assert m.base_score == 0.0
    (tree,) = m.trees
    assert tree.features == (0,) and tree.thresholds == (0.5,)
    assert tree.gains[0] == pytest.approx(4 / 7, rel=1e-15)
    assert tree.leaf_values.tolist() == pytest.approx([-1 / 35, 1 / 35], rel=1e-15)


def test_no_signal_gives_null_splits():
    X = np.full((6, 3), 2.0)
    d = dataset_from_arrays(X, [1, 0, 1, 0, 1, 0])
    m = fit(d, TrainConfig(iterations=3, depth=2))
    for tree in m.trees:
        assert all(math.isinf(t) for t in tree.thresholds)
        assert tree.gains == (0.0, 0.0)
    assert m.predict_proba(X) == pytest.approx(sigmoid(m.base_score))


def test_base_score_is_weighted_log_odds():
    y = [1, 1, 1, 0]
    d = dataset_from_arrays(np.arange(4.0)[:, None], y)
    assert fit(d, TrainConfig(iterations=1, class_weighting="none")).base_score == \
        pytest.approx(math.log(3))
    assert fit(d, TrainConfig(iterations=1)).base_score == pytest.approx(0.0, abs=1e-15)


def test_train_rejects_single_class_and_bad_weights():
    b = quantile_bin(np.arange(4.0)[:, None])
    with pytest.raises(DegenerateLabels):
        train(b, [1, 1, 1, 1])
    with pytest.raises(TrainingError):
        train(b, [1, 0, 1, 0], weights=[1, 1, 0, 1])


def test_depth2_picks_both_informative_features():
    rng = np.random.default_rng(3)
    n = 200
    y = rng.integers(0, 2, n)
    X = rng.normal(size=(n, 6))
    X[:, 1] += 2.0 * y
    X[:, 4] += 2.0 * y
    d = dataset_from_arrays(X, y)
    m = fit(d, TrainConfig(iterations=1, depth=2, class_weighting="none"))
    assert sorted(m.trees[0].features) == [1, 4]
    # the chosen splits are the exhaustive argmax at each level
    w = np.ones(n)
    for _, _, leaf, g, h, (f, thr, gain) in replay_levels(m, X, y, w):
        best, _ = exhaustive_best(X, leaf, g, h, 3.0)
        assert gain == pytest.approx(best, rel=1e-9)
        assert oblivious_gain(X, leaf, g, h, 3.0, f, thr) == pytest.approx(best, rel=1e-9)


def test_oblivious_structure():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(80, 4))
    y = (X[:, 0] + 0.5 * rng.normal(size=80) > 0).astype(int)
    m = fit(dataset_from_arrays(X, y), TrainConfig(iterations=5, depth=3))
    for tree in m.trees:
        assert tree.leaf_values.shape == (8,)
        idx = tree.leaf_index(X)
        assert idx.min() >= 0 and idx.max() < 8


# --- properties -------------------------------------------------------------


def random_problem(seed, n_max=120, p_max=6):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(10, n_max))
    p = int(rng.integers(1, p_max))
    X = rng.normal(size=(n, p)).round(int(rng.integers(0, 3)))  # rounding injects ties
    y = (X @ rng.normal(size=p) + rng.normal(size=n) > 0).astype(int)
    y[:2] = [0, 1]
    return X, y


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 3))
def test_split_optimality(seed, depth):
    X, y = random_problem(seed)
    cfg = TrainConfig(iterations=3, depth=depth)
    m = fit(dataset_from_arrays(X, y), cfg)
    w = np.where(y == 1, *m.class_weights)
    for _, _, leaf, g, h, (f, thr, gain) in replay_levels(m, X, y, w):
        best, _ = exhaustive_best(X, leaf, g, h, cfg.l2_leaf_reg)
        if math.isinf(thr):
            assert gain == 0.0 and best <= 1e-12 * max(1.0, abs(best))
        else:
            assert gain == pytest.approx(best, rel=1e-9, abs=1e-12)


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 10_000))
def test_loss_monotone(seed):
    X, y = random_problem(seed)
    m = fit(dataset_from_arrays(X, y), TrainConfig(iterations=40, depth=3))
    hist = m.loss_history
    assert len(hist) == 41
    assert all(b <= a + 1e-9 for a, b in zip(hist, hist[1:]))
    # the recorded history matches an independent recomputation
    w = np.where(y == 1, *m.class_weights)
    assert hist[-1] == pytest.approx(weighted_logloss(m.raw_score(X), y, w), rel=1e-12)


def test_weight_equivalence():
    X, y = random_problem(11, n_max=60)
    dup = 3
    X2 = np.vstack([X, X[dup : dup + 1]])
    y2 = np.append(y, y[dup])
    w = np.ones(len(y))
    w[dup] = 2.0
    cfg = TrainConfig(iterations=10, depth=3, class_weighting="none")
    a = train(quantile_bin(X), y, w, cfg)
    b = train(quantile_bin(X2), y2, np.ones(len(y2)), cfg)
    assert a.base_score == pytest.approx(b.base_score, rel=1e-12)
    for ta, tb in zip(a.trees, b.trees):
        assert ta.features == tb.features and ta.thresholds == tb.thresholds
        np.testing.assert_allclose(ta.leaf_values, tb.leaf_values, rtol=1e-12, atol=1e-15)


def test_training_is_deterministic():
    X, y = random_problem(5)
    cfg = TrainConfig(iterations=20, depth=4)
    d = dataset_from_arrays(X, y)
    assert dumps_model(fit(d, cfg)) == dumps_model(fit(d, cfg))


def test_probability_bounds_extreme_inputs():
    m = one_tree_model([-800.0, 800.0])
    p = m.predict_proba(np.array([[0.0], [1.0]]))
    assert 0 < p[0] < p[1] < 1


# --- prediction -------------------------------------------------------------


def test_predict_proba_examples():
    assert predict_proba(one_tree_model([0.0, 0.0], base=0.7), [3.0]) == pytest.approx(sigmoid(0.7))
    assert predict_proba(one_tree_model([0.0, 0.4]), [1.0]) == pytest.approx(0.5987, abs=5e-5)
    with pytest.raises(DimensionMismatch):
        predict_proba(one_tree_model([0.0, 0.4]), [1.0, 2.0])
    with pytest.raises(DimensionMismatch):
        predict_proba(one_tree_model([0.0, 0.4]), [math.nan])


def test_predict_label_boundaries():
    half = one_tree_model([0.0, 0.0])  # proba exactly 0.5
    assert predict_label(half, [0.0]) == 1
    low = one_tree_model([math.log(0.25), 0.0])  # proba 0.2
    assert predict_label(low, [0.0]) == 0
    high = one_tree_model([0.0, math.log(9.0)])  # proba 0.9
    assert predict_label(high, [1.0]) == 1
    assert predict_label(high, [1.0], threshold=0.95) == 0
    for bad in (0.0, 1.0):
        with pytest.raises(ConfigError):
            predict_label(high, [1.0], threshold=bad)


# --- persistence ------------------------------------------------------------


@pytest.fixture
def trained():
    X, y = random_problem(21)
    return fit(dataset_from_arrays(X, y), TrainConfig(iterations=15, depth=3)), X


def test_save_load_roundtrip(tmp_path, trained):
    m, X = trained
    path = tmp_path / "m.json"
    save_model(m, path)
    back = load_model(path)
    rows = np.random.default_rng(0).normal(size=(100, X.shape[1])) * 3
    assert np.array_equal(back.predict_proba(rows), m.predict_proba(rows))
    assert back.feature_names == m.feature_names and back.config == m.config
    assert dumps_model(back) == path.read_text()


def test_null_split_threshold_persists_as_null(tmp_path):
    m = one_tree_model([0.1, 0.1], thresholds=(math.inf,))
    doc = json.loads(dumps_model(m))
    assert doc["trees"][0]["levels"][0]["threshold"] is None
    save_model(m, tmp_path / "m.json")
    assert math.isinf(load_model(tmp_path / "m.json").trees[0].thresholds[0])


def test_truncated_file_is_corrupt(tmp_path, trained):
    path = tmp_path / "m.json"
    text = dumps_model(trained[0])
    path.write_text(text[: len(text) // 2])
    with pytest.raises(CorruptModel):
        load_model(path)


def test_unknown_schema_version(tmp_path, trained):
    doc = json.loads(dumps_model(trained[0]))
    doc["schema_version"] = 99
    path = tmp_path / "m.json"
    path.write_text(json.dumps(doc))
    with pytest.raises(SchemaVersionMismatch):
        load_model(path)


def test_structurally_bad_documents(tmp_path, trained):
    doc = json.loads(dumps_model(trained[0]))
    doc["trees"][0]["leaf_values"].pop()
    path = tmp_path / "m.json"
    path.write_text(json.dumps(doc))
    with pytest.raises(CorruptModel):
        load_model(path)
    with pytest.raises(ModelIoError):
        load_model(tmp_path / "missing.json")
