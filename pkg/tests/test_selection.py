import numpy as np
import pytest

from boostsel.boosting import TrainConfig, dumps_model
from boostsel.dataset import DatasetMatrix
from boostsel.errors import (
    ConfigError,
    EmptySelection,
    FeatureUniverseMismatch,
    MissingColumn,
    MissingValues,
)
from boostsel.importance import ImportanceReport, top_k
from boostsel.selection import SelectionConfig, apply_exclusions, intersect_top_k, run_pipeline
from boostsel.synthetic import make_planted, probe_list

FAST = dict(
    wide_config=TrainConfig(iterations=40, depth=4),
    compact_config=TrainConfig(iterations=30, depth=4),
    cv_folds=3,
)


def report(names, scores):
    return ImportanceReport.build("x", tuple(names), list(scores), "raw")


def test_intersect_example():
    names = ("a", "b", "c", "d", "e")
    r1 = report(names, [5, 4, 3, 0, 0])
    r2 = report(names, [0, 4, 5, 3, 0])
    assert intersect_top_k(r1, r2, 3) == ["b", "c"]
    assert intersect_top_k(r1, r1, 3) == top_k(r1, 3)


def test_intersect_universe_mismatch():
    with pytest.raises(FeatureUniverseMismatch):
        intersect_top_k(report("ab", [1, 2]), report("ac", [1, 2]), 1)


def test_apply_exclusions():
    assert apply_exclusions(["a", "b", "c"], {"b"}) == ["a", "c"]
    assert apply_exclusions(["a", "b"], set()) == ["a", "b"]


def test_shipped_probe_lists():
    all34, keep, drop = (probe_list(n) for n in
                         ("probesets_34", "probesets_26_keep", "probesets_8_exclude"))
    assert (len(all34), len(keep), len(drop)) == (34, 26, 8)
    assert set(apply_exclusions(all34, set(drop))) == set(keep)


def test_config_rejects_overlap():
    with pytest.raises(ConfigError):
        SelectionConfig(exclusion_list={"age"}, always_include=("age",))
    with pytest.raises(ConfigError):
        SelectionConfig(top_k=0)


@pytest.fixture(scope="module")
def planted():
    return make_planted(n_rows=200, n_features=20, seed=3)


@pytest.fixture(scope="module")
def pipeline(planted):
    d, _ = planted
    return run_pipeline(d, SelectionConfig(top_k=8, seed=1, **FAST))


def test_pipeline_recovers_planted(planted, pipeline):
    _, informative = planted
    result, compact, cv = pipeline
    assert set(informative) <= set(result.final_features)
    assert cv.k == 3 and cv.mean["auc"] > 0.9
    assert result.validation.auc > 0.9


def test_subset_chain_and_projection(pipeline):
    result, compact, _ = pipeline
    r1, r2 = result.reports
    assert set(result.intersection) <= set(top_k(r1, 8)) & set(top_k(r2, 8))
    assert result.final_features == result.after_exclusion  # nothing excluded/forced
    assert compact.feature_names == result.final_features


def test_pipeline_determinism(planted, pipeline):
    d, _ = planted
    again, compact, cv = run_pipeline(d, SelectionConfig(top_k=8, seed=1, **FAST))
    result, compact0, cv0 = pipeline
    assert again.to_json() == result.to_json()
    assert dumps_model(compact) == dumps_model(compact0)
    assert cv.to_json() == cv0.to_json()


def test_exclusion_and_warnings(planted, pipeline):
    d, _ = planted
    result, _, _ = pipeline
    dropped = result.intersection[0]
    cfg = SelectionConfig(top_k=8, seed=1, exclusion_list={dropped, "not_a_feature"}, **FAST)
    res2, _, _ = run_pipeline(d, cfg)
    assert dropped not in res2.final_features
    assert res2.after_exclusion == tuple(f for f in result.intersection if f != dropped)
    assert any("not_a_feature" in w for w in res2.provenance["exclusion_warnings"])


def test_empty_selection_carries_reports(planted):
    d, _ = planted
    cfg = SelectionConfig(top_k=8, seed=1, exclusion_list=set(d.feature_names), **FAST)
    with pytest.raises(EmptySelection) as exc:
        run_pipeline(d, cfg)
    assert len(exc.value.reports) == 2


def test_always_include_age(planted):
    d, _ = planted
    rng = np.random.default_rng(0)
    age = rng.uniform(20, 80, d.n_rows).round()
    aged = DatasetMatrix(("age",) + d.feature_names, np.column_stack([age, d.rows]),
                         d.labels, d.sample_ids, age_column=0)
    result, compact, _ = run_pipeline(aged, SelectionConfig(top_k=5, seed=1,
                                                            always_include=("age",), **FAST))
    assert "age" in result.final_features
    assert set(result.final_features) - {"age"} <= set(result.intersection)
    assert compact.feature_names == result.final_features


def test_preconditions(planted):
    d, _ = planted
    with pytest.raises(MissingColumn):
        run_pipeline(d, SelectionConfig(always_include=("age",), **FAST))
    rows = d.rows.copy()
    rows[0, 0] = np.nan
    with_gap = DatasetMatrix(d.feature_names, rows, d.labels, d.sample_ids, age_column=0)
    with pytest.raises(MissingValues):
        run_pipeline(with_gap, SelectionConfig(**FAST))
