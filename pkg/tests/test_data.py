"""Loading, imputation, encoding, splitting, and the synthetic generator."""

import numpy as np
import pandas as pd
import pytest

from tunelab.data import (
    DataError,
    Task,
    discretize_target,
    dummy_encode,
    holdout_split,
    impute,
    load_csv,
    subsample,
    synth_classification,
)


def _write(tmp_path, text, name="t.csv"):
    path = tmp_path / name
    path.write_text(text)
    return path


def test_load_csv_types_and_na_markers(tmp_path):
    path = _write(tmp_path, "a,b,c\n1,x,2.5\n2,y,NA\n?,x,1.0\n")
    frame = load_csv(path)
    assert list(frame.columns) == ["a", "b", "c"]
    assert pd.api.types.is_integer_dtype(frame["a"])
    assert frame["c"].dtype == float
    assert frame["b"].dtype == object
    assert pd.isna(frame.loc[2, "a"]) and np.isnan(frame.loc[1, "c"])


def test_load_csv_hints_override_inference(tmp_path):
    path = _write(tmp_path, "code,val\n1,3\n2,4\n")
    frame = load_csv(path, schema_hints={"code": "categorical"})
    assert frame["code"].dtype == object
    assert list(frame["code"]) == ["1", "2"]
    with pytest.raises(DataError, match="non-numeric"):
        load_csv(_write(tmp_path, "v\nabc\n", "bad.csv"), schema_hints={"v": "numeric"})
    with pytest.raises(DataError):
        load_csv(path, schema_hints={"nope": "numeric"})
    with pytest.raises(DataError):
        load_csv(path, schema_hints={"code": "factor"})


def test_load_csv_structural_errors(tmp_path):
    with pytest.raises(DataError, match="row 3"):
        load_csv(_write(tmp_path, "a,b\n1,2\n3\n"))
    with pytest.raises(DataError, match="duplicate"):
        load_csv(_write(tmp_path, "a,a\n1,2\n"))
    with pytest.raises(DataError, match="empty"):
        load_csv(_write(tmp_path, ""))


def test_impute_mode_with_lexicographic_tie_break():
    frame = pd.DataFrame({"c": pd.Series(["a", "a", "b", None], dtype=object)})
    assert list(impute(frame)["c"]) == ["a", "a", "b", "a"]
    # b and a both appear twice; tie goes to "a"
    tied = pd.DataFrame({"c": pd.Series(["b", "b", "a", "a", None], dtype=object)})
    assert impute(tied)["c"][4] == "a"


def test_impute_integer_lower_median():
    frame = pd.DataFrame({"v": pd.array([1, 2, 4, None], dtype="Int64")})
    assert impute(frame)["v"][3] == 2
    # even count of observed values: lower of the two middles
    frame4 = pd.DataFrame({"v": pd.array([1, 2, 4, 8, None], dtype="Int64")})
    assert impute(frame4)["v"][4] == 2


def test_impute_real_mean():
    # a whole-valued real column still gets the mean, not the median
    frame = pd.DataFrame({"v": [1.0, 3.0, np.nan]})
    assert impute(frame)["v"][2] == 2.0


def test_csv_literal_form_decides_integer_vs_real(tmp_path):
    path = _write(tmp_path, "i,r\n1,1.0\n2,3.0\n4,NA\nNA,5.0\n")
    frame = load_csv(path)
    assert pd.api.types.is_integer_dtype(frame["i"])
    assert frame["r"].dtype == float
    filled = impute(frame)
    assert filled["i"][3] == 2  # integer column: lower median of {1,2,4}
    assert filled["r"][2] == 3.0  # real column: mean of {1.0,3.0,5.0}


def test_impute_leaves_complete_columns_alone_and_rejects_empty():
    frame = pd.DataFrame({"v": [1.5, 2.5], "w": [np.nan, np.nan]})
    with pytest.raises(DataError, match="entirely missing"):
        impute(frame)
    complete = pd.DataFrame({"v": [1.5, 2.5]})
    pd.testing.assert_frame_equal(impute(complete), complete)


def test_dummy_encode_full_blocks():
    frame = pd.DataFrame({
        "num": [0.5, 1.5, 2.5],
        "col": pd.Series(["b", "a", "b"], dtype=object),
    })
    enc = dummy_encode(frame)
    assert list(enc.columns) == ["num", "col=a", "col=b"]
    np.testing.assert_array_equal(enc["col=a"], [0, 1, 0])
    np.testing.assert_array_equal(enc["col=b"], [1, 0, 1])
    # no reference level dropped: block sums to one per row
    np.testing.assert_array_equal(enc[["col=a", "col=b"]].sum(axis=1), [1, 1, 1])


def test_dummy_encode_requires_imputed_input():
    frame = pd.DataFrame({"col": pd.Series(["a", None], dtype=object)})
    with pytest.raises(DataError, match="impute"):
        dummy_encode(frame)


def test_subsample_bounds_and_determinism():
    frame = pd.DataFrame({"v": range(100)})
    small = subsample(frame, 10, seed=4)
    assert len(small) == 10 and list(small.index) == list(range(10))
    assert len(set(small["v"])) == 10
    pd.testing.assert_frame_equal(small, subsample(frame, 10, seed=4))
    with pytest.raises(DataError):
        subsample(frame, 0, seed=0)
    with pytest.raises(DataError):
        subsample(frame, 101, seed=0)


def test_discretize_target_threshold_is_inclusive_above():
    frame = pd.DataFrame({"y": [1.0, 2.0, 3.0], "x": [0, 0, 0]})
    out = discretize_target(frame, "y", 2.0)
    assert list(out["y"]) == ["below", "at-or-above", "at-or-above"]
    assert list(out["x"]) == [0, 0, 0]
    with pytest.raises(DataError):
        discretize_target(frame, "missing", 1.0)
    with pytest.raises(DataError):
        discretize_target(out, "y", 1.0)  # already categorical


def test_holdout_split_exact_sizes():
    frame = pd.DataFrame({"v": range(10)})
    train, test = holdout_split(frame, 0.6, seed=1)
    assert len(train) == 6 and len(test) == 4
    # partition, no overlap, original labels kept
    assert sorted(list(train.index) + list(test.index)) == list(range(10))
    with pytest.raises(DataError):
        holdout_split(frame, 1.0, seed=0)
    with pytest.raises(DataError):
        holdout_split(frame.head(1), 0.5, seed=0)


def test_holdout_split_clamps_tiny_fractions():
    frame = pd.DataFrame({"v": range(5)})
    train, test = holdout_split(frame, 0.01, seed=0)
    assert len(train) == 1 and len(test) == 4
    train, test = holdout_split(frame, 0.999, seed=0)
    assert len(train) == 4 and len(test) == 1


def test_holdout_split_deterministic():
    frame = pd.DataFrame({"v": range(20)})
    a_train, a_test = holdout_split(frame, 0.5, seed=7)
    b_train, b_test = holdout_split(frame, 0.5, seed=7)
    pd.testing.assert_frame_equal(a_train, b_train)
    pd.testing.assert_frame_equal(a_test, b_test)


def test_synth_shape_and_balance():
    task = synth_classification(101, n_num=3, n_cat=2, cardinality=4,
                                class_separation=1.0, seed=0)
    frame = task.table
    assert len(frame) == 101
    assert task.target == "class" and task.task_type == "classification"
    assert set(frame["class"]) == {"c0", "c1"}
    assert (frame["class"] == "c0").sum() == 50
    assert task.feature_columns == ["num0", "num1", "num2", "cat0", "cat1"]
    assert set(frame["cat0"]) <= {f"lv{i}" for i in range(4)}


def test_synth_determinism_and_seed_sensitivity():
    a = synth_classification(50, 2, 1, 3, 0.5, seed=9).table
    b = synth_classification(50, 2, 1, 3, 0.5, seed=9).table
    c = synth_classification(50, 2, 1, 3, 0.5, seed=10).table
    pd.testing.assert_frame_equal(a, b)
    assert not a.equals(c)


def test_synth_separation_moves_class_means_apart():
    gaps = []
    for sep in (0.0, 1.0, 3.0):
        frame = synth_classification(4000, 1, 0, 2, sep, seed=3).table
        means = frame.groupby("class")["num0"].mean()
        gaps.append(means["c1"] - means["c0"])
    assert abs(gaps[0]) < 0.15
    assert gaps[0] < gaps[1] < gaps[2]
    assert gaps[1] == pytest.approx(1.0, abs=0.15)


def test_synth_separation_skews_categorical_levels():
    frame = synth_classification(4000, 0, 1, 3, 2.0, seed=4).table
    c0 = frame[frame["class"] == "c0"]["cat0"]
    c1 = frame[frame["class"] == "c1"]["cat0"]
    assert (c0 == "lv0").mean() > 0.7
    assert (c1 == "lv2").mean() > 0.7


def test_synth_validation():
    with pytest.raises(DataError):
        synth_classification(1, 1, 0, 2, 0.5, seed=0)
    with pytest.raises(DataError):
        synth_classification(10, 0, 0, 2, 0.5, seed=0)
    with pytest.raises(DataError):
        synth_classification(10, 0, 1, 1, 0.5, seed=0)
    with pytest.raises(DataError):
        synth_classification(10, 1, 0, 2, -0.5, seed=0)


def test_task_validation():
    frame = pd.DataFrame({"x": [1], "y": [2]})
    with pytest.raises(DataError):
        Task(frame, "z", "classification")
    with pytest.raises(DataError):
        Task(frame, "y", "ranking")
    task = Task(frame, "y", "regression")
    assert task.feature_columns == ["x"]
    assert list(task.features().columns) == ["x"]
    assert list(task.target_values()) == [2]
