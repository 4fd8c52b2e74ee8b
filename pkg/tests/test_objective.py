"""Metrics, the two native learners, and the objective wrapper."""

import math

import numpy as np
import pandas as pd
import pytest

from tunelab.data import Task, holdout_split
from tunelab.objective import (
    Deadline,
    EvaluationTimeout,
    Objective,
    ObjectiveError,
    STATUS_ERROR,
    STATUS_OK,
    STATUS_TIMEOUT,
    cart_fit,
    cart_predict,
    external_objective,
    knn_predict,
    make_objective,
    mmce,
    rmse,
)

# ------------------------------------------------------------------ metrics


def test_mmce_exact_fraction():
    assert mmce(["a", "b", "a", "b"], ["a", "a", "a", "b"]) == 0.25
    assert mmce(["a"], ["a"]) == 0.0
    assert mmce(["a"], ["b"]) == 1.0


def test_rmse_exact_value():
    assert rmse([0.0, 0.0], [3.0, 4.0]) == pytest.approx(math.sqrt(12.5), rel=1e-15)
    assert rmse([1.0, 2.0], [1.0, 2.0]) == 0.0


def test_metric_validation():
    with pytest.raises(ValueError):
        mmce(["a"], ["a", "b"])
    with pytest.raises(ValueError):
        mmce([], [])
    with pytest.raises(ValueError):
        rmse([1.0], [1.0, 2.0])


# ------------------------------------------------------------------ k-NN


def test_knn_nearest_neighbour_memorizes_training_points():
    x = np.array([[0.0], [1.0], [3.0]])
    y = np.array(["a", "b", "b"], dtype=object)
    preds = knn_predict(x, y, x, k=1, p=2.0)
    assert list(preds) == ["a", "b", "b"]


def test_knn_majority_vote():
    x = np.array([[0.0], [1.0], [3.0]])
    y = np.array(["a", "b", "b"], dtype=object)
    assert knn_predict(x, y, np.array([[0.4]]), k=1, p=2.0)[0] == "a"
    assert knn_predict(x, y, np.array([[0.4]]), k=3, p=2.0)[0] == "b"


def test_knn_distance_tie_prefers_smaller_training_index():
    x = np.array([[0.0], [2.0]])
    y = np.array(["a", "b"], dtype=object)
    # the query sits exactly between both points
    assert knn_predict(x, y, np.array([[1.0]]), k=1, p=2.0)[0] == "a"


def test_knn_vote_tie_resolves_by_training_row_of_tied_classes():
    x = np.array([[0.0], [1.0]])
    y = np.array(["b", "a"], dtype=object)
    # one vote each; the tied-class neighbour with the smallest training
    # row index is row 0, which carries "b"
    assert knn_predict(x, y, np.array([[0.5]]), k=2, p=2.0)[0] == "b"


def test_knn_regression_averages_neighbours():
    x = np.array([[0.0], [1.0], [2.0]])
    y = np.array([1.0, 2.0, 4.0])
    got = knn_predict(x, y, np.array([[0.9]]), k=2, p=2.0, task_type="regression")
    assert got[0] == pytest.approx(1.5, rel=1e-15)
    all_of_them = knn_predict(x, y, np.array([[5.0]]), k=3, p=2.0, task_type="regression")
    assert all_of_them[0] == pytest.approx(7.0 / 3.0, rel=1e-15)


def test_knn_minkowski_exponent_changes_the_winner():
    # under p=1 the axis-aligned point is nearer; under p=8 the diagonal
    # point wins because max-coordinate geometry takes over
    x = np.array([[1.3, 0.0], [0.8, 0.8]])
    y = np.array(["axis", "diag"], dtype=object)
    q = np.array([[0.0, 0.0]])
    assert knn_predict(x, y, q, k=1, p=1.0)[0] == "axis"
    assert knn_predict(x, y, q, k=1, p=8.0)[0] == "diag"


def test_knn_argument_validation():
    x = np.array([[0.0], [1.0]])
    y = np.array(["a", "b"], dtype=object)
    with pytest.raises(ValueError):
        knn_predict(x, y, x, k=3, p=2.0)
    with pytest.raises(ValueError):
        knn_predict(x, y, x, k=0, p=2.0)
    with pytest.raises(ValueError):
        knn_predict(x, y, x, k=1, p=0.0)


def test_knn_deadline_aborts():
    x = np.zeros((10, 1))
    y = np.array(["a"] * 5 + ["b"] * 5, dtype=object)
    with pytest.raises(EvaluationTimeout):
        knn_predict(x, y, x, k=1, p=2.0, deadline=Deadline(0.0))


# ------------------------------------------------------------------ CART


def _frame(**cols):
    return pd.DataFrame(cols)


def test_cart_cp_one_means_single_leaf():
    features = _frame(x=[1.0, 2.0, 3.0, 4.0])
    y = ["a", "a", "b", "b"]
    tree = cart_fit(features, y, minsplit=2, minbucket=1, cp=1.0, maxdepth=5)
    assert tree.n_splits == 0
    # mode tie between a and b breaks toward the smaller class label
    assert cart_predict(tree, features)[0] == "a"


def test_cart_pure_node_never_splits():
    features = _frame(x=[1.0, 2.0, 3.0, 4.0])
    tree = cart_fit(features, ["a"] * 4, minsplit=2, minbucket=1, cp=0.0, maxdepth=5)
    assert tree.n_splits == 0


def test_cart_perfect_numeric_split_at_midpoint():
    features = _frame(x=[1.0, 2.0, 3.0, 4.0])
    y = ["a", "a", "b", "b"]
    tree = cart_fit(features, y, minsplit=2, minbucket=1, cp=0.01, maxdepth=5)
    root = tree.nodes[0]
    assert tree.n_splits == 1
    assert root.column == "x" and root.threshold == 2.5
    # Gini mass of the root is 4 - (2^2 + 2^2)/4 = 2, children are pure
    assert root.risk == 2.0 and root.improvement == 2.0
    preds = cart_predict(tree, _frame(x=[0.0, 2.49, 2.51, 9.0]))
    assert list(preds) == ["a", "a", "b", "b"]


def test_cart_minbucket_blocks_unbalanced_cuts():
    features = _frame(x=[1.0, 2.0, 3.0, 4.0])
    y = ["a", "a", "b", "b"]
    ok = cart_fit(features, y, minsplit=2, minbucket=2, cp=0.01, maxdepth=5)
    assert ok.n_splits == 1
    blocked = cart_fit(features, y, minsplit=2, minbucket=3, cp=0.01, maxdepth=5)
    assert blocked.n_splits == 0


def test_cart_minsplit_blocks_small_nodes():
    features = _frame(x=[1.0, 2.0, 3.0, 4.0])
    y = ["a", "a", "b", "b"]
    tree = cart_fit(features, y, minsplit=5, minbucket=1, cp=0.01, maxdepth=5)
    assert tree.n_splits == 0


def test_cart_maxdepth_one_gives_a_stump():
    rng = np.random.default_rng(0)
    features = _frame(x=rng.random(60), z=rng.random(60))
    y = np.where(features["x"] > 0.5, "hi", "lo")
    tree = cart_fit(features, y, minsplit=2, minbucket=1, cp=0.001, maxdepth=1)
    assert tree.depth() <= 1
    assert tree.n_splits == 1


def test_cart_column_tie_breaks_in_declaration_order():
    # both columns yield the identical perfect split
    features = _frame(first=[1.0, 2.0, 3.0, 4.0], second=[1.0, 2.0, 3.0, 4.0])
    y = ["a", "a", "b", "b"]
    tree = cart_fit(features, y, minsplit=2, minbucket=1, cp=0.01, maxdepth=3)
    assert tree.nodes[0].column == "first"


def test_cart_categorical_one_vs_rest():
    features = _frame(c=pd.Series(["u", "u", "v", "w", "v", "w"], dtype=object))
    y = ["a", "a", "b", "b", "b", "b"]
    tree = cart_fit(features, y, minsplit=2, minbucket=1, cp=0.01, maxdepth=3)
    root = tree.nodes[0]
    assert root.kind == "categorical" and root.level == "u"
    preds = cart_predict(tree, _frame(c=pd.Series(["u", "v", "z"], dtype=object)))
    # unseen level z routes right, landing in the b side
    assert list(preds) == ["a", "b", "b"]


def test_cart_regression_splits_on_sse_and_predicts_means():
    features = _frame(x=[0.0, 1.0, 2.0, 3.0])
    y = [0.0, 0.0, 10.0, 10.0]
    tree = cart_fit(features, y, minsplit=2, minbucket=1, cp=0.01, maxdepth=3,
                    task_type="regression")
    root = tree.nodes[0]
    assert root.risk == 100.0  # SSE around the grand mean of 5
    assert root.improvement == 100.0 and root.threshold == 1.5
    preds = cart_predict(tree, _frame(x=[0.5, 2.5]))
    np.testing.assert_array_equal(preds, [0.0, 10.0])


def test_cart_every_split_clears_the_cp_gate():
    rng = np.random.default_rng(7)
    features = _frame(
        a=rng.random(200),
        b=rng.random(200),
        c=pd.Series(rng.choice(["u", "v", "w"], size=200), dtype=object),
    )
    y = np.where(features["a"] + rng.random(200) * 0.3 > 0.6, "pos", "neg")
    cp = 0.02
    minbucket = 3
    tree = cart_fit(features, y, minsplit=8, minbucket=minbucket, cp=cp, maxdepth=6)
    root_risk = tree.nodes[0].risk
    assert tree.n_splits > 1
    for node in tree.nodes:
        assert node.depth <= 6
        if node.is_leaf:
            continue
        assert node.improvement > cp * root_risk
        left, right = tree.nodes[node.left], tree.nodes[node.right]
        assert left.size >= minbucket and right.size >= minbucket
        assert left.size + right.size == node.size
        # greedy risk decomposition: children risks plus the improvement
        # reconstruct the parent risk
        assert left.risk + right.risk + node.improvement == pytest.approx(node.risk, rel=1e-9)


def test_cart_validation():
    features = _frame(x=[1.0, 2.0])
    with pytest.raises(ValueError):
        cart_fit(features, ["a"], minsplit=2, minbucket=1, cp=0.1, maxdepth=2)
    with pytest.raises(ValueError):
        cart_fit(features.head(0), [], minsplit=2, minbucket=1, cp=0.1, maxdepth=2)
    with pytest.raises(ValueError):
        cart_fit(features, ["a", "b"], minsplit=2, minbucket=1, cp=0.1, maxdepth=0)
    with pytest.raises(ValueError):
        cart_fit(_frame(x=[1.0, np.nan]), ["a", "b"], minsplit=2, minbucket=1, cp=0.1, maxdepth=2)


def test_cart_deadline_aborts():
    rng = np.random.default_rng(1)
    features = _frame(x=rng.random(500))
    y = rng.choice(["a", "b"], size=500)
    with pytest.raises(EvaluationTimeout):
        cart_fit(features, y, minsplit=2, minbucket=1, cp=1e-9, maxdepth=20,
                 deadline=Deadline(0.0))


# ------------------------------------------------------------------ objective


def _toy_task(n=40, seed=3, task_type="classification"):
    rng = np.random.default_rng(seed)
    x1 = rng.random(n)
    cat = rng.choice(["u", "v"], size=n)
    if task_type == "classification":
        target = np.where(x1 > 0.5, "hi", "lo").astype(object)
    else:
        target = 3.0 * x1 + (cat == "v") + rng.random(n) * 0.1
    frame = pd.DataFrame({"x1": x1, "cat": pd.Series(cat, dtype=object), "y": target})
    return Task(frame, "y", task_type)


def test_objective_ok_path_and_determinism():
    obj = make_objective(_toy_task(), "knn")
    out = obj({"k": 3, "p": 2.0}, eval_seed=0)
    assert out.status == STATUS_OK
    assert 0.0 <= out.loss <= 1.0
    assert out.total_time > 0.0
    again = obj({"k": 3, "p": 2.0}, eval_seed=5)
    assert again.loss == out.loss


def test_objective_dt_path():
    obj = make_objective(_toy_task(n=60), "dt")
    out = obj({"minsplit": 4, "minbucket": 2, "cp": 0.01, "maxdepth": 6})
    assert out.status == STATUS_OK
    assert out.loss <= obj.fallback_loss + 1e-12


def test_classification_fallback_is_mode_predictor_error_on_test_split():
    task = _toy_task(n=30, seed=9)
    obj = make_objective(task, "knn", split=None)
    train, test = holdout_split(obj.task.table, 0.6, 0)
    counts = train["y"].value_counts()
    mode = sorted(counts[counts == counts.max()].index)[0]
    want = float((test["y"] != mode).mean())
    assert obj.fallback_loss == want


def test_regression_fallback_is_train_mean_rmse():
    task = _toy_task(n=30, seed=4, task_type="regression")
    obj = make_objective(task, "dt")
    train, test = holdout_split(obj.task.table, 0.6, 0)
    mean = float(train["y"].mean())
    want = float(np.sqrt(((test["y"].to_numpy() - mean) ** 2).mean()))
    assert obj.fallback_loss == pytest.approx(want, rel=1e-15)


def test_objective_error_fallback_on_bad_params():
    obj = make_objective(_toy_task(n=20), "knn")
    # k larger than the training split
    out = obj({"k": 1000, "p": 2.0})
    assert out.status == STATUS_ERROR
    assert out.loss == obj.fallback_loss
    assert out.train_time == 0.0 and out.predict_time == 0.0
    # missing keys count as an evaluation error too
    assert obj({}).status == STATUS_ERROR


def test_objective_timeout_fallback():
    obj = make_objective(_toy_task(n=200), "dt", timeout=1e-9)
    out = obj({"minsplit": 2, "minbucket": 1, "cp": 1e-9, "maxdepth": 25})
    assert out.status == STATUS_TIMEOUT
    assert out.loss == obj.fallback_loss


def test_with_timeout_clones_without_touching_the_original():
    obj = make_objective(_toy_task(n=200), "dt", timeout=1e-9)
    relaxed = obj.with_timeout(None)
    assert relaxed.timeout is None and obj.timeout == 1e-9
    assert relaxed.fallback_loss == obj.fallback_loss
    out = relaxed({"minsplit": 4, "minbucket": 2, "cp": 0.01, "maxdepth": 6})
    assert out.status == STATUS_OK


def test_objective_construction_errors():
    task = _toy_task()
    with pytest.raises(ObjectiveError):
        make_objective(task, "boosting")
    with pytest.raises(ObjectiveError):
        make_objective(task, "knn", timeout=0.0)
    with pytest.raises(ObjectiveError):
        make_objective(task, "external")
    single = Task(pd.DataFrame({"x": [1.0] * 10, "y": ["a"] * 10}), "y", "classification")
    with pytest.raises(ObjectiveError):
        make_objective(single, "knn")
    with_na = Task(pd.DataFrame({"x": [1.0, np.nan], "y": ["a", "b"]}), "y", "classification")
    with pytest.raises(ObjectiveError):
        make_objective(with_na, "knn")


# ------------------------------------------------------------------ external


def test_external_runs_command_and_reads_result(tmp_path):
    capture = tmp_path / "captured.txt"
    obj = make_objective(
        _toy_task(),
        "external",
        command_template=f"cp {{params}} {capture} && printf '0.5' > {{result}}",
    )
    out = obj({"gamma": 0.25, "alpha": 2}, eval_seed=7)
    assert out.status == STATUS_OK and out.loss == 0.5
    assert capture.read_text() == "alpha=2\ngamma=0.25\neval_seed=7\n"


def test_external_nonzero_exit_is_error_fallback():
    obj = make_objective(_toy_task(), "external", command_template="cat {params} {result}; false")
    out = obj({"a": 1})
    assert out.status == STATUS_ERROR and out.loss == obj.fallback_loss


def test_external_malformed_or_nonfinite_result_is_error_fallback():
    bad = make_objective(
        _toy_task(), "external",
        command_template="cat {params} > /dev/null && printf 'oops' > {result}",
    )
    assert bad({"a": 1}).status == STATUS_ERROR
    inf = make_objective(
        _toy_task(), "external",
        command_template="cat {params} > /dev/null && printf 'inf' > {result}",
    )
    assert inf({"a": 1}).status == STATUS_ERROR


def test_external_timeout_is_timeout_fallback():
    obj = make_objective(
        _toy_task(), "external", timeout=0.2,
        command_template="cat {params} > /dev/null && sleep 5 && printf '0' > {result}",
    )
    out = obj({"a": 1})
    assert out.status == STATUS_TIMEOUT and out.loss == obj.fallback_loss


def test_external_template_needs_both_placeholders():
    with pytest.raises(ObjectiveError):
        external_objective("run {params}", None, None, 0.5)
