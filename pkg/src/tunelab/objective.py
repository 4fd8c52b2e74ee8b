"""Loss functions over natural hyperparameter assignments.

`make_objective` binds a task to a holdout split and a learner and
returns a callable mapping (natural assignment, eval seed) to a loss
plus timings and a status. Evaluations never raise: a blown per-call
timeout yields status "timeout-fallback" and any internal error yields
"error-fallback", both carrying the precomputed fallback loss (the
mode-predictor MMCE for classification, the train-mean RMSE for
regression, measured on the same test split).

The two native learners, k-NN and a CART-style tree, live here too.
Both poll a cooperative deadline so long fits can be abandoned. An
adapter for external command-line learners rounds out the module.
"""

from __future__ import annotations

import copy
import math
import shlex
import subprocess
import tempfile
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

from ._kernels import minkowski_cdist
from .data import Task, dummy_encode, holdout_split

__all__ = [
    "HoldoutSplit",
    "EvalOutcome",
    "Deadline",
    "EvaluationTimeout",
    "ObjectiveError",
    "Objective",
    "STATUS_OK",
    "STATUS_TIMEOUT",
    "STATUS_ERROR",
    "mmce",
    "rmse",
    "knn_predict",
    "CartTree",
    "cart_fit",
    "cart_predict",
    "make_objective",
    "external_objective",
]

STATUS_OK = "ok"
STATUS_TIMEOUT = "timeout-fallback"
STATUS_ERROR = "error-fallback"

_KNN_BATCH = 256


class ObjectiveError(ValueError):
    """Misconfiguration detected before the first evaluation."""


class EvaluationTimeout(Exception):
    """Raised internally when a cooperative deadline expires."""


class Deadline:
    """Wall-clock deadline polled by the native learners."""

    __slots__ = ("t_end",)

    def __init__(self, seconds: float | None = None) -> None:
        self.t_end = None if seconds is None else time.perf_counter() + float(seconds)

    def expired(self) -> bool:
        return self.t_end is not None and time.perf_counter() >= self.t_end

    def check(self) -> None:
        if self.expired():
            raise EvaluationTimeout


@dataclass(frozen=True)
class HoldoutSplit:
    train_fraction: float = 0.6
    split_seed: int = 0

    def __post_init__(self) -> None:
        if not (0.0 < self.train_fraction < 1.0):
            raise ObjectiveError("train_fraction must lie in (0, 1)")


@dataclass(frozen=True)
class EvalOutcome:
    loss: float
    train_time: float
    predict_time: float
    total_time: float
    status: str


# ---------------------------------------------------------------- metrics


def mmce(y_true, y_pred) -> float:
    """Mean misclassification error."""
    a = np.asarray(y_true, dtype=object).ravel()
    b = np.asarray(y_pred, dtype=object).ravel()
    if a.size != b.size or a.size == 0:
        raise ValueError("label vectors must have equal positive length")
    return float(np.mean(a != b))


def rmse(y_true, y_pred) -> float:
    """Root mean squared error."""
    a = np.asarray(y_true, dtype=float).ravel()
    b = np.asarray(y_pred, dtype=float).ravel()
    if a.size != b.size or a.size == 0:
        raise ValueError("value vectors must have equal positive length")
    return float(np.sqrt(np.mean((a - b) ** 2)))


# ---------------------------------------------------------------- k-NN


def knn_predict(
    train_x,
    train_y,
    query_x,
    k: int,
    p: float,
    task_type: str = "classification",
    deadline: Deadline | None = None,
) -> np.ndarray:
    """Minkowski k-nearest-neighbour prediction on dummy-coded features.

    Distance ties at rank k resolve toward the smaller training row
    index (stable sort); a tied majority vote goes to the class owning
    the tied-class neighbour with the smallest training row index.
    """
    train_x = np.ascontiguousarray(np.asarray(train_x, dtype=float))
    query_x = np.ascontiguousarray(np.asarray(query_x, dtype=float))
    m = train_x.shape[0]
    k = int(k)
    if k < 1:
        raise ValueError("k must be >= 1")
    if k > m:
        raise ValueError(f"k={k} exceeds training size {m}")
    if not (float(p) > 0.0):
        raise ValueError("p must be > 0")

    classify = task_type == "classification"
    if classify:
        y_arr = np.asarray(train_y, dtype=object).ravel()
        classes, codes = np.unique(y_arr, return_inverse=True)
        out = np.empty(query_x.shape[0], dtype=object)
    else:
        y_num = np.asarray(train_y, dtype=float).ravel()
        out = np.empty(query_x.shape[0], dtype=float)

    for start in range(0, query_x.shape[0], _KNN_BATCH):
        if deadline is not None:
            deadline.check()
        batch = query_x[start : start + _KNN_BATCH]
        dist = minkowski_cdist(batch, train_x, float(p))
        order = np.argsort(dist, axis=1, kind="stable")[:, :k]
        for row, nb in enumerate(order):
            if classify:
                counts = np.bincount(codes[nb], minlength=classes.size)
                top = counts.max()
                tied = np.flatnonzero(counts == top)
                if tied.size == 1:
                    out[start + row] = classes[tied[0]]
                else:
                    in_tie = nb[np.isin(codes[nb], tied)]
                    out[start + row] = classes[codes[in_tie.min()]]
            else:
                out[start + row] = float(y_num[nb].mean())
    return out


# ---------------------------------------------------------------- CART

# risk = size-weighted impurity: n*gini for classification, SSE for
# regression; the same quantity feeds split selection and the cp gate.


@dataclass
class _Column:
    name: str
    kind: str  # numeric | categorical
    values: np.ndarray  # float values or level codes
    levels: np.ndarray | None = None


@dataclass
class CartNode:
    prediction: object
    size: int
    depth: int
    risk: float
    column: str | None = None
    kind: str | None = None
    threshold: float | None = None
    level: str | None = None
    left: int = -1
    right: int = -1
    improvement: float = 0.0

    @property
    def is_leaf(self) -> bool:
        return self.column is None


@dataclass
class CartTree:
    nodes: list[CartNode]
    task_type: str
    columns: list[str] = field(default_factory=list)

    @property
    def n_splits(self) -> int:
        return sum(0 if nd.is_leaf else 1 for nd in self.nodes)

    def depth(self) -> int:
        return max(nd.depth for nd in self.nodes)


def _prepare_columns(features: pd.DataFrame) -> list[_Column]:
    cols: list[_Column] = []
    for name in features.columns:
        series = features[name]
        if pd.api.types.is_numeric_dtype(series):
            vals = series.to_numpy(dtype=float)
            if np.isnan(vals).any():
                raise ValueError(f"column {name!r} has NA; impute first")
            cols.append(_Column(name=name, kind="numeric", values=vals))
        else:
            as_str = series.astype(str).to_numpy()
            levels = np.unique(as_str)
            codes = np.searchsorted(levels, as_str)
            cols.append(_Column(name=name, kind="categorical", values=codes, levels=levels))
    return cols


def _class_risk(counts: np.ndarray) -> float:
    n = counts.sum()
    if n == 0:
        return 0.0
    return float(n - (counts.astype(float) ** 2).sum() / n)


def _numeric_split(vals, y_codes, y_num, n_classes, classify, minbucket, node_risk):
    order = np.argsort(vals, kind="stable")
    vs = vals[order]
    n = vs.size
    cuts = np.flatnonzero(vs[:-1] < vs[1:])
    if cuts.size == 0:
        return None
    s = (cuts + 1).astype(float)
    t = n - s
    if classify:
        ys = y_codes[order]
        onehot = np.zeros((n, n_classes))
        onehot[np.arange(n), ys] = 1.0
        cum = np.cumsum(onehot, axis=0)
        left_counts = cum[cuts]
        right_counts = cum[-1] - left_counts
        left_mass = s - (left_counts**2).sum(axis=1) / s
        right_mass = t - (right_counts**2).sum(axis=1) / t
    else:
        ys = y_num[order]
        cum1 = np.cumsum(ys)
        cum2 = np.cumsum(ys**2)
        left_mass = cum2[cuts] - cum1[cuts] ** 2 / s
        right_mass = (cum2[-1] - cum2[cuts]) - (cum1[-1] - cum1[cuts]) ** 2 / t
    impr = node_risk - left_mass - right_mass
    valid = (s >= minbucket) & (t >= minbucket)
    if not valid.any():
        return None
    impr = np.where(valid, impr, -np.inf)
    best = int(np.argmax(impr))  # first maximum: smallest threshold wins ties
    thr = float((vs[cuts[best]] + vs[cuts[best] + 1]) / 2.0)
    return float(impr[best]), thr


def _categorical_split(codes, levels, y_codes, y_num, n_classes, classify, minbucket, node_risk):
    n = codes.size
    best = None
    for li in range(levels.size):
        mask = codes == li
        s = int(mask.sum())
        if s < minbucket or (n - s) < minbucket or s == 0 or s == n:
            continue
        if classify:
            left_counts = np.bincount(y_codes[mask], minlength=n_classes)
            right_counts = np.bincount(y_codes[~mask], minlength=n_classes)
            impr = node_risk - _class_risk(left_counts) - _class_risk(right_counts)
        else:
            yl = y_num[mask]
            yr = y_num[~mask]
            sse_l = float(((yl - yl.mean()) ** 2).sum())
            sse_r = float(((yr - yr.mean()) ** 2).sum())
            impr = node_risk - sse_l - sse_r
        if best is None or impr > best[0]:
            best = (float(impr), str(levels[li]))
    return best


def cart_fit(
    features: pd.DataFrame,
    y,
    *,
    minsplit: int,
    minbucket: int,
    cp: float,
    maxdepth: int,
    task_type: str = "classification",
    deadline: Deadline | None = None,
) -> CartTree:
    """Greedy binary tree with rpart-style stopping rules.

    A node is split only when its size reaches minsplit, both children
    would hold at least minbucket rows, the children stay within
    maxdepth levels below the root (the root itself is depth 0), and
    the risk improvement strictly exceeds cp times the root risk.
    """
    if len(features) == 0:
        raise ValueError("empty training data")
    if len(features) != len(np.asarray(y, dtype=object).ravel()):
        raise ValueError("feature and target lengths differ")
    minsplit = max(int(minsplit), 1)
    minbucket = max(int(minbucket), 1)
    maxdepth = int(maxdepth)
    if maxdepth < 1:
        raise ValueError("maxdepth must be >= 1")
    classify = task_type == "classification"

    cols = _prepare_columns(features)
    if classify:
        y_arr = np.asarray(y, dtype=object).ravel()
        classes, y_codes = np.unique(y_arr, return_inverse=True)
        y_num = None
        n_classes = classes.size
    else:
        y_num = np.asarray(y, dtype=float).ravel()
        y_codes = None
        classes = None
        n_classes = 0

    def node_stats(idx: np.ndarray) -> tuple[float, object]:
        if classify:
            counts = np.bincount(y_codes[idx], minlength=n_classes)
            pred = classes[int(np.argmax(counts))]  # first max: smallest class code
            return _class_risk(counts), pred
        vals = y_num[idx]
        mean = float(vals.mean())
        return float(((vals - mean) ** 2).sum()), mean

    nodes: list[CartNode] = []
    root_idx = np.arange(len(features))
    root_risk, root_pred = node_stats(root_idx)
    nodes.append(CartNode(prediction=root_pred, size=root_idx.size, depth=0, risk=root_risk))
    stack: list[tuple[int, np.ndarray]] = [(0, root_idx)]

    while stack:
        node_id, idx = stack.pop()
        if deadline is not None:
            deadline.check()
        node = nodes[node_id]
        if node.size < minsplit or node.depth >= maxdepth or node.risk <= 0.0:
            continue

        yc = y_codes[idx] if classify else None
        yn = y_num[idx] if not classify else None
        best = None  # (improvement, col_pos, kind, threshold, level)
        for pos, col in enumerate(cols):
            sub = col.values[idx]
            if col.kind == "numeric":
                found = _numeric_split(sub, yc, yn, n_classes, classify, minbucket, node.risk)
                if found is not None:
                    impr, thr = found
                    if best is None or impr > best[0]:
                        best = (impr, pos, "numeric", thr, None)
            else:
                found = _categorical_split(
                    sub, col.levels, yc, yn, n_classes, classify, minbucket, node.risk
                )
                if found is not None:
                    impr, lvl = found
                    if best is None or impr > best[0]:
                        best = (impr, pos, "categorical", None, lvl)

        if best is None:
            continue
        impr, pos, kind, thr, lvl = best
        if not (impr > 0.0 and impr > cp * root_risk):
            continue

        col = cols[pos]
        sub = col.values[idx]
        if kind == "numeric":
            go_left = sub <= thr
        else:
            go_left = sub == np.searchsorted(col.levels, lvl)
        left_idx = idx[go_left]
        right_idx = idx[~go_left]

        lrisk, lpred = node_stats(left_idx)
        rrisk, rpred = node_stats(right_idx)
        left_id = len(nodes)
        nodes.append(CartNode(prediction=lpred, size=left_idx.size, depth=node.depth + 1, risk=lrisk))
        right_id = len(nodes)
        nodes.append(CartNode(prediction=rpred, size=right_idx.size, depth=node.depth + 1, risk=rrisk))
        node.column = col.name
        node.kind = kind
        node.threshold = thr
        node.level = lvl
        node.left = left_id
        node.right = right_id
        node.improvement = float(impr)
        stack.append((right_id, right_idx))
        stack.append((left_id, left_idx))

    return CartTree(nodes=nodes, task_type=task_type, columns=[c.name for c in cols])


def cart_predict(tree: CartTree, rows: pd.DataFrame, deadline: Deadline | None = None) -> np.ndarray:
    """Route rows down the tree; unseen categorical levels go right."""
    numeric_cache: dict[str, np.ndarray] = {}
    string_cache: dict[str, np.ndarray] = {}
    for name in rows.columns:
        series = rows[name]
        if pd.api.types.is_numeric_dtype(series):
            numeric_cache[name] = series.to_numpy(dtype=float)
        else:
            string_cache[name] = series.astype(str).to_numpy()

    classify = tree.task_type == "classification"
    out = np.empty(len(rows), dtype=object if classify else float)
    for i in range(len(rows)):
        if deadline is not None and i % _KNN_BATCH == 0:
            deadline.check()
        node = tree.nodes[0]
        while not node.is_leaf:
            if node.kind == "numeric":
                go_left = numeric_cache[node.column][i] <= node.threshold
            else:
                col = string_cache.get(node.column)
                if col is None:
                    col = numeric_cache[node.column].astype(str)
                go_left = col[i] == node.level
            node = tree.nodes[node.left if go_left else node.right]
        out[i] = node.prediction
    return out if classify else out.astype(float)


# ---------------------------------------------------------------- objective


def _mode_label(values: pd.Series) -> object:
    counts = values.value_counts()
    top = counts[counts == counts.max()]
    return sorted(top.index)[0]


class Objective:
    """Callable loss over natural assignments for one (task, learner, split)."""

    def __init__(
        self,
        task: Task,
        learner_id: str,
        split: HoldoutSplit | None = None,
        timeout: float | None = None,
        command_template: str | None = None,
        workdir: str | None = None,
    ) -> None:
        if learner_id not in ("knn", "dt", "external"):
            raise ObjectiveError(f"unknown learner {learner_id!r}")
        if task.table[task.feature_columns].isna().any().any():
            raise ObjectiveError("task features contain NA; impute first")
        if timeout is not None and timeout <= 0:
            raise ObjectiveError("timeout must be positive or disabled (None)")

        # positional row identity; guards .loc slicing against repeated labels
        task = Task(task.table.reset_index(drop=True), task.target, task.task_type)
        self.task = task
        self.learner_id = learner_id
        self.split = split or HoldoutSplit()
        self.timeout = timeout
        self.task_type = task.task_type
        self._command_template = command_template
        self._workdir = workdir

        train, test = holdout_split(task.table, self.split.train_fraction, self.split.split_seed)
        self._train = train
        self._test = test
        y_train = train[task.target]
        y_test = test[task.target]
        self._y_train = y_train
        self._y_test = y_test

        if task.task_type == "classification":
            if y_train.nunique() < 2:
                raise ObjectiveError("training split has fewer than two classes")
            mode = _mode_label(y_train)
            self.fallback_loss = mmce(y_test.to_numpy(), np.full(len(y_test), mode, dtype=object))
        else:
            mean = float(y_train.astype(float).mean())
            self.fallback_loss = rmse(y_test.to_numpy(dtype=float), np.full(len(y_test), mean))

        if learner_id == "knn":
            encoded = dummy_encode(task.features())
            self._x_train = encoded.loc[train.index].to_numpy(dtype=float)
            self._x_test = encoded.loc[test.index].to_numpy(dtype=float)
        elif learner_id == "dt":
            self._f_train = train[task.feature_columns]
            self._f_test = test[task.feature_columns]
        else:
            if not command_template:
                raise ObjectiveError("external learner needs a command template")
            self._external = external_objective(
                command_template, workdir, timeout, self.fallback_loss
            )

    def with_timeout(self, timeout: float | None) -> "Objective":
        """Same objective, different per-call timeout; split state is shared."""
        clone = copy.copy(self)
        clone.timeout = timeout
        if self.learner_id == "external":
            clone._external = external_objective(
                self._command_template, self._workdir, timeout, self.fallback_loss
            )
        return clone

    # the loss map is deterministic for a fixed assignment and seed
    def __call__(self, natural: dict, eval_seed: int = 0) -> EvalOutcome:
        if self.learner_id == "external":
            return self._external(natural, eval_seed)
        t0 = time.perf_counter()
        deadline = Deadline(self.timeout) if self.timeout is not None else None
        try:
            if self.learner_id == "knn":
                train_time = 0.0
                t1 = time.perf_counter()
                preds = knn_predict(
                    self._x_train,
                    self._y_train.to_numpy(),
                    self._x_test,
                    int(natural["k"]),
                    float(natural["p"]),
                    task_type=self.task_type,
                    deadline=deadline,
                )
                predict_time = time.perf_counter() - t1
            else:
                t1 = time.perf_counter()
                tree = cart_fit(
                    self._f_train,
                    self._y_train.to_numpy(),
                    minsplit=int(natural["minsplit"]),
                    minbucket=int(natural["minbucket"]),
                    cp=float(natural["cp"]),
                    maxdepth=int(natural["maxdepth"]),
                    task_type=self.task_type,
                    deadline=deadline,
                )
                train_time = time.perf_counter() - t1
                t1 = time.perf_counter()
                preds = cart_predict(tree, self._f_test, deadline=deadline)
                predict_time = time.perf_counter() - t1
            if self.task_type == "classification":
                loss = mmce(self._y_test.to_numpy(), preds)
            else:
                loss = rmse(self._y_test.to_numpy(dtype=float), preds)
            status = STATUS_OK
        except EvaluationTimeout:
            loss, status = self.fallback_loss, STATUS_TIMEOUT
            train_time = predict_time = 0.0
        except Exception:
            loss, status = self.fallback_loss, STATUS_ERROR
            train_time = predict_time = 0.0
        total = time.perf_counter() - t0
        return EvalOutcome(
            loss=float(loss),
            train_time=float(train_time),
            predict_time=float(predict_time),
            total_time=float(total),
            status=status,
        )


def make_objective(
    task: Task,
    learner_id: str,
    split: HoldoutSplit | None = None,
    timeout: float | None = None,
    *,
    command_template: str | None = None,
    workdir: str | None = None,
) -> Objective:
    return Objective(task, learner_id, split, timeout, command_template, workdir)


def external_objective(
    command_template: str,
    workdir: str | None,
    timeout: float | None,
    fallback_loss: float,
):
    """Adapter for a shell command evaluating one assignment.

    The template must contain {params} and {result} placeholders. The
    parameter file holds one name=value line per hyperparameter plus the
    eval seed; the command must write a single decimal number to the
    result path and exit 0.
    """
    if "{params}" not in command_template or "{result}" not in command_template:
        raise ObjectiveError("command template needs {params} and {result} placeholders")

    def run(natural: dict, eval_seed: int = 0) -> EvalOutcome:
        t0 = time.perf_counter()
        status = STATUS_OK
        loss = fallback_loss
        with tempfile.TemporaryDirectory(dir=workdir) as td:
            params_path = Path(td) / "params.txt"
            result_path = Path(td) / "result.txt"
            lines = [f"{k}={natural[k]}" for k in sorted(natural)]
            lines.append(f"eval_seed={int(eval_seed)}")
            params_path.write_text("\n".join(lines) + "\n")
            cmd = command_template.format(
                params=shlex.quote(str(params_path)), result=shlex.quote(str(result_path))
            )
            try:
                proc = subprocess.run(
                    cmd, shell=True, timeout=timeout, capture_output=True, text=True
                )
                if proc.returncode != 0:
                    status = STATUS_ERROR
                else:
                    try:
                        value = float(result_path.read_text().strip())
                        if math.isfinite(value):
                            loss = value
                        else:
                            status = STATUS_ERROR
                    except (OSError, ValueError):
                        status = STATUS_ERROR
            except subprocess.TimeoutExpired:
                status = STATUS_TIMEOUT
        elapsed = time.perf_counter() - t0
        return EvalOutcome(
            loss=float(loss),
            train_time=float(elapsed),
            predict_time=0.0,
            total_time=float(elapsed),
            status=status,
        )

    return run
