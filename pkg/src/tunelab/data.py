"""Tabular ingestion and preprocessing.

Covers the pipeline a tuning experiment needs before any learner runs:
CSV loading with light type inference, imputation, full one-hot dummy
coding, subsampling, target discretization, holdout splitting, and a
synthetic classification generator whose class separation knob controls
how much the two classes' feature distributions overlap.
"""

from __future__ import annotations

import csv
import re
from dataclasses import dataclass

import numpy as np
import pandas as pd

__all__ = [
    "Task",
    "DataError",
    "load_csv",
    "impute",
    "dummy_encode",
    "subsample",
    "discretize_target",
    "holdout_split",
    "synth_classification",
]

TASK_TYPES = ("classification", "regression")
_NA_MARKERS = {"", "NA", "NaN", "nan", "?"}


class DataError(ValueError):
    pass


@dataclass(frozen=True)
class Task:
    """A typed table plus the name of its target column."""

    table: pd.DataFrame
    target: str
    task_type: str

    def __post_init__(self) -> None:
        if self.task_type not in TASK_TYPES:
            raise DataError(f"unknown task type {self.task_type!r}")
        if self.target not in self.table.columns:
            raise DataError(f"target column {self.target!r} not in table")

    @property
    def feature_columns(self) -> list[str]:
        return [c for c in self.table.columns if c != self.target]

    def features(self) -> pd.DataFrame:
        return self.table[self.feature_columns]

    def target_values(self) -> pd.Series:
        return self.table[self.target]


_INT_LITERAL = re.compile(r"^[+-]?\d+$")


def load_csv(path, schema_hints: dict[str, str] | None = None) -> pd.DataFrame:
    """Read a headered CSV into a typed DataFrame.

    `schema_hints` maps column names to "numeric" or "categorical" and
    overrides inference. Cells matching a small NA-marker set become
    missing values. Ragged rows and unparseable numeric cells are errors.
    """
    schema_hints = schema_hints or {}
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise DataError(f"{path}: empty file, header required")
    header = rows[0]
    if len(set(header)) != len(header):
        raise DataError(f"{path}: duplicate column names")
    width = len(header)
    body = rows[1:]
    for i, row in enumerate(body):
        if len(row) != width:
            raise DataError(f"{path}: row {i + 2} has {len(row)} cells, expected {width}")
    for col, hint in schema_hints.items():
        if col not in header:
            raise DataError(f"schema hint for unknown column {col!r}")
        if hint not in ("numeric", "categorical"):
            raise DataError(f"schema hint for {col!r} must be numeric or categorical")

    columns: dict[str, pd.Series] = {}
    for j, name in enumerate(header):
        cells = [row[j] for row in body]
        raw = pd.Series(
            [None if c.strip() in _NA_MARKERS else c for c in cells], dtype=object
        )
        hint = schema_hints.get(name)
        if hint == "categorical":
            columns[name] = raw
            continue
        try:
            numeric = pd.to_numeric(raw, errors="raise")
        except (ValueError, TypeError):
            if hint == "numeric":
                raise DataError(f"{path}: column {name!r} has non-numeric cells") from None
            columns[name] = raw
            continue
        # integer typing is lexical: every observed cell is an integer
        # literal; "1.0" makes the column real even though it is whole
        observed = [c for c in raw if c is not None]
        if observed and all(_INT_LITERAL.match(c.strip()) for c in observed):
            columns[name] = pd.Series(numeric, dtype="Int64")
        else:
            columns[name] = pd.Series(np.asarray(numeric, dtype=float))
    return pd.DataFrame(columns)


def _lower_median(values: np.ndarray) -> float:
    ordered = np.sort(values)
    return float(ordered[(ordered.size - 1) // 2])


def impute(table: pd.DataFrame) -> pd.DataFrame:
    """Fill NA cells: categorical mode, integer lower-median, real mean.

    Mode ties break toward the lexicographically smallest category. The
    integer/real distinction follows the column dtype, which load_csv
    assigns from the literal form of the cells.
    """
    out = table.copy()
    for name in out.columns:
        col = out[name]
        if not col.isna().any():
            continue
        observed = col.dropna()
        if observed.empty:
            raise DataError(f"column {name!r} is entirely missing")
        if pd.api.types.is_integer_dtype(col):
            fill = int(_lower_median(observed.to_numpy(dtype=float)))
        elif pd.api.types.is_numeric_dtype(col):
            fill = float(observed.to_numpy(dtype=float).mean())
        else:
            counts = observed.value_counts()
            top = counts[counts == counts.max()]
            fill = sorted(top.index)[0]
        out[name] = col.fillna(fill)
    return out


def dummy_encode(table: pd.DataFrame) -> pd.DataFrame:
    """One 0/1 column per category level; numeric columns pass through.

    The full dummy set is kept (no reference level dropped), so each
    factor's block sums to 1 across every row.
    """
    pieces: list[pd.Series] = []
    for name in table.columns:
        col = table[name]
        if pd.api.types.is_numeric_dtype(col):
            pieces.append(col.astype(float))
            continue
        if col.isna().any():
            raise DataError(f"column {name!r} still has NA; impute first")
        for level in sorted(col.astype(str).unique()):
            dummy = (col.astype(str) == level).astype(float)
            dummy.name = f"{name}={level}"
            pieces.append(dummy)
    return pd.concat(pieces, axis=1) if pieces else pd.DataFrame(index=table.index)


def subsample(table: pd.DataFrame, m: int, seed: int) -> pd.DataFrame:
    """Draw m rows without replacement, in random order."""
    m = int(m)
    if not (1 <= m <= len(table)):
        raise DataError(f"subsample size {m} outside [1, {len(table)}]")
    rng = np.random.default_rng(seed)
    idx = rng.permutation(len(table))[:m]
    return table.iloc[idx].reset_index(drop=True)


def discretize_target(table: pd.DataFrame, column: str, threshold: float) -> pd.DataFrame:
    """Replace a numeric column by two labels split at the threshold.

    Values strictly below the threshold become "below"; the threshold
    itself and anything larger becomes "at-or-above".
    """
    if column not in table.columns:
        raise DataError(f"column {column!r} not in table")
    col = table[column]
    if not pd.api.types.is_numeric_dtype(col):
        raise DataError(f"column {column!r} is not numeric")
    if col.isna().any():
        raise DataError(f"column {column!r} has NA; impute first")
    out = table.copy()
    labels = np.where(col.to_numpy(dtype=float) < threshold, "below", "at-or-above")
    out[column] = pd.Series(labels, index=table.index, dtype=object)
    return out


def holdout_split(
    table: pd.DataFrame, fraction: float, seed: int
) -> tuple[pd.DataFrame, pd.DataFrame]:
    """Random train/test partition; train gets floor(n * fraction) rows.

    The floor is nudged by 1e-9 so exact products like 10 * 0.6 do not
    round down, and the train size is clamped to [1, n - 1].
    """
    if not (0.0 < fraction < 1.0):
        raise DataError(f"fraction must lie in (0, 1), got {fraction}")
    n = len(table)
    if n < 2:
        raise DataError("need at least two rows to split")
    n_train = int(np.floor(n * fraction + 1e-9))
    n_train = min(max(n_train, 1), n - 1)
    rng = np.random.default_rng(seed)
    perm = rng.permutation(n)
    train = table.iloc[perm[:n_train]]
    test = table.iloc[perm[n_train:]]
    return train, test


def synth_classification(
    m: int,
    n_num: int,
    n_cat: int,
    cardinality: int,
    class_separation: float,
    seed: int,
) -> Task:
    """Two-class synthetic table with a tunable degree of class overlap.

    Numeric features are unit Gaussians whose class means differ by the
    separation value. Categorical features draw levels with exponential
    weights that concentrate the two classes on opposite ends of the
    level list as separation grows; separation 0 makes the classes
    indistinguishable.
    """
    if m < 2:
        raise DataError("need at least two rows")
    if n_num < 0 or n_cat < 0 or n_num + n_cat == 0:
        raise DataError("need at least one feature")
    if n_cat > 0 and cardinality < 2:
        raise DataError("categorical features need cardinality >= 2")
    if class_separation < 0:
        raise DataError("class separation must be >= 0")
    rng = np.random.default_rng(seed)
    n0 = m // 2
    n1 = m - n0
    labels = np.array(["c0"] * n0 + ["c1"] * n1, dtype=object)

    columns: dict[str, np.ndarray] = {}
    for j in range(n_num):
        shift = np.where(labels == "c0", 0.0, class_separation)
        columns[f"num{j}"] = rng.standard_normal(m) + shift
    if n_cat > 0:
        levels = np.array([f"lv{i}" for i in range(cardinality)], dtype=object)
        idx = np.arange(cardinality, dtype=float)
        w0 = np.exp(-class_separation * idx)
        w1 = np.exp(-class_separation * (cardinality - 1 - idx))
        p0 = w0 / w0.sum()
        p1 = w1 / w1.sum()
        for j in range(n_cat):
            draws = np.where(
                labels == "c0",
                rng.choice(cardinality, size=m, p=p0),
                rng.choice(cardinality, size=m, p=p1),
            )
            columns[f"cat{j}"] = levels[draws]
    columns["class"] = labels

    frame = pd.DataFrame(columns)
    order = rng.permutation(m)
    frame = frame.iloc[order].reset_index(drop=True)
    return Task(table=frame, target="class", task_type="classification")
