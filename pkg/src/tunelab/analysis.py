"""Benchmark post-processing.

Rank aggregation (Kendall-tau distance, exhaustive Kemeny consensus,
rank frequencies over cases), a two-class difficulty score based on
per-feature sample overlap, and text/CSV sensitivity exports built from
a tuning result's archive.
"""

from __future__ import annotations

import io
import itertools
import math
from dataclasses import dataclass

import numpy as np
import pandas as pd

from .data import Task
from .objective import cart_fit
from .space import SearchSpace
from .surrogate import KrigingConfig, fit

__all__ = [
    "AnalysisError",
    "RankingCase",
    "make_case",
    "kendall_tau",
    "kemeny_consensus",
    "rank_frequencies",
    "rank_losses",
    "sample_overlap",
    "feature_overlaps",
    "difficulty_level",
    "DIFFICULTY_ANCHORS",
    "sensitivity_export",
]

# consensus search enumerates k! permutations; keep k small
_MAX_EXHAUSTIVE_K = 8

DIFFICULTY_ANCHORS = (0.39, 0.54, 0.76, 1.00)


class AnalysisError(ValueError):
    pass


def _check_ranking(ranking) -> tuple[int, ...]:
    ranks = tuple(int(v) for v in ranking)
    if sorted(ranks) != list(range(1, len(ranks) + 1)):
        raise AnalysisError(f"ranks must be a permutation of 1..k, got {ranks}")
    return ranks


@dataclass(frozen=True)
class RankingCase:
    """Rankings observed for one benchmark cell plus their consensus."""

    rankings: tuple[tuple[int, ...], ...]
    consensus: tuple[int, ...]
    total_distance: int


def make_case(rankings) -> RankingCase:
    consensus, total = kemeny_consensus(rankings)
    return RankingCase(
        rankings=tuple(_check_ranking(r) for r in rankings),
        consensus=consensus,
        total_distance=total,
    )


def kendall_tau(r1, r2) -> int:
    """Number of subject pairs the two rankings order oppositely."""
    a = _check_ranking(r1)
    b = _check_ranking(r2)
    if len(a) != len(b):
        raise AnalysisError("rankings must have equal length")
    k = len(a)
    count = 0
    for i in range(k):
        for j in range(i + 1, k):
            if (a[i] - a[j]) * (b[i] - b[j]) < 0:
                count += 1
    return count


def kemeny_consensus(rankings) -> tuple[tuple[int, ...], int]:
    """Permutation minimizing the summed Kendall distance to the inputs.

    Exhaustive over k! candidates; ties go to the lexicographically
    smallest rank vector (automatic, since candidates are generated in
    lexicographic order and only strict improvements are kept).
    """
    items = [_check_ranking(r) for r in rankings]
    if not items:
        raise AnalysisError("need at least one ranking")
    k = len(items[0])
    if any(len(r) != k for r in items):
        raise AnalysisError("all rankings must have the same length")
    if k > _MAX_EXHAUSTIVE_K:
        raise AnalysisError(f"exhaustive consensus supports k <= {_MAX_EXHAUSTIVE_K}, got {k}")
    best: tuple[int, ...] | None = None
    best_total = -1
    for cand in itertools.permutations(range(1, k + 1)):
        total = sum(kendall_tau(cand, r) for r in items)
        if best is None or total < best_total:
            best = cand
            best_total = total
    return best, best_total


def rank_losses(losses) -> tuple[int, ...]:
    """Rank subjects by loss, 1 = best; ties keep input order."""
    vals = [float(v) for v in losses]
    order = sorted(range(len(vals)), key=lambda i: (vals[i], i))
    ranks = [0] * len(vals)
    for pos, idx in enumerate(order):
        ranks[idx] = pos + 1
    return tuple(ranks)


def rank_frequencies(cases: list[RankingCase]) -> np.ndarray:
    """Proportion matrix: entry [s, r-1] = share of cases where subject s
    holds consensus rank r."""
    if not cases:
        raise AnalysisError("need at least one case")
    k = len(cases[0].consensus)
    if any(len(c.consensus) != k for c in cases):
        raise AnalysisError("cases disagree on the number of subjects")
    freq = np.zeros((k, k))
    for case in cases:
        for subject, rank in enumerate(case.consensus):
            freq[subject, rank - 1] += 1.0
    return freq / len(cases)


# ---------------------------------------------------------------- overlap


def feature_overlaps(task: Task) -> dict[str, float]:
    """Per-feature fraction of samples attainable in both classes."""
    if task.task_type != "classification":
        raise AnalysisError("sample overlap needs a classification task")
    y = task.target_values()
    classes = sorted(y.astype(str).unique())
    if len(classes) != 2:
        raise AnalysisError(f"need exactly 2 classes, found {len(classes)}")
    mask_a = (y.astype(str) == classes[0]).to_numpy()
    mask_b = ~mask_a

    out: dict[str, float] = {}
    for name in task.feature_columns:
        col = task.table[name]
        if pd.api.types.is_numeric_dtype(col):
            vals = col.to_numpy(dtype=float)
            lo = max(vals[mask_a].min(), vals[mask_b].min())
            hi = min(vals[mask_a].max(), vals[mask_b].max())
            frac = 0.0 if lo > hi else float(np.mean((vals >= lo) & (vals <= hi)))
        else:
            vals = col.astype(str).to_numpy()
            shared = set(vals[mask_a]) & set(vals[mask_b])
            frac = float(np.mean(np.isin(vals, sorted(shared)))) if shared else 0.0
        out[name] = frac
    return out


def sample_overlap(task: Task) -> float:
    """Product of the per-feature overlaps; 1 = indistinguishable classes."""
    product = 1.0
    for frac in feature_overlaps(task).values():
        product *= frac
    return product


def difficulty_level(overlap: float) -> int:
    """Map an overlap value to the nearest anchor's level (1..4).

    Anchors are observed benchmark values; other overlaps are an
    extrapolation. Midpoint ties resolve to the harder (higher) level.
    """
    if not math.isfinite(overlap):
        raise AnalysisError("overlap must be finite")
    best_level = 1
    best_dist = abs(overlap - DIFFICULTY_ANCHORS[0])
    for idx in range(1, len(DIFFICULTY_ANCHORS)):
        dist = abs(overlap - DIFFICULTY_ANCHORS[idx])
        if dist <= best_dist:
            best_dist = dist
            best_level = idx + 1
    return best_level


# ---------------------------------------------------------------- sensitivity

_GRID = 21


def _csv(header: list[str], rows: list[list]) -> str:
    buf = io.StringIO()
    buf.write(",".join(header) + "\n")
    for row in rows:
        buf.write(",".join(str(v) for v in row) + "\n")
    return buf.getvalue()


def _tree_rules(tree) -> str:
    lines: list[str] = []

    def walk(node_id: int, depth: int, label: str) -> None:
        nd = tree.nodes[node_id]
        pad = "  " * depth
        if nd.is_leaf:
            lines.append(f"{pad}{label}predict {nd.prediction} (n={nd.size})")
            return
        if nd.kind == "numeric":
            cond = f"{nd.column} <= {nd.threshold:.6g}"
        else:
            cond = f"{nd.column} == {nd.level}"
        lines.append(f"{pad}{label}if {cond} (n={nd.size}, improvement={nd.improvement:.6g})")
        walk(nd.left, depth + 1, "then: ")
        walk(nd.right, depth + 1, "else: ")

    walk(0, 0, "")
    return "\n".join(lines) + "\n"


def sensitivity_export(result, space: SearchSpace, pair: tuple[int, int] | None = None) -> dict:
    """Plot-free sensitivity tables for a finished tuning run.

    Returns a dict with:
      parallel - CSV, one row per evaluated point: each raw coordinate
                 normalized to [0, 1] plus the loss;
      curves   - CSV of per-axis surrogate-mean sweeps (21 points each)
                 through the best point;
      surface  - CSV of a 21x21 surrogate-mean grid over one coordinate
                 pair (None when the space is one-dimensional);
      tree     - nested-rule text of a regression tree fitted on
                 (raw x, loss).
    """
    records = [r for r in result.records if r.raw_x is not None]
    if len(records) < 2:
        raise AnalysisError("need at least two evaluated points with raw coordinates")
    lower, upper = space.raw_bounds()
    width = np.where(upper - lower <= 0, 1.0, upper - lower)
    names = list(space.names)
    x = np.array([r.raw_x for r in records], dtype=float)
    y = np.array([r.loss for r in records], dtype=float)

    norm = (x - lower) / width
    parallel = _csv(names + ["loss"], [list(np.round(norm[i], 12)) + [y[i]] for i in range(len(records))])

    model = fit(
        x,
        y,
        KrigingConfig(bounds=(lower, upper), cat_mask=space.cat_mask(), seed=0),
    )
    best_idx = int(np.argmin(y))
    best_x = x[best_idx]

    curve_rows: list[list] = []
    for j, name in enumerate(names):
        grid = np.linspace(lower[j], upper[j], _GRID)
        for g in grid:
            probe = best_x.copy()
            probe[j] = g
            curve_rows.append([name, float(g), float(model.predict_mean(probe))])
    curves = _csv(["param", "value", "predicted_loss"], curve_rows)

    surface = None
    if space.d >= 2:
        i, j = pair if pair is not None else (0, 1)
        if not (0 <= i < space.d and 0 <= j < space.d and i != j):
            raise AnalysisError(f"invalid coordinate pair {(i, j)}")
        gi = np.linspace(lower[i], upper[i], _GRID)
        gj = np.linspace(lower[j], upper[j], _GRID)
        rows = []
        for a in gi:
            for b in gj:
                probe = best_x.copy()
                probe[i] = a
                probe[j] = b
                rows.append([float(a), float(b), float(model.predict_mean(probe))])
        surface = _csv([names[i], names[j], "predicted_loss"], rows)

    frame = pd.DataFrame({name: x[:, j] for j, name in enumerate(names)})
    n = len(records)
    minsplit = max(4, n // 10)
    tree = cart_fit(
        frame,
        y,
        minsplit=minsplit,
        minbucket=max(2, minsplit // 3),
        cp=0.01,
        maxdepth=5,
        task_type="regression",
    )
    return {
        "parallel": parallel,
        "curves": curves,
        "surface": surface,
        "tree": _tree_rules(tree),
    }
