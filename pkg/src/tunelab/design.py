"""Initial designs over the raw scale of a search space.

Latin hypercube sampling stratifies each dimension into `size` equal-width
cells and places exactly one uniform draw in each; uniform designs sample
i.i.d. per dimension. Both are deterministic for a fixed seed.
"""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np

from .space import SearchSpace

__all__ = ["DesignMatrix", "lhs", "uniform_random", "design_to_csv"]


@dataclass(frozen=True)
class DesignMatrix:
    points: np.ndarray
    seed: int
    kind: str
    names: tuple[str, ...]

    @property
    def size(self) -> int:
        return self.points.shape[0]


def _check_size(size: int) -> int:
    size = int(size)
    if size < 1:
        raise ValueError(f"design size must be >= 1, got {size}")
    return size


def lhs(space: SearchSpace, size: int, seed: int) -> DesignMatrix:
    """Latin hypercube design: one point per stratum and dimension."""
    size = _check_size(size)
    rng = np.random.default_rng(seed)
    lower, upper = space.raw_bounds()
    points = np.empty((size, space.d))
    for j in range(space.d):
        strata = rng.permutation(size)
        offsets = rng.random(size)
        unit = (strata + offsets) / size
        points[:, j] = lower[j] + unit * (upper[j] - lower[j])
    return DesignMatrix(points=points, seed=seed, kind="lhs", names=tuple(space.names))


def uniform_random(space: SearchSpace, size: int, seed: int) -> DesignMatrix:
    """Independent uniform samples per raw dimension."""
    size = _check_size(size)
    rng = np.random.default_rng(seed)
    lower, upper = space.raw_bounds()
    points = lower + rng.random((size, space.d)) * (upper - lower)
    return DesignMatrix(points=points, seed=seed, kind="uniform", names=tuple(space.names))


def design_to_csv(design: DesignMatrix) -> str:
    """Render a design as CSV text (header = parameter names, raw scale)."""
    buf = io.StringIO()
    buf.write(",".join(design.names) + "\n")
    for row in design.points:
        buf.write(",".join(repr(float(v)) for v in row) + "\n")
    return buf.getvalue()
