"""Box-constrained minimizers: differential evolution and random search.

The DE variant is rand/1/bin with bound clipping. Both optimizers treat a
non-finite objective value as +inf and are deterministic for a fixed seed.
The evaluation budget counts every objective call, including the initial
population.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

__all__ = ["DEConfig", "OptimResult", "de_minimize", "random_minimize"]


@dataclass(frozen=True)
class DEConfig:
    max_evals: int
    population_size: int | None = None
    f_scale: float = 0.8
    cr: float = 0.9
    seed: int = 0

    def __post_init__(self) -> None:
        if int(self.max_evals) < 1:
            raise ValueError("max_evals must be >= 1")
        if self.population_size is not None and int(self.population_size) < 4:
            raise ValueError("population_size must be >= 4")
        if not (0.0 < self.f_scale <= 2.0):
            raise ValueError("f_scale must lie in (0, 2]")
        if not (0.0 <= self.cr <= 1.0):
            raise ValueError("cr must lie in [0, 1]")

    def resolve_population(self, d: int) -> int:
        if self.population_size is not None:
            return int(self.population_size)
        return max(4, min(10 * d, int(self.max_evals) // 5))


@dataclass(frozen=True)
class OptimResult:
    x_best: np.ndarray
    y_best: float
    evals_used: int


def _check_bounds(lower, upper) -> tuple[np.ndarray, np.ndarray]:
    lower = np.asarray(lower, dtype=float).ravel()
    upper = np.asarray(upper, dtype=float).ravel()
    if lower.shape != upper.shape or lower.size == 0:
        raise ValueError("lower and upper must be non-empty vectors of equal length")
    if not (np.isfinite(lower).all() and np.isfinite(upper).all()):
        raise ValueError("bounds must be finite")
    if np.any(lower > upper):
        raise ValueError("each lower bound must not exceed its upper bound")
    return lower, upper


def _safe_eval(f: Callable, x: np.ndarray) -> float:
    y = float(f(x))
    return y if math.isfinite(y) else math.inf


def de_minimize(f: Callable, lower, upper, config: DEConfig) -> OptimResult:
    """Minimize f over a box with DE/rand/1/bin."""
    lower, upper = _check_bounds(lower, upper)
    d = lower.size
    npop = config.resolve_population(d)
    if config.max_evals < npop:
        raise ValueError(
            f"max_evals={config.max_evals} is below the population size {npop}"
        )
    rng = np.random.default_rng(config.seed)

    pop = lower + rng.random((npop, d)) * (upper - lower)
    fitness = np.empty(npop)
    evals = 0
    best_x = pop[0].copy()
    best_y = math.inf
    for i in range(npop):
        fitness[i] = _safe_eval(f, pop[i].copy())
        evals += 1
        if fitness[i] < best_y:
            best_y = fitness[i]
            best_x = pop[i].copy()

    while evals < config.max_evals:
        for i in range(npop):
            if evals >= config.max_evals:
                break
            # three distinct donors, none equal to the target index
            perm = rng.permutation(npop)
            donors = [int(k) for k in perm if k != i][:3]
            r1, r2, r3 = donors
            mutant = pop[r1] + config.f_scale * (pop[r2] - pop[r3])
            np.clip(mutant, lower, upper, out=mutant)
            mask = rng.random(d) < config.cr
            mask[int(rng.integers(d))] = True  # guaranteed crossover coordinate
            trial = np.where(mask, mutant, pop[i])
            y = _safe_eval(f, trial.copy())
            evals += 1
            if y <= fitness[i]:
                pop[i] = trial
                fitness[i] = y
            if y < best_y:
                best_y = y
                best_x = trial.copy()

    return OptimResult(x_best=best_x, y_best=float(best_y), evals_used=evals)


def random_minimize(f: Callable, lower, upper, max_evals: int, seed: int) -> OptimResult:
    """Minimize f by i.i.d. uniform sampling of the box."""
    lower, upper = _check_bounds(lower, upper)
    if int(max_evals) < 1:
        raise ValueError("max_evals must be >= 1")
    rng = np.random.default_rng(seed)
    d = lower.size
    best_x = None
    best_y = math.inf
    for _ in range(int(max_evals)):
        x = lower + rng.random(d) * (upper - lower)
        y = _safe_eval(f, x.copy())
        if best_x is None or y < best_y:
            best_y = y
            best_x = x
    return OptimResult(x_best=best_x, y_best=float(best_y), evals_used=int(max_evals))
