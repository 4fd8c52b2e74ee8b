"""Sequential tuning strategies over a wall-clock budget.

Three strategies share one record format: a surrogate-assisted loop
(initial space-filling design, then Kriging fit + DE search of the
predicted mean per iteration), plain uniform random search, and a
single-shot defaults baseline. The budget is wall-clock seconds scaled
by a hardware-normalization factor; a running evaluation is never
killed by the budget check, only by the objective's own per-call
timeout. Total evaluation count is unbounded unless max_evals is set.

Every evaluation receives eval_seed = seed_eval_base + record index.
Surrogate fit and search seeds are drawn from a master generator seeded
with seed_tuner and can be replayed from the notes a run emits.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .design import lhs
from .optim import DEConfig, de_minimize
from .space import SearchSpace, decode_point
from .surrogate import KrigingConfig, KrigingFitError, fit

__all__ = [
    "TunerConfig",
    "EvaluationRecord",
    "TuneResult",
    "spot_run",
    "random_search_run",
    "default_run",
    "runtime_factor",
]

AUTO_TIMEOUT = "auto"
_SEED_CAP = 2**31 - 1


@dataclass(frozen=True)
class TunerConfig:
    max_time: float
    design_size: int | None = None
    surrogate_search_evals: int | None = None
    timeout: float | str | None = AUTO_TIMEOUT
    noise: bool = False
    seed_tuner: int = 0
    seed_eval_base: int = 0
    runtime_factor: float = 1.0
    max_evals: int | None = None

    def __post_init__(self) -> None:
        if not (self.max_time > 0):
            raise ValueError("max_time must be > 0")
        if self.design_size is not None and int(self.design_size) < 1:
            raise ValueError("design_size must be >= 1")
        if self.surrogate_search_evals is not None and int(self.surrogate_search_evals) < 20:
            raise ValueError("surrogate_search_evals must be >= 20")
        if isinstance(self.timeout, str) and self.timeout != AUTO_TIMEOUT:
            raise ValueError(f"timeout must be seconds, None, or {AUTO_TIMEOUT!r}")
        if isinstance(self.timeout, (int, float)) and self.timeout <= 0:
            raise ValueError("timeout seconds must be > 0")
        if self.runtime_factor < 0:
            raise ValueError("runtime_factor must be >= 0")
        if self.max_evals is not None and int(self.max_evals) < 1:
            raise ValueError("max_evals must be >= 1")

    def resolve_timeout(self) -> float | None:
        """Per-evaluation timeout in seconds, or None when disabled."""
        if self.timeout == AUTO_TIMEOUT:
            return self.max_time / 20.0
        return None if self.timeout is None else float(self.timeout)

    def resolve_design_size(self, d: int) -> int:
        return int(self.design_size) if self.design_size is not None else 5 * d

    def resolve_search_evals(self, d: int) -> int:
        if self.surrogate_search_evals is not None:
            return int(self.surrogate_search_evals)
        return 200 * d

    def budget_seconds(self) -> float:
        return self.max_time * self.runtime_factor

    def to_dict(self) -> dict:
        return {
            "max_time": self.max_time,
            "design_size": self.design_size,
            "surrogate_search_evals": self.surrogate_search_evals,
            "timeout": self.timeout,
            "noise": self.noise,
            "seed_tuner": self.seed_tuner,
            "seed_eval_base": self.seed_eval_base,
            "runtime_factor": self.runtime_factor,
            "max_evals": self.max_evals,
        }


@dataclass(frozen=True)
class EvaluationRecord:
    raw_x: tuple[float, ...] | None
    natural_x: dict
    loss: float
    train_time: float
    predict_time: float
    total_time: float
    status: str
    eval_seed: int
    iteration: int


@dataclass(frozen=True)
class TuneResult:
    records: tuple[EvaluationRecord, ...]
    x_best_raw: tuple[float, ...] | None
    x_best_natural: dict
    y_best: float
    wall_time_used: float
    config_snapshot: dict
    strategy: str


def _noop(*_args, **_kwargs) -> None:
    return None


class _Run:
    """Shared record-keeping for one tuning run."""

    def __init__(self, objective, space, config, strategy, on_record, on_note):
        self.objective = objective
        self.space = space
        self.config = config
        self.strategy = strategy
        self.on_record = on_record or _noop
        self.on_note = on_note or _noop
        self.records: list[EvaluationRecord] = []
        self.t_start = time.perf_counter()

    def elapsed(self) -> float:
        return time.perf_counter() - self.t_start

    def budget_left(self) -> bool:
        if self.config.max_evals is not None and len(self.records) >= self.config.max_evals:
            return False
        return self.elapsed() < self.config.budget_seconds()

    def evaluate(self, raw_x, iteration: int) -> EvaluationRecord:
        natural = decode_point(self.space, np.asarray(raw_x, dtype=float))
        eval_seed = self.config.seed_eval_base + len(self.records)
        outcome = self.objective(natural, eval_seed)
        rec = EvaluationRecord(
            raw_x=tuple(float(v) for v in raw_x),
            natural_x=natural,
            loss=float(outcome.loss),
            train_time=outcome.train_time,
            predict_time=outcome.predict_time,
            total_time=outcome.total_time,
            status=outcome.status,
            eval_seed=eval_seed,
            iteration=iteration,
        )
        self.records.append(rec)
        self.on_record(rec)
        return rec

    def result(self) -> TuneResult:
        if not self.records:
            raise RuntimeError("no evaluations were recorded")
        best = min(range(len(self.records)), key=lambda i: self.records[i].loss)
        rec = self.records[best]
        snapshot = self.config.to_dict()
        snapshot["strategy"] = self.strategy
        return TuneResult(
            records=tuple(self.records),
            x_best_raw=rec.raw_x,
            x_best_natural=rec.natural_x,
            y_best=rec.loss,
            wall_time_used=self.elapsed(),
            config_snapshot=snapshot,
            strategy=self.strategy,
        )


def spot_run(
    objective,
    space: SearchSpace,
    config: TunerConfig,
    on_record: Callable | None = None,
    on_note: Callable | None = None,
) -> TuneResult:
    """Surrogate-assisted loop: LHS design, then model-guided proposals.

    Each iteration refits the Kriging model on every record so far
    (reinterpolating when noise handling is on), minimizes the predicted
    mean with DE over the raw box, and evaluates the proposal. A failed
    surrogate fit degrades that iteration to a uniform random proposal.
    """
    d = space.d
    design_size = config.resolve_design_size(d)
    if design_size < 2:
        raise ValueError("design_size must be >= 2 for the surrogate loop")
    search_evals = config.resolve_search_evals(d)
    run = _Run(objective, space, config, "spot", on_record, on_note)
    master = np.random.default_rng(config.seed_tuner)
    design_seed = int(master.integers(_SEED_CAP))
    run.on_note("design", {"seed": design_seed, "size": design_size})

    design = lhs(space, design_size, design_seed)
    lower, upper = space.raw_bounds()
    cat_mask = space.cat_mask()

    # first evaluation is unconditional so the result is never empty
    for i, row in enumerate(design.points):
        if i > 0 and not run.budget_left():
            break
        run.evaluate(row, iteration=0)

    iteration = 0
    while run.budget_left():
        iteration += 1
        fit_seed = int(master.integers(_SEED_CAP))
        search_seed = int(master.integers(_SEED_CAP))
        x_all = np.array([r.raw_x for r in run.records], dtype=float)
        y_all = np.array([r.loss for r in run.records], dtype=float)
        try:
            model = fit(
                x_all,
                y_all,
                KrigingConfig(
                    lambda_bounds=(1.0e-6, 1.0) if config.noise else None,
                    seed=fit_seed,
                    bounds=(lower, upper),
                    cat_mask=cat_mask,
                ),
            )
            if config.noise:
                model = model.reinterpolate()
            res = de_minimize(
                model.predict_mean,
                lower,
                upper,
                DEConfig(max_evals=search_evals, seed=search_seed),
            )
            proposal = res.x_best
            run.on_note(
                "iteration",
                {
                    "iteration": iteration,
                    "fit_seed": fit_seed,
                    "search_seed": search_seed,
                    "predicted": res.y_best,
                },
            )
        except (KrigingFitError, np.linalg.LinAlgError, ValueError) as exc:
            rng = np.random.default_rng(search_seed)
            proposal = lower + rng.random(d) * (upper - lower)
            run.on_note(
                "surrogate-fit-failed",
                {"iteration": iteration, "search_seed": search_seed, "reason": str(exc)},
            )
        run.evaluate(proposal, iteration)

    return run.result()


def random_search_run(
    objective,
    space: SearchSpace,
    config: TunerConfig,
    on_record: Callable | None = None,
    on_note: Callable | None = None,
) -> TuneResult:
    """Uniform raw-space sampling under the same budget accounting."""
    run = _Run(objective, space, config, "random", on_record, on_note)
    rng = np.random.default_rng(config.seed_tuner)
    lower, upper = space.raw_bounds()
    d = space.d
    index = 0
    while index == 0 or run.budget_left():
        x = lower + rng.random(d) * (upper - lower)
        run.evaluate(x, iteration=index)
        index += 1
    return run.result()


def default_run(objective, space: SearchSpace, defaults: dict, eval_seed: int = 0) -> TuneResult:
    """One evaluation at the default assignment, per-call timeout off.

    Defaults may sit outside the declared raw bounds, so no decoding or
    bound check is applied; raw_x stays empty.
    """
    if not isinstance(defaults, dict) or not defaults:
        raise ValueError("defaults must be a non-empty natural assignment")
    relaxed = objective
    if getattr(objective, "timeout", None) is not None and hasattr(objective, "with_timeout"):
        relaxed = objective.with_timeout(None)
    t0 = time.perf_counter()
    outcome = relaxed(defaults, eval_seed)
    wall = time.perf_counter() - t0
    rec = EvaluationRecord(
        raw_x=None,
        natural_x=dict(defaults),
        loss=float(outcome.loss),
        train_time=outcome.train_time,
        predict_time=outcome.predict_time,
        total_time=outcome.total_time,
        status=outcome.status,
        eval_seed=int(eval_seed),
        iteration=0,
    )
    return TuneResult(
        records=(rec,),
        x_best_raw=None,
        x_best_natural=dict(defaults),
        y_best=rec.loss,
        wall_time_used=wall,
        config_snapshot={"strategy": "default", "space": space.to_dict()},
        strategy="default",
    )


def _reference_workload() -> None:
    # fixed sizes; comparable across runs of this package only
    rng = np.random.default_rng(20240814)
    a = rng.standard_normal((256, 256))
    b = rng.standard_normal((256, 256))
    c = a @ b
    v = rng.standard_normal(200_000) + c[0, 0]
    np.sort(v)


def runtime_factor(reference_time: float, workload: Callable | None = None) -> float:
    """Measured workload time divided by the reference machine's time."""
    if not (reference_time > 0):
        raise ValueError("reference_time must be > 0")
    work = workload or _reference_workload
    t0 = time.perf_counter()
    work()
    measured = time.perf_counter() - t0
    return max(measured, 1e-12) / float(reference_time)
