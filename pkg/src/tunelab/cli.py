"""Command-line front end: tune, compare, rank, difficulty.

Configs are JSON with an explicit `version` field. Run logs are JSON
lines, one self-describing record per line (meta, eval, note, result),
written append-only; `read_run_log` reconstructs a TuneResult from the
last run segment in a log. Exit codes: 0 ok, 1 runtime failure, 2
configuration error. TUNELAB_SEED overrides the tuner seed and
TUNELAB_JOBS the compare worker count.

The per-model wall-clock budgets used by the original benchmark ship
as documented data in BUDGET_PRESETS; configs state budgets in seconds
explicitly.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np
import pandas as pd

from .analysis import (
    AnalysisError,
    difficulty_level,
    feature_overlaps,
    make_case,
    rank_frequencies,
    rank_losses,
)
from .data import (
    DataError,
    Task,
    discretize_target,
    impute,
    load_csv,
    subsample,
    synth_classification,
)
from .objective import HoldoutSplit, ObjectiveError, make_objective
from .space import PRESET_MODELS, SearchSpace, SpaceError, preset, preset_defaults
from .tuner import TuneResult, TunerConfig, EvaluationRecord, default_run, random_search_run, spot_run

__all__ = [
    "main",
    "cmd_tune",
    "cmd_compare",
    "cmd_rank",
    "cmd_difficulty",
    "read_run_log",
    "strip_volatile",
    "ConfigError",
    "BUDGET_PRESETS",
    "VOLATILE_FIELDS",
    "CONFIG_VERSION",
]

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_CONFIG = 2

CONFIG_VERSION = 1

# wall-clock fields that legitimately differ between identical runs
VOLATILE_FIELDS = (
    "timestamp",
    "train_time",
    "predict_time",
    "total_time",
    "wall_time_used",
)

# benchmark budgets (seconds) per model family; documentation data, not
# applied implicitly anywhere
BUDGET_PRESETS = {
    "dt": 300.0,
    "en": 3600.0,
    "knn": 18000.0,
    "rf": 18000.0,
    "svm": 18000.0,
    "xgb": 18000.0,
}

STRATEGIES = ("spot", "random", "default")


class ConfigError(Exception):
    pass


# ---------------------------------------------------------------- JSON plumbing


def _json_default(obj):
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serializable: {type(obj)!r}")


def _dump_line(obj: dict) -> str:
    return json.dumps(obj, sort_keys=True, default=_json_default)


def _config_hash(cfg: dict) -> str:
    canon = json.dumps(cfg, sort_keys=True, separators=(",", ":"), default=_json_default)
    return hashlib.sha256(canon.encode()).hexdigest()


def load_config(path) -> dict:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        cfg = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(cfg, dict):
        raise ConfigError(f"{path}: config must be a JSON object")
    if cfg.get("version") != CONFIG_VERSION:
        raise ConfigError(
            f"{path}: missing or unsupported version (expected {CONFIG_VERSION})"
        )
    return cfg


class _RunLog:
    def __init__(self, path) -> None:
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._fh = open(self.path, "a")

    def write(self, obj: dict) -> None:
        self._fh.write(_dump_line(obj) + "\n")
        self._fh.flush()

    def close(self) -> None:
        self._fh.close()


def strip_volatile(obj: dict) -> dict:
    """Drop wall-clock fields so log lines can be compared across runs."""
    return {k: v for k, v in obj.items() if k not in VOLATILE_FIELDS}


def read_run_log(path) -> TuneResult:
    """Rebuild a TuneResult from the last run segment of a JSON-lines log."""
    lines = []
    with open(path) as fh:
        for raw in fh:
            raw = raw.strip()
            if raw:
                lines.append(json.loads(raw))
    starts = [i for i, obj in enumerate(lines) if obj.get("type") == "meta"]
    segment = lines[starts[-1]:] if starts else lines
    records = []
    result_line = None
    for obj in segment:
        if obj.get("type") == "eval":
            records.append(
                EvaluationRecord(
                    raw_x=None if obj["raw_x"] is None else tuple(obj["raw_x"]),
                    natural_x=obj["natural_x"],
                    loss=obj["loss"],
                    train_time=obj.get("train_time", 0.0),
                    predict_time=obj.get("predict_time", 0.0),
                    total_time=obj.get("total_time", 0.0),
                    status=obj["status"],
                    eval_seed=obj["eval_seed"],
                    iteration=obj["iteration"],
                )
            )
        elif obj.get("type") == "result":
            result_line = obj
    if result_line is None:
        raise ValueError(f"{path}: no result line; log incomplete")
    return TuneResult(
        records=tuple(records),
        x_best_raw=None
        if result_line["x_best_raw"] is None
        else tuple(result_line["x_best_raw"]),
        x_best_natural=result_line["x_best_natural"],
        y_best=result_line["y_best"],
        wall_time_used=result_line.get("wall_time_used", 0.0),
        config_snapshot=result_line["config_snapshot"],
        strategy=result_line["strategy"],
    )


# ---------------------------------------------------------------- builders


def _build_task(data_cfg: dict, draw: int = 0) -> Task:
    if not isinstance(data_cfg, dict):
        raise ConfigError("data section must be an object")
    try:
        if "synth" in data_cfg:
            s = dict(data_cfg["synth"])
            seed = int(s.pop("seed", 0)) + draw
            return synth_classification(
                m=int(s.pop("m")),
                n_num=int(s.pop("n_num", 2)),
                n_cat=int(s.pop("n_cat", 0)),
                cardinality=int(s.pop("cardinality", 2)),
                class_separation=float(s.pop("class_separation", 1.0)),
                seed=seed,
            )
        path = data_cfg.get("path")
        if not path:
            raise ConfigError("data section needs 'path' or 'synth'")
        if not Path(path).is_file():
            raise ConfigError(f"data file not found: {path}")
        table = load_csv(path, data_cfg.get("schema_hints"))
        table = impute(table)
        if "subsample" in data_cfg:
            m = int(data_cfg["subsample"])
            table = subsample(table, m, int(data_cfg.get("subsample_seed", 0)) + draw)
        target = data_cfg.get("target")
        if not target:
            raise ConfigError("data section needs 'target'")
        task_type = data_cfg.get("task_type", "classification")
        threshold = data_cfg.get("discretize_threshold")
        if threshold is not None:
            table = discretize_target(table, target, float(threshold))
            task_type = "classification"
        return Task(table=table, target=target, task_type=task_type)
    except ConfigError:
        raise
    except (DataError, KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad data section: {exc}") from None


def _build_space(space_cfg: dict, task: Task) -> tuple[SearchSpace, str | None]:
    if not isinstance(space_cfg, dict):
        raise ConfigError("space section must be an object")
    try:
        if "model" in space_cfg:
            model = space_cfg["model"]
            n_features = space_cfg.get("n_features", len(task.feature_columns))
            return (
                preset(model, n_features=n_features, task_type=task.task_type),
                model,
            )
        if "params" in space_cfg:
            return SearchSpace.from_dict(space_cfg), None
        raise ConfigError("space section needs 'model' or 'params'")
    except ConfigError:
        raise
    except (SpaceError, KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad space section: {exc}") from None


def _build_tuner_config(tuner_cfg: dict) -> TunerConfig:
    if not isinstance(tuner_cfg, dict):
        raise ConfigError("tuner section must be an object")
    allowed = {
        "max_time",
        "design_size",
        "surrogate_search_evals",
        "timeout",
        "noise",
        "seed_tuner",
        "seed_eval_base",
        "runtime_factor",
        "max_evals",
    }
    unknown = set(tuner_cfg) - allowed
    if unknown:
        raise ConfigError(f"unknown tuner fields: {sorted(unknown)}")
    fields = dict(tuner_cfg)
    env_seed = os.environ.get("TUNELAB_SEED")
    if env_seed is not None:
        try:
            fields["seed_tuner"] = int(env_seed)
        except ValueError:
            raise ConfigError(f"TUNELAB_SEED must be an integer, got {env_seed!r}") from None
    try:
        return TunerConfig(**fields)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad tuner section: {exc}") from None


def _build_split(split_cfg: dict | None) -> HoldoutSplit:
    split_cfg = split_cfg or {}
    try:
        return HoldoutSplit(
            train_fraction=float(split_cfg.get("train_fraction", 0.6)),
            split_seed=int(split_cfg.get("split_seed", 0)),
        )
    except (ObjectiveError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad split section: {exc}") from None


def _resolve_defaults(cfg: dict, model_id: str | None, task: Task) -> dict:
    if "defaults" in cfg:
        defaults = cfg["defaults"]
        if not isinstance(defaults, dict) or not defaults:
            raise ConfigError("'defaults' must be a non-empty object")
        return defaults
    if model_id is None:
        raise ConfigError("default strategy needs 'defaults' when space is custom")
    try:
        return preset_defaults(
            model_id,
            n_features=len(task.feature_columns),
            task_type=task.task_type,
        )
    except (SpaceError, ValueError) as exc:
        raise ConfigError(f"no registry defaults: {exc}") from None


def _prepare_run(cfg: dict, draw: int = 0):
    """Build (task, space, model_id, tuner_config, objective, strategy)."""
    strategy = cfg.get("strategy", "spot")
    if strategy not in STRATEGIES:
        raise ConfigError(f"strategy must be one of {STRATEGIES}, got {strategy!r}")
    learner = cfg.get("learner")
    if learner not in ("knn", "dt", "external"):
        raise ConfigError("learner must be 'knn', 'dt', or 'external'")
    task = _build_task(cfg.get("data", {}), draw=draw)
    space, model_id = _build_space(cfg.get("space", {}), task)
    tuner_cfg = _build_tuner_config(cfg.get("tuner", {}))
    split = _build_split(cfg.get("split"))
    split = HoldoutSplit(split.train_fraction, split.split_seed + draw)
    external = cfg.get("external", {})
    try:
        objective = make_objective(
            task,
            learner,
            split=split,
            timeout=tuner_cfg.resolve_timeout(),
            command_template=external.get("command_template"),
            workdir=external.get("workdir"),
        )
    except (ObjectiveError, DataError) as exc:
        raise ConfigError(f"bad objective: {exc}") from None
    return task, space, model_id, tuner_cfg, objective, strategy


def _execute_strategy(strategy, objective, space, tuner_cfg, defaults, on_record=None, on_note=None) -> TuneResult:
    if strategy == "spot":
        return spot_run(objective, space, tuner_cfg, on_record, on_note)
    if strategy == "random":
        return random_search_run(objective, space, tuner_cfg, on_record, on_note)
    result = default_run(objective, space, defaults, eval_seed=tuner_cfg.seed_eval_base)
    if on_record is not None:
        for rec in result.records:
            on_record(rec)
    return result


# ---------------------------------------------------------------- tune


def _record_line(index: int, rec: EvaluationRecord) -> dict:
    return {
        "type": "eval",
        "index": index,
        "raw_x": None if rec.raw_x is None else list(rec.raw_x),
        "natural_x": rec.natural_x,
        "loss": rec.loss,
        "train_time": rec.train_time,
        "predict_time": rec.predict_time,
        "total_time": rec.total_time,
        "status": rec.status,
        "eval_seed": rec.eval_seed,
        "iteration": rec.iteration,
    }


def cmd_tune(config_path, dry_run: bool = False, log_path=None) -> int:
    try:
        cfg = load_config(config_path)
        task, space, model_id, tuner_cfg, objective, strategy = _prepare_run(cfg)
        defaults = (
            _resolve_defaults(cfg, model_id, task) if strategy == "default" else None
        )
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if dry_run:
        print("config ok")
        return EXIT_OK

    out = Path(log_path or cfg.get("log") or Path(config_path).with_suffix(".log.jsonl"))
    try:
        log = _RunLog(out)
        log.write(
            {
                "type": "meta",
                "command": "tune",
                "config": cfg,
                "config_hash": _config_hash(cfg),
                "timestamp": time.time(),
            }
        )
        counter = {"i": 0}

        def on_record(rec: EvaluationRecord) -> None:
            log.write(_record_line(counter["i"], rec))
            counter["i"] += 1

        def on_note(event: str, payload: dict) -> None:
            log.write({"type": "note", "event": event, "payload": payload})

        result = _execute_strategy(
            strategy, objective, space, tuner_cfg, defaults, on_record, on_note
        )
        log.write(
            {
                "type": "result",
                "strategy": result.strategy,
                "x_best_raw": None if result.x_best_raw is None else list(result.x_best_raw),
                "x_best_natural": result.x_best_natural,
                "y_best": result.y_best,
                "n_records": len(result.records),
                "wall_time_used": result.wall_time_used,
                "config_snapshot": result.config_snapshot,
            }
        )
        log.close()
    except Exception as exc:  # runtime failure, not config
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    print(
        f"{strategy}: {len(result.records)} evaluations, "
        f"best loss {result.y_best:.6g}, log {out}"
    )
    return EXIT_OK


# ---------------------------------------------------------------- compare


def _compare_worker(payload: dict) -> dict:
    cfg = payload["cfg"]
    strategy = payload["strategy"]
    draw = payload["draw"]
    rep = payload["rep"]
    row = {
        "type": "case",
        "strategy": strategy,
        "draw": draw,
        "replication": rep,
        "status": "ok",
    }
    try:
        run_cfg = dict(cfg)
        run_cfg["strategy"] = strategy
        task, space, model_id, tuner_cfg, objective, _ = _prepare_run(run_cfg, draw=draw)
        # replications vary tuner and eval seeds; data draws stay aligned
        offset = draw * 1009 + rep
        tuner_cfg = TunerConfig(
            max_time=tuner_cfg.max_time,
            design_size=tuner_cfg.design_size,
            surrogate_search_evals=tuner_cfg.surrogate_search_evals,
            timeout=tuner_cfg.timeout,
            noise=tuner_cfg.noise,
            seed_tuner=tuner_cfg.seed_tuner + offset,
            seed_eval_base=tuner_cfg.seed_eval_base + offset,
            runtime_factor=tuner_cfg.runtime_factor,
            max_evals=tuner_cfg.max_evals,
        )
        defaults = (
            _resolve_defaults(run_cfg, model_id, task) if strategy == "default" else None
        )
        result = _execute_strategy(strategy, objective, space, tuner_cfg, defaults)
        row["loss"] = result.y_best
        row["n_records"] = len(result.records)
        row["x_best_natural"] = result.x_best_natural
    except Exception as exc:
        row["status"] = "failed"
        row["error"] = f"{type(exc).__name__}: {exc}"
    return row


def cmd_compare(config_path, jobs: int | None = None, log_path=None) -> int:
    try:
        cfg = load_config(config_path)
        draws = int(cfg.get("draws", 3))
        reps = int(cfg.get("replications", 3))
        if draws < 1 or reps < 1:
            raise ConfigError("draws and replications must be >= 1")
        strategies = cfg.get("strategies", list(STRATEGIES))
        if not isinstance(strategies, list) or not strategies:
            raise ConfigError("strategies must be a non-empty list")
        for s in strategies:
            if s not in STRATEGIES:
                raise ConfigError(f"unknown strategy {s!r}")
        # validate the shared sections once before spawning workers
        probe = dict(cfg)
        probe["strategy"] = strategies[0]
        task, space, model_id, _, _, _ = _prepare_run(probe)
        if "default" in strategies:
            _resolve_defaults(cfg, model_id, task)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    env_jobs = os.environ.get("TUNELAB_JOBS")
    if jobs is None and env_jobs is not None:
        try:
            jobs = int(env_jobs)
        except ValueError:
            print("config error: TUNELAB_JOBS must be an integer", file=sys.stderr)
            return EXIT_CONFIG
    jobs = max(1, int(jobs or 1))

    payloads = [
        {"cfg": cfg, "strategy": s, "draw": d, "rep": r}
        for d in range(draws)
        for r in range(reps)
        for s in strategies
    ]
    if jobs == 1:
        rows = [_compare_worker(p) for p in payloads]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_compare_worker, payloads))
    rows.sort(key=lambda r: (r["strategy"], r["draw"], r["replication"]))

    out = Path(log_path or cfg.get("log") or Path(config_path).with_suffix(".compare.jsonl"))
    log = _RunLog(out)
    log.write(
        {
            "type": "meta",
            "command": "compare",
            "config": cfg,
            "config_hash": _config_hash(cfg),
            "strategies": strategies,
            "draws": draws,
            "replications": reps,
            "timestamp": time.time(),
        }
    )
    for row in rows:
        log.write(row)
    log.close()

    n_ok = sum(1 for r in rows if r["status"] == "ok")
    n_fail = len(rows) - n_ok
    print(f"compare: {n_ok} runs ok, {n_fail} failed, log {out}")
    if n_ok == 0:
        print("runtime error: every run failed", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


# ---------------------------------------------------------------- rank


def _cases_from_comparison(lines: list[dict]) -> tuple[list[str], list[list[tuple[int, ...]]]]:
    meta = next((l for l in lines if l.get("type") == "meta"), None)
    if meta is None:
        raise ConfigError("comparison log has no meta line")
    subjects = list(meta.get("strategies", []))
    if len(subjects) < 2:
        raise ConfigError("need at least 2 subjects (strategies) to rank")
    by_key: dict[tuple[int, int], dict[str, float]] = {}
    for obj in lines:
        if obj.get("type") == "case" and obj.get("status") == "ok":
            by_key.setdefault((obj["draw"], obj["replication"]), {})[obj["strategy"]] = obj[
                "loss"
            ]
    rankings = []
    for key in sorted(by_key):
        losses = by_key[key]
        if set(losses) != set(subjects):
            continue  # incomplete experiment (a strategy failed): skip
        rankings.append(rank_losses([losses[s] for s in subjects]))
    if not rankings:
        raise ConfigError("no complete (draw, replication) experiments to rank")
    return subjects, [rankings]


def cmd_rank(input_path, out_path=None) -> int:
    try:
        path = Path(input_path)
        if not path.is_file():
            raise ConfigError(f"input file not found: {path}")
        text = path.read_text()
        subjects: list[str]
        case_rankings: list[list[tuple[int, ...]]]
        try:
            doc = json.loads(text)
        except json.JSONDecodeError:
            doc = None
        if isinstance(doc, dict) and "cases" in doc:
            subjects = list(doc.get("subjects", []))
            if len(subjects) < 2:
                raise ConfigError("need at least 2 subjects to rank")
            case_rankings = []
            for case in doc["cases"]:
                rankings = case.get("rankings", [])
                if not rankings:
                    raise ConfigError("every case needs a non-empty 'rankings' list")
                case_rankings.append([tuple(r) for r in rankings])
        else:
            lines = [json.loads(l) for l in text.splitlines() if l.strip()]
            subjects, case_rankings = _cases_from_comparison(lines)

        cases = []
        for rankings in case_rankings:
            for r in rankings:
                if len(r) != len(subjects):
                    raise ConfigError(
                        f"ranking length {len(r)} != number of subjects {len(subjects)}"
                    )
            cases.append(make_case(rankings))
        freq = rank_frequencies(cases)
    except (ConfigError, AnalysisError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME

    report = {
        "subjects": subjects,
        "cases": [
            {
                "consensus": list(c.consensus),
                "total_distance": c.total_distance,
                "n_rankings": len(c.rankings),
            }
            for c in cases
        ],
        "frequencies": {
            subjects[s]: {str(rank + 1): freq[s, rank] for rank in range(len(subjects))}
            for s in range(len(subjects))
        },
    }
    text = json.dumps(report, indent=2, sort_keys=True, default=_json_default)
    if out_path:
        Path(out_path).write_text(text + "\n")
    print(text)
    return EXIT_OK


# ---------------------------------------------------------------- difficulty


def cmd_difficulty(data_path, target, threshold=None, out_path=None) -> int:
    try:
        path = Path(data_path)
        if not path.is_file():
            raise ConfigError(f"data file not found: {path}")
        table = impute(load_csv(path))
        if target not in table.columns:
            raise ConfigError(f"target column {target!r} not in data")
        if pd.api.types.is_numeric_dtype(table[target]):
            if threshold is None:
                raise ConfigError("numeric target needs --threshold for discretization")
            table = discretize_target(table, target, float(threshold))
        task = Task(table=table, target=target, task_type="classification")
        overlaps = feature_overlaps(task)
    except (ConfigError, DataError, AnalysisError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME

    total = 1.0
    lines = ["feature,overlap"]
    for name, frac in overlaps.items():
        total *= frac
        lines.append(f"{name},{frac!r}")
    level = difficulty_level(total)
    lines.append(f"__total__,{total!r}")
    lines.append(f"__level__,{level}")
    text = "\n".join(lines)
    if out_path:
        Path(out_path).write_text(text + "\n")
    print(text)
    print(
        f"note: level {level} is the nearest anchor; values between anchors are extrapolations",
        file=sys.stderr,
    )
    return EXIT_OK


# ---------------------------------------------------------------- entry point


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="tunelab",
        description="Sequential model-based hyperparameter tuning and benchmark analysis.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_tune = sub.add_parser("tune", help="run one tuning strategy from a JSON config")
    p_tune.add_argument("config")
    p_tune.add_argument("--dry-run", action="store_true", help="validate config and exit")
    p_tune.add_argument("--log", default=None, help="run log path (JSON lines)")

    p_cmp = sub.add_parser("compare", help="strategies x draws x replications grid")
    p_cmp.add_argument("config")
    p_cmp.add_argument("--jobs", type=int, default=None, help="parallel workers")
    p_cmp.add_argument("--log", default=None, help="comparison log path")

    p_rank = sub.add_parser("rank", help="consensus ranking from a comparison log or cases file")
    p_rank.add_argument("input")
    p_rank.add_argument("--out", default=None, help="write the JSON report here too")

    p_diff = sub.add_parser("difficulty", help="two-class sample-overlap difficulty of a CSV")
    p_diff.add_argument("data")
    p_diff.add_argument("--target", required=True)
    p_diff.add_argument("--threshold", type=float, default=None)
    p_diff.add_argument("--out", default=None, help="write the CSV report here too")

    args = parser.parse_args(argv)
    if args.command == "tune":
        return cmd_tune(args.config, dry_run=args.dry_run, log_path=args.log)
    if args.command == "compare":
        return cmd_compare(args.config, jobs=args.jobs, log_path=args.log)
    if args.command == "rank":
        return cmd_rank(args.input, out_path=args.out)
    return cmd_difficulty(args.data, args.target, threshold=args.threshold, out_path=args.out)


if __name__ == "__main__":
    sys.exit(main())
