"""Mixed-type hyperparameter search spaces.

Declares parameters with raw-scale bounds (what the tuner sees), transforms
to the natural scale (what the learner sees), optional relative expressions,
and the preset spaces plus documented defaults and heuristics for the six
supported model families.
"""

from __future__ import annotations

import ast
import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "SpaceError",
    "DecodeError",
    "ParamSpec",
    "SearchSpace",
    "transform_value",
    "decode_point",
    "preset",
    "preset_defaults",
    "heuristic_defaults",
    "PRESET_MODELS",
]

TRANSFORMS = ("identity", "pow10", "pow2", "pow2-round")
KINDS = ("real", "integer", "categorical")
PRESET_MODELS = ("knn", "en", "dt", "rf", "xgb", "svm")

# slack for float round-off when checking raw coordinates against bounds
_BOUND_EPS = 1e-9


class SpaceError(ValueError):
    """Invalid space declaration or transform id."""


class DecodeError(ValueError):
    """Raw coordinate cannot be decoded; carries the parameter name."""

    def __init__(self, param: str, message: str):
        super().__init__(f"parameter {param!r}: {message}")
        self.param = param


def _round_half_even(x: float) -> int:
    # Python's round() implements IEC 60559 round-half-to-even
    return int(round(float(x)))


def transform_value(raw: float, transform: str) -> float:
    """Map a raw-scale value to the natural scale.

    identity returns raw; pow10 returns 10**raw; pow2 returns 2**raw;
    pow2-round returns round(2**raw) with ties to even.
    """
    raw = float(raw)
    if not math.isfinite(raw):
        raise SpaceError(f"raw value must be finite, got {raw!r}")
    if transform == "identity":
        return raw
    if transform == "pow10":
        return 10.0 ** raw
    if transform == "pow2":
        return 2.0 ** raw
    if transform == "pow2-round":
        return float(_round_half_even(2.0 ** raw))
    raise SpaceError(f"unknown transform {transform!r}")


# --- relative expressions -------------------------------------------------
#
# Grammar: {+, -, *, /, max, min, round, numeric constants, parameter names}.
# Evaluated with a whitelisted ast walk; round() is one-argument and rounds
# half to even like the integer decode.

_ALLOWED_BINOPS = {
    ast.Add: lambda a, b: a + b,
    ast.Sub: lambda a, b: a - b,
    ast.Mult: lambda a, b: a * b,
    ast.Div: lambda a, b: a / b,
}

_ALLOWED_FUNCS = {
    "max": lambda *a: max(a),
    "min": lambda *a: min(a),
    "round": lambda a: float(_round_half_even(a)),
}


def _expr_names(expr: str) -> set[str]:
    tree = _parse_expression(expr)
    # names in call position are functions, not parameter references
    func_slots = {id(node.func) for node in ast.walk(tree) if isinstance(node, ast.Call)}
    return {
        node.id
        for node in ast.walk(tree)
        if isinstance(node, ast.Name) and id(node) not in func_slots
    }


def _parse_expression(expr: str) -> ast.Expression:
    try:
        tree = ast.parse(expr, mode="eval")
    except SyntaxError as err:
        raise SpaceError(f"unparseable relative expression {expr!r}: {err}") from None
    for node in ast.walk(tree):
        if isinstance(node, (ast.Expression, ast.Name, ast.Load)):
            continue
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            continue
        if isinstance(node, ast.BinOp) and type(node.op) in _ALLOWED_BINOPS:
            continue
        if isinstance(node, (ast.Add, ast.Sub, ast.Mult, ast.Div, ast.USub, ast.UAdd)):
            continue
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
            continue
        if isinstance(node, ast.Call):
            if (
                isinstance(node.func, ast.Name)
                and node.func.id in _ALLOWED_FUNCS
                and not node.keywords
            ):
                continue
            raise SpaceError(f"only {sorted(_ALLOWED_FUNCS)} calls are allowed in {expr!r}")
        raise SpaceError(f"disallowed syntax {type(node).__name__} in relative expression {expr!r}")
    return tree


def _eval_node(node: ast.AST, env: dict[str, float]) -> float:
    if isinstance(node, ast.Constant):
        return float(node.value)
    if isinstance(node, ast.Name):
        if node.id not in env:
            raise SpaceError(f"relative expression references unknown parameter {node.id!r}")
        return float(env[node.id])
    if isinstance(node, ast.BinOp):
        return _ALLOWED_BINOPS[type(node.op)](_eval_node(node.left, env), _eval_node(node.right, env))
    if isinstance(node, ast.UnaryOp):
        val = _eval_node(node.operand, env)
        return -val if isinstance(node.op, ast.USub) else val
    if isinstance(node, ast.Call):
        args = [_eval_node(a, env) for a in node.args]
        return float(_ALLOWED_FUNCS[node.func.id](*args))
    raise SpaceError(f"disallowed syntax {type(node).__name__}")


def eval_relative(expr: str, env: dict[str, float]) -> float:
    """Evaluate a relative-parameter expression against decoded values."""
    return _eval_node(_parse_expression(expr).body, env)


# --- parameter and space declarations -------------------------------------


@dataclass(frozen=True)
class ParamSpec:
    """One hyperparameter: raw bounds, transform, optional relative expression.

    Categorical parameters carry ordered levels instead of bounds and are
    exposed to the tuner as a level index in [0, len(levels) - 1].
    """

    name: str
    kind: str
    lower: float | None = None
    upper: float | None = None
    levels: tuple[str, ...] | None = None
    transform: str = "identity"
    relative: str | None = None

    def __post_init__(self):
        if not self.name or not isinstance(self.name, str):
            raise SpaceError(f"invalid parameter name {self.name!r}")
        if self.kind not in KINDS:
            raise SpaceError(f"{self.name}: unknown kind {self.kind!r}")
        if self.transform not in TRANSFORMS:
            raise SpaceError(f"{self.name}: unknown transform {self.transform!r}")
        if self.kind == "categorical":
            if not self.levels:
                raise SpaceError(f"{self.name}: categorical parameter needs levels")
            object.__setattr__(self, "levels", tuple(str(level) for level in self.levels))
            if len(set(self.levels)) != len(self.levels):
                raise SpaceError(f"{self.name}: duplicate levels")
            if self.lower is not None or self.upper is not None:
                raise SpaceError(f"{self.name}: categorical parameter takes no bounds")
            if self.transform != "identity" or self.relative is not None:
                raise SpaceError(f"{self.name}: categorical parameter takes no transform/relative")
            return
        if self.levels is not None:
            raise SpaceError(f"{self.name}: levels are only valid for categorical kind")
        if self.lower is None or self.upper is None:
            raise SpaceError(f"{self.name}: numeric parameter needs lower and upper bounds")
        lower, upper = float(self.lower), float(self.upper)
        if not (math.isfinite(lower) and math.isfinite(upper)):
            raise SpaceError(f"{self.name}: bounds must be finite")
        # equality is tolerated so fixed (zero-width) parameters can ride along
        if lower > upper:
            raise SpaceError(f"{self.name}: requires lower <= upper, got [{lower}, {upper}]")
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)
        if self.transform == "pow2-round" and self.kind != "integer":
            raise SpaceError(f"{self.name}: pow2-round is only valid for integer kind")
        if self.relative is not None:
            _parse_expression(self.relative)

    @property
    def is_categorical(self) -> bool:
        return self.kind == "categorical"

    @property
    def raw_lower(self) -> float:
        return 0.0 if self.is_categorical else self.lower

    @property
    def raw_upper(self) -> float:
        return float(len(self.levels) - 1) if self.is_categorical else self.upper

    def to_dict(self) -> dict:
        out = {"name": self.name, "kind": self.kind}
        if self.is_categorical:
            out["levels"] = list(self.levels)
        else:
            out["lower"] = self.lower
            out["upper"] = self.upper
            if self.transform != "identity":
                out["transform"] = self.transform
            if self.relative is not None:
                out["relative"] = self.relative
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "ParamSpec":
        known = {"name", "kind", "lower", "upper", "levels", "transform", "relative"}
        unknown = set(data) - known
        if unknown:
            raise SpaceError(f"unknown ParamSpec fields {sorted(unknown)}")
        kwargs = dict(data)
        if "levels" in kwargs and kwargs["levels"] is not None:
            kwargs["levels"] = tuple(kwargs["levels"])
        return cls(**kwargs)


@dataclass(frozen=True)
class SearchSpace:
    """Ordered collection of ParamSpecs defining one tunable space."""

    params: tuple[ParamSpec, ...]

    def __post_init__(self):
        object.__setattr__(self, "params", tuple(self.params))
        if not self.params:
            raise SpaceError("a search space needs at least one parameter")
        names = [p.name for p in self.params]
        if len(set(names)) != len(names):
            raise SpaceError(f"duplicate parameter names in {names}")
        seen: set[str] = set()
        for p in self.params:
            if p.relative is not None:
                refs = _expr_names(p.relative)
                undeclared = refs - seen - {p.name}
                if undeclared:
                    raise SpaceError(
                        f"{p.name}: relative expression references "
                        f"{sorted(undeclared)} which are not declared earlier"
                    )
            seen.add(p.name)

    @property
    def d(self) -> int:
        return len(self.params)

    @property
    def names(self) -> list[str]:
        return [p.name for p in self.params]

    def raw_bounds(self) -> tuple[np.ndarray, np.ndarray]:
        lower = np.array([p.raw_lower for p in self.params], dtype=float)
        upper = np.array([p.raw_upper for p in self.params], dtype=float)
        return lower, upper

    def cat_mask(self) -> np.ndarray:
        return np.array([p.is_categorical for p in self.params], dtype=bool)

    def to_dict(self) -> dict:
        return {"params": [p.to_dict() for p in self.params]}

    @classmethod
    def from_dict(cls, data: dict) -> "SearchSpace":
        if "params" not in data:
            raise SpaceError("space definition needs a 'params' list")
        return cls(tuple(ParamSpec.from_dict(p) for p in data["params"]))


def decode_point(space: SearchSpace, raw) -> dict:
    """Decode a raw vector into a natural-scale assignment.

    Applies the per-parameter transform, rounds integer kinds half to even,
    maps categorical indices to their labels, then evaluates relative
    expressions in declaration order.
    """
    raw = np.asarray(raw, dtype=float)
    if raw.shape != (space.d,):
        raise DecodeError(space.params[0].name if space.params else "?",
                          f"raw vector has shape {raw.shape}, expected ({space.d},)")
    assignment: dict = {}
    numeric_env: dict[str, float] = {}
    for i, p in enumerate(space.params):
        x = float(raw[i])
        slack = _BOUND_EPS * max(1.0, abs(p.raw_lower), abs(p.raw_upper))
        if not (p.raw_lower - slack <= x <= p.raw_upper + slack):
            raise DecodeError(p.name, f"raw value {x} outside [{p.raw_lower}, {p.raw_upper}]")
        x = min(max(x, p.raw_lower), p.raw_upper)
        if p.is_categorical:
            idx = _round_half_even(x)
            idx = min(max(idx, 0), len(p.levels) - 1)
            assignment[p.name] = p.levels[idx]
            numeric_env[p.name] = float(idx)
            continue
        value = transform_value(x, p.transform)
        if p.kind == "integer":
            value = _round_half_even(value)
        if p.relative is not None:
            env = dict(numeric_env)
            env[p.name] = float(value)
            value = eval_relative(p.relative, env)
            if p.kind == "integer":
                value = _round_half_even(value)
        if p.kind == "integer":
            value = int(value)
        else:
            value = float(value)
        assignment[p.name] = value
        numeric_env[p.name] = float(value)
    return assignment


# --- presets ---------------------------------------------------------------
#
# Raw-scale bounds and transforms for the six supported model families.
# rf and xgb need the feature count n (mtry upper = n, colsample lower = 1/n);
# svm's epsilon exists only for regression tasks.


def _require_n(model_id: str, n_features: int | None) -> int:
    if n_features is None or int(n_features) < 1:
        raise SpaceError(f"preset {model_id!r} needs n_features >= 1, got {n_features!r}")
    return int(n_features)


def preset(model_id: str, n_features: int | None = None, task_type: str = "classification") -> SearchSpace:
    """Return the tunable search space for one of the six model families."""
    if task_type not in ("classification", "regression"):
        raise SpaceError(f"unknown task_type {task_type!r}")
    if model_id == "knn":
        return SearchSpace((
            ParamSpec("k", "integer", 1, 30),
            ParamSpec("p", "real", -1, 2, transform="pow10"),
        ))
    if model_id == "en":
        return SearchSpace((
            ParamSpec("alpha", "real", 0, 1),
            ParamSpec("thresh", "real", -8, -1, transform="pow10"),
        ))
    if model_id == "dt":
        return SearchSpace((
            ParamSpec("minsplit", "integer", 1, 300),
            ParamSpec("minbucket", "real", 0.1, 0.5,
                      relative="round(max(minsplit * minbucket, 1))"),
            ParamSpec("cp", "real", -10, 0, transform="pow10"),
            ParamSpec("maxdepth", "integer", 1, 30),
        ))
    if model_id == "rf":
        n = _require_n(model_id, n_features)
        return SearchSpace((
            ParamSpec("num.trees", "integer", 0, 11, transform="pow2-round"),
            ParamSpec("mtry", "integer", 1, n),
            ParamSpec("sample.fraction", "real", 0.1, 1),
            ParamSpec("replace", "categorical", levels=("TRUE", "FALSE")),
            ParamSpec("respect.unordered.factors", "categorical", levels=("ignore", "order")),
        ))
    if model_id == "xgb":
        n = _require_n(model_id, n_features)
        return SearchSpace((
            ParamSpec("eta", "real", -10, 0, transform="pow2"),
            ParamSpec("nrounds", "integer", 0, 11, transform="pow2"),
            ParamSpec("lambda", "real", -10, 10, transform="pow2"),
            ParamSpec("alpha", "real", -10, 10, transform="pow2"),
            ParamSpec("subsample", "real", 0.1, 1),
            ParamSpec("colsample_bytree", "real", 1.0 / n, 1),
            ParamSpec("gamma", "real", -10, 10, transform="pow2"),
            ParamSpec("max_depth", "integer", 1, 15),
            ParamSpec("min_child_weight", "real", 0, 7, transform="pow2"),
        ))
    if model_id == "svm":
        params = [
            ParamSpec("kernel", "categorical", levels=("radial", "sigmoid")),
            ParamSpec("gamma", "real", -10, 10, transform="pow2"),
            ParamSpec("coef0", "real", -1, 1),
            ParamSpec("cost", "real", -10, 10, transform="pow2"),
        ]
        if task_type == "regression":
            params.append(ParamSpec("epsilon", "real", -8, 0, transform="pow10"))
        return SearchSpace(tuple(params))
    raise SpaceError(f"unknown model id {model_id!r}; expected one of {PRESET_MODELS}")


# Documented defaults of the reference implementations (kknn, glmnet, rpart,
# ranger, xgboost, e1071). Values depending on the data shape are resolved
# in preset_defaults below.
_STATIC_DEFAULTS: dict[str, dict] = {
    "knn": {"k": 7, "p": 2.0},
    "en": {"alpha": 1.0, "thresh": 1e-7},
    "dt": {"minsplit": 20, "minbucket": 7, "cp": 0.01, "maxdepth": 30},
    "rf": {"num.trees": 500, "sample.fraction": 1.0, "replace": "TRUE",
           "respect.unordered.factors": "ignore"},
    "xgb": {"eta": 0.3, "nrounds": 1, "lambda": 1.0, "alpha": 0.0, "subsample": 1.0,
            "colsample_bytree": 1.0, "gamma": 0.0, "max_depth": 6, "min_child_weight": 1.0},
    "svm": {"kernel": "radial", "coef0": 0.0, "cost": 1.0},
}


def preset_defaults(model_id: str, n_features: int | None = None,
                    task_type: str = "classification") -> dict:
    """Natural-scale default assignment for the defaults baseline."""
    if model_id not in _STATIC_DEFAULTS:
        raise SpaceError(f"unknown model id {model_id!r}; expected one of {PRESET_MODELS}")
    defaults = dict(_STATIC_DEFAULTS[model_id])
    if model_id == "rf":
        n = _require_n(model_id, n_features)
        defaults["mtry"] = max(1, int(math.floor(math.sqrt(n))))
    if model_id == "svm":
        n = _require_n(model_id, n_features)
        defaults["gamma"] = 1.0 / n
        if task_type == "regression":
            defaults["epsilon"] = 0.1
    return defaults


def heuristic_defaults(model_id: str, summary: dict) -> dict:
    """Survey heuristics for starting values, on the natural scale.

    summary may carry m (samples), n (features), y_mean, y_std and
    noise_std; each heuristic is emitted only when its inputs are present.
    """
    out: dict = {}
    m = summary.get("m")
    n = summary.get("n")
    y_mean = summary.get("y_mean")
    y_std = summary.get("y_std")
    noise_std = summary.get("noise_std")
    if model_id == "knn":
        if m is not None:
            if m < 1:
                raise SpaceError(f"sample count must be positive, got {m}")
            out["k"] = max(1, _round_half_even(math.sqrt(m)))
    elif model_id == "rf":
        if n is not None:
            if n < 1:
                raise SpaceError(f"feature count must be positive, got {n}")
            out["mtry"] = int(math.floor(math.log2(n) + 1))
    elif model_id == "svm":
        if n is not None:
            if n < 1:
                raise SpaceError(f"feature count must be positive, got {n}")
            out["gamma"] = 1.0 / n
        if y_mean is not None and y_std is not None:
            out["cost"] = max(abs(y_mean + 3 * y_std), abs(y_mean - 3 * y_std))
        if noise_std is not None and m is not None:
            if m < 2:
                raise SpaceError(f"epsilon heuristic needs m >= 2, got {m}")
            out["epsilon"] = 3.0 * noise_std * math.sqrt(math.log(m) / m)
    elif model_id not in PRESET_MODELS:
        raise SpaceError(f"unknown model id {model_id!r}; expected one of {PRESET_MODELS}")
    return out
