"""Sequential model-based hyperparameter tuning at desk scale.

Pieces: typed search spaces with raw/natural transforms, Latin
hypercube and uniform designs, a Kriging surrogate with nugget and
reinterpolation, differential evolution, three tuning strategies under
a wall-clock budget, native k-NN and CART learners wrapped in
timeout-guarded objectives, data preprocessing, and rank/difficulty
analysis of benchmark results. The `tunelab` console script exposes the
tune / compare / rank / difficulty workflows.
"""

from ._kernels import BACKEND as kernel_backend
from .analysis import (
    AnalysisError,
    DIFFICULTY_ANCHORS,
    RankingCase,
    difficulty_level,
    feature_overlaps,
    kemeny_consensus,
    kendall_tau,
    make_case,
    rank_frequencies,
    rank_losses,
    sample_overlap,
    sensitivity_export,
)
from .data import (
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
from .design import DesignMatrix, design_to_csv, lhs, uniform_random
from .objective import (
    Deadline,
    EvalOutcome,
    EvaluationTimeout,
    HoldoutSplit,
    Objective,
    ObjectiveError,
    cart_fit,
    cart_predict,
    external_objective,
    knn_predict,
    make_objective,
    mmce,
    rmse,
)
from .optim import DEConfig, OptimResult, de_minimize, random_minimize
from .space import (
    DecodeError,
    ParamSpec,
    PRESET_MODELS,
    SearchSpace,
    SpaceError,
    decode_point,
    heuristic_defaults,
    preset,
    preset_defaults,
    transform_value,
)
from .surrogate import (
    KrigingConfig,
    KrigingFitError,
    KrigingModel,
    fit_with_params,
    neg_log_likelihood,
)
from .surrogate import fit as kriging_fit
from .tuner import (
    EvaluationRecord,
    TuneResult,
    TunerConfig,
    default_run,
    random_search_run,
    runtime_factor,
    spot_run,
)

__version__ = "0.1.0"

__all__ = [
    "kernel_backend",
    "AnalysisError",
    "DIFFICULTY_ANCHORS",
    "RankingCase",
    "difficulty_level",
    "feature_overlaps",
    "kemeny_consensus",
    "kendall_tau",
    "make_case",
    "rank_frequencies",
    "rank_losses",
    "sample_overlap",
    "sensitivity_export",
    "DataError",
    "Task",
    "discretize_target",
    "dummy_encode",
    "holdout_split",
    "impute",
    "load_csv",
    "subsample",
    "synth_classification",
    "DesignMatrix",
    "design_to_csv",
    "lhs",
    "uniform_random",
    "Deadline",
    "EvalOutcome",
    "EvaluationTimeout",
    "HoldoutSplit",
    "Objective",
    "ObjectiveError",
    "cart_fit",
    "cart_predict",
    "external_objective",
    "knn_predict",
    "make_objective",
    "mmce",
    "rmse",
    "DEConfig",
    "OptimResult",
    "de_minimize",
    "random_minimize",
    "DecodeError",
    "ParamSpec",
    "PRESET_MODELS",
    "SearchSpace",
    "SpaceError",
    "decode_point",
    "heuristic_defaults",
    "preset",
    "preset_defaults",
    "transform_value",
    "KrigingConfig",
    "KrigingFitError",
    "KrigingModel",
    "kriging_fit",
    "fit_with_params",
    "neg_log_likelihood",
    "EvaluationRecord",
    "TuneResult",
    "TunerConfig",
    "default_run",
    "random_search_run",
    "runtime_factor",
    "spot_run",
    "__version__",
]
