"""Benchmark construction and evaluation toolkit for fair representation
learning on tabular data.

Builds transfer-task benchmarks (from raw census/health tables or a synthetic
generator), validates candidate tasks against four acceptance criteria,
trains restricted tree encoders, and evaluates any representation's
accuracy-fairness trade-off across multiple downstream tasks.
"""

__version__ = "0.1.0"

from .classifier import ClassifierParams, MlpClassifier, train_classifier
from .criteria import (
    CriteriaReport,
    CriteriaThresholds,
    TaskStats,
    build_report,
    evaluate_criteria,
    select_tasks,
)
from .dataset import (
    Dataset,
    NormStats,
    SplitDataset,
    TableSchema,
    apply_normalize,
    fit_normalize,
    load_csv,
    load_dataset,
    load_split,
    normalize_matrix,
    one_hot,
    save_dataset,
    save_split,
    split,
)
from .evaluation import (
    RunResult,
    TradeoffPoint,
    evaluate_protocol,
    load_representations,
    save_representations,
    unfair_baseline,
)
from .fare import (
    CriterionWeights,
    FareEncoder,
    FareParams,
    FareTree,
    RecMode,
    best_split,
    build_tree,
    encode,
    leaf_criterion,
)
from .ingest import AcsFilterSpec, ingest_acs, ingest_health
from .metrics import accuracy, dp_distance, gini, majority_accuracy, smc
from .pareto import emit_report, pareto_front
from .sweep import SweepConfig, TrialRecord, expand_grid, run_sweep
from .synth import SynthSpec, calibrate_bias, make_synth_benchmark, synth_generate

__all__ = [
    "AcsFilterSpec",
    "ClassifierParams",
    "CriteriaReport",
    "CriteriaThresholds",
    "CriterionWeights",
    "Dataset",
    "FareEncoder",
    "FareParams",
    "FareTree",
    "MlpClassifier",
    "NormStats",
    "RecMode",
    "RunResult",
    "SplitDataset",
    "SweepConfig",
    "SynthSpec",
    "TableSchema",
    "TaskStats",
    "TradeoffPoint",
    "TrialRecord",
    "accuracy",
    "apply_normalize",
    "best_split",
    "build_report",
    "build_tree",
    "calibrate_bias",
    "dp_distance",
    "emit_report",
    "encode",
    "evaluate_criteria",
    "evaluate_protocol",
    "expand_grid",
    "fit_normalize",
    "gini",
    "ingest_acs",
    "ingest_health",
    "leaf_criterion",
    "load_csv",
    "load_dataset",
    "load_representations",
    "load_split",
    "majority_accuracy",
    "make_synth_benchmark",
    "normalize_matrix",
    "one_hot",
    "pareto_front",
    "run_sweep",
    "save_dataset",
    "save_representations",
    "save_split",
    "select_tasks",
    "smc",
    "split",
    "synth_generate",
    "train_classifier",
    "unfair_baseline",
    "__version__",
]
