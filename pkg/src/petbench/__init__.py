"""petbench: quantify the accuracy and energy cost of tabular privacy
treatments.

The package covers the full loop: load or generate a dataset, apply a
privacy treatment (k-anonymization through generalization hierarchies, or
a Gaussian-copula synthesizer), train small from-scratch learners, meter
every phase with a RAPL-style energy counter (real or simulated), test the
energy differences for significance, and rank the resulting
privacy/energy/accuracy trade-offs.
"""

from .anonymity import (
    AnonymizationReport,
    BudgetExceededError,
    GeneralizationState,
    Hierarchy,
    NumericBinHierarchy,
    SuffixMaskHierarchy,
    TaxonomyHierarchy,
    anonymize,
    apply_state,
    hierarchies_from_config,
    partition_classes,
    suppression_ratio,
    verify_k,
)
from .data import (
    AttributeSchema,
    ColumnSpec,
    DataTable,
    EncodedMatrix,
    Encoder,
    Kind,
    Role,
    SplitSpec,
    TargetRule,
    binarize_target,
    encode,
    load_csv,
    split,
    write_csv,
)
from .energy import (
    EnergySample,
    IdleBaseline,
    Meter,
    SimulatedPower,
    SysfsRapl,
    adjust,
    measure,
    measure_idle,
    open_meter,
)
from .harness import (
    DATASETS,
    ExperimentConfig,
    MeterConfig,
    ReportTables,
    RunRecord,
    Treatment,
    build_report,
    fetch_dataset,
    load_dataset,
    read_log,
    render,
    run_experiment,
)
from .learners import (
    EvalResult,
    KnnModel,
    TrainConfig,
    accuracy,
    evaluate_probabilities,
    knn_predict,
    train_logreg,
    train_nn,
)
from .stats import Alternative, Method, UTestResult, mann_whitney, pairwise_matrix
from .synthesis import CopulaModel, UtilityReport, utility_report
from .tradeoff import (
    PrivacyScale,
    ScenarioWeights,
    TradeoffPoint,
    collect_points,
    pareto_front,
    scenario_presets,
    scenario_rank,
)

__version__ = "0.1.0"

__all__ = [
    "AnonymizationReport",
    "Alternative",
    "AttributeSchema",
    "BudgetExceededError",
    "ColumnSpec",
    "CopulaModel",
    "DATASETS",
    "DataTable",
    "EncodedMatrix",
    "Encoder",
    "EnergySample",
    "EvalResult",
    "ExperimentConfig",
    "GeneralizationState",
    "Hierarchy",
    "IdleBaseline",
    "Kind",
    "KnnModel",
    "Meter",
    "MeterConfig",
    "Method",
    "NumericBinHierarchy",
    "PrivacyScale",
    "ReportTables",
    "Role",
    "RunRecord",
    "ScenarioWeights",
    "SimulatedPower",
    "SplitSpec",
    "SuffixMaskHierarchy",
    "SysfsRapl",
    "TargetRule",
    "TaxonomyHierarchy",
    "TradeoffPoint",
    "TrainConfig",
    "Treatment",
    "UTestResult",
    "UtilityReport",
    "accuracy",
    "adjust",
    "anonymize",
    "apply_state",
    "binarize_target",
    "build_report",
    "collect_points",
    "encode",
    "evaluate_probabilities",
    "fetch_dataset",
    "hierarchies_from_config",
    "knn_predict",
    "load_csv",
    "load_dataset",
    "mann_whitney",
    "measure",
    "measure_idle",
    "open_meter",
    "pairwise_matrix",
    "pareto_front",
    "partition_classes",
    "read_log",
    "render",
    "run_experiment",
    "scenario_presets",
    "scenario_rank",
    "split",
    "suppression_ratio",
    "train_logreg",
    "train_nn",
    "utility_report",
    "verify_k",
    "write_csv",
]
