"""Model-zoo OOD detection with TPR control.

Pipeline: per-model detection scores (higher = more ID-like), empirical
p-values against ID validation scores, and a Benjamini-Hochberg step-up
ensemble that keeps the ID true-positive rate at its target level no
matter how many models the zoo holds.
"""

from .ensemble import (
    SCHEMES,
    Decision,
    EnsembleConfig,
    average_decide,
    bh_decide,
    decide,
    decide_batch,
    naive_decide,
    voting_decide,
)
from .errors import ZooDetectError
from .ingest import (
    BundleSummary,
    ModelEntry,
    ZooManifest,
    load_manifest,
    peek_dims,
    read_matrix,
    validate_bundle,
    write_matrix,
)
from .metrics import (
    AucGrid,
    DetectionCounts,
    DetectionReport,
    ReportRow,
    auc_sweep,
    bench,
    confusion,
    rank_auc,
    tpr_fpr,
)
from .pvalue import (
    EmpiricalCdf,
    Label,
    PValueMatrix,
    ThresholdSet,
    build_cdf,
    empirical_pvalue,
    pvalue_matrix,
    threshold_at_tpr,
    threshold_decision,
    thresholds_at_tpr,
)
from .scores import (
    MahalanobisModel,
    ScoreConfig,
    ScoreTable,
    energy_score,
    fit_mahalanobis,
    knn_score,
    mahalanobis_score,
    msp_score,
    score_table,
)
from .sim import (
    Attribution,
    IdUniformSimConfig,
    MixtureSimConfig,
    PowerStats,
    SynthBenchConfig,
    TprEstimate,
    explain_sample,
    simulate_id_uniform,
    simulate_mixture,
    synth_benchmark,
)

__version__ = "0.1.0"

__all__ = [
    "SCHEMES",
    "Attribution",
    "AucGrid",
    "BundleSummary",
    "Decision",
    "DetectionCounts",
    "DetectionReport",
    "EmpiricalCdf",
    "EnsembleConfig",
    "IdUniformSimConfig",
    "Label",
    "MahalanobisModel",
    "MixtureSimConfig",
    "ModelEntry",
    "PValueMatrix",
    "PowerStats",
    "ReportRow",
    "ScoreConfig",
    "ScoreTable",
    "SynthBenchConfig",
    "ThresholdSet",
    "TprEstimate",
    "ZooDetectError",
    "ZooManifest",
    "auc_sweep",
    "average_decide",
    "bench",
    "bh_decide",
    "build_cdf",
    "confusion",
    "decide",
    "decide_batch",
    "empirical_pvalue",
    "energy_score",
    "explain_sample",
    "fit_mahalanobis",
    "knn_score",
    "load_manifest",
    "mahalanobis_score",
    "msp_score",
    "naive_decide",
    "peek_dims",
    "pvalue_matrix",
    "rank_auc",
    "read_matrix",
    "score_table",
    "simulate_id_uniform",
    "simulate_mixture",
    "synth_benchmark",
    "threshold_at_tpr",
    "threshold_decision",
    "thresholds_at_tpr",
    "tpr_fpr",
    "validate_bundle",
    "voting_decide",
    "write_matrix",
]
