"""Wind-turbine operational status classification from SCADA time series.

Learns the characteristic power curve of a farm from operational data,
aligns farms with different turbine types onto a common reference by an
affine wind-speed transform, and trains KNN / feed-forward / convolutional
classifiers whose cross-farm transferability can be measured on a built-in
synthetic farm generator.
"""

__version__ = "0.1.0"

from .baseline import (
    AlignmentParams,
    GridSearchSpec,
    Histogram2D,
    PowerCurveBaseline,
    apply_alignment,
    extract_baseline,
    fit_alignment,
    histogram2d,
    learn_baseline,
)
from .data import (
    FarmDataset,
    ScadaRecord,
    SplitSpec,
    TurbineSeries,
    canonical_vocab,
    denormalize,
    load_csv,
    min_max_normalize,
    save_csv,
    split,
)
from .evaluate import (
    AccuracyReport,
    ConfusionMatrix,
    TransferMatrix,
    build_mixed,
    score,
    transfer_experiment,
    unify_label_space,
)
from .models import (
    CnnConfig,
    FfnConfig,
    KnnConfig,
    KnnModel,
    ModelBundle,
    Predictions,
    TrainParams,
    knn_predict_proba,
    load_bundle,
    predict,
    save_bundle,
    train,
)
from .synth import FarmProfile, StatusEpisode, generate_farm, ideal_power_curve, paired_profiles
from .windows import WindowSample, WindowSpec, make_windows, stack_windows

__all__ = [
    "AccuracyReport",
    "AlignmentParams",
    "CnnConfig",
    "ConfusionMatrix",
    "FarmDataset",
    "FarmProfile",
    "FfnConfig",
    "GridSearchSpec",
    "Histogram2D",
    "KnnConfig",
    "KnnModel",
    "ModelBundle",
    "PowerCurveBaseline",
    "Predictions",
    "ScadaRecord",
    "SplitSpec",
    "StatusEpisode",
    "TrainParams",
    "TransferMatrix",
    "TurbineSeries",
    "WindowSample",
    "WindowSpec",
    "apply_alignment",
    "build_mixed",
    "canonical_vocab",
    "denormalize",
    "extract_baseline",
    "fit_alignment",
    "generate_farm",
    "histogram2d",
    "ideal_power_curve",
    "knn_predict_proba",
    "learn_baseline",
    "load_bundle",
    "load_csv",
    "make_windows",
    "min_max_normalize",
    "paired_profiles",
    "predict",
    "save_bundle",
    "save_csv",
    "score",
    "split",
    "stack_windows",
    "train",
    "transfer_experiment",
    "unify_label_space",
]
