"""Supervised wellbeing classification."""

from .evaluation import (
    EvalReport,
    confusion_matrix,
    fold_indices,
    kfold_cv,
    modality_ablation,
    reports_csv,
)
from .features import (
    LabeledDataset,
    MODALITY_KINDS,
    STAT_NAMES,
    complete_labelled_rows,
    dbn_dataset,
    frame_dataset,
    modality_channels,
    statistical_features,
    window_stats,
)
from .models import (
    DecisionTree,
    GaussianNB,
    LogisticRegression,
    MODEL_KINDS,
    ModelKind,
    RandomForest,
    predict,
    softmax_loss_grad,
    train_model,
)

__all__ = [
    "EvalReport", "confusion_matrix", "fold_indices", "kfold_cv", "modality_ablation",
    "reports_csv", "LabeledDataset", "MODALITY_KINDS", "STAT_NAMES", "complete_labelled_rows", "dbn_dataset",
    "frame_dataset", "modality_channels", "statistical_features", "window_stats",
    "DecisionTree", "GaussianNB", "LogisticRegression", "MODEL_KINDS", "ModelKind",
    "RandomForest", "predict", "softmax_loss_grad", "train_model",
]
