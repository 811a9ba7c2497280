# SPDX-License-Identifier: LGPL-3.0-or-later
# SPDX-FileNotice: Part of the cagan-active-learning project.

"""Task classifier: backbones, fine-tuning and AUC evaluation."""

from .backbone import StochasticMask, ToyCnn, build_backbone
from .checkpoint import ClassifierCheckpoint, load_classifier, new_classifier, save_classifier
from .evaluation import (
    auc,
    auc_report,
    evaluate,
    evaluate_samples,
    predict_proba,
    read_auc_json,
    write_auc_json,
    write_auc_table,
)
from .perceptual import ClassifierFeatureExtractor
from .training import finetune, heteroscedastic_loss, inverse_frequency_weights

__all__ = [
    "ClassifierCheckpoint",
    "ClassifierFeatureExtractor",
    "StochasticMask",
    "ToyCnn",
    "auc",
    "auc_report",
    "build_backbone",
    "evaluate",
    "evaluate_samples",
    "finetune",
    "heteroscedastic_loss",
    "inverse_frequency_weights",
    "load_classifier",
    "new_classifier",
    "predict_proba",
    "read_auc_json",
    "save_classifier",
    "write_auc_json",
    "write_auc_table",
]
