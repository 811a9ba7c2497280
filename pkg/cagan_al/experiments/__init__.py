# SPDX-License-Identifier: LGPL-3.0-or-later
# SPDX-FileNotice: Part of the cagan-active-learning project.

"""Experiment harness: label-budget sweep, plausibility matrix, growth curve."""

from .common import Generators, final_test_report, fit_fsl
from .growth import GROWTH_MODES, initial_real_pool, synthetic_growth_curve, trend_spearman
from .mix import build_twin_corpus, check_lineage, mix_samples, real_syn_mix_matrix, twin_assignment
from .report import ConditionResult, ExperimentReport, median_iqr, read_summary
from .sweep import FSL_METHOD, label_budget_sweep

__all__ = [
    "FSL_METHOD",
    "GROWTH_MODES",
    "ConditionResult",
    "ExperimentReport",
    "Generators",
    "build_twin_corpus",
    "check_lineage",
    "final_test_report",
    "fit_fsl",
    "initial_real_pool",
    "label_budget_sweep",
    "median_iqr",
    "mix_samples",
    "read_summary",
    "real_syn_mix_matrix",
    "synthetic_growth_curve",
    "trend_spearman",
    "twin_assignment",
]
