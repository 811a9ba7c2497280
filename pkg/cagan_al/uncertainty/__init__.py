# SPDX-License-Identifier: LGPL-3.0-or-later
# SPDX-FileNotice: Part of the cagan-active-learning project.

"""Monte-Carlo informativeness scoring and selection."""

from .monte_carlo import mc_predict
from .scoring import (
    ScoredSample,
    SelectionResult,
    UncertaintyEstimate,
    combine_variance,
    entropy_score,
    entropy_scores,
    estimates_from_passes,
    random_scores,
    rank_by_informativeness,
    reduce_variance,
    score_samples,
    write_scores_csv,
)

__all__ = [
    "ScoredSample",
    "SelectionResult",
    "UncertaintyEstimate",
    "combine_variance",
    "entropy_score",
    "entropy_scores",
    "estimates_from_passes",
    "mc_predict",
    "random_scores",
    "rank_by_informativeness",
    "reduce_variance",
    "score_samples",
    "write_scores_csv",
]
