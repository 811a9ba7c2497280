# SPDX-License-Identifier: LGPL-3.0-or-later
# SPDX-FileNotice: Part of the cagan-active-learning project.

"""Protocols the active-learning controller is driven through.

The controller owns pool bookkeeping, stopping and persistence; training,
validation, scoring and augmentation are delegated to these ports so strategies
and test doubles plug in without touching the loop.
"""

from __future__ import annotations

from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field
from typing import Protocol

from ..classifier.checkpoint import ClassifierCheckpoint
from ..domain.auc_report import AucReport
from ..domain.image_sample import ImageSample
from ..uncertainty.scoring import Scored


@dataclass(frozen=True)
class AugmentResult:
    """Synthetic samples kept in one round.

    Attributes:
        kept: Samples added to the synthetic pool.
        kept_per_class: Kept ids keyed by target class index (label-preserving
            strategies key by the primary class of the base sample).
        candidates: Number of candidates generated before selection.
        scores: Candidate scores, for ``scores.csv``.
    """

    kept: list[ImageSample]
    kept_per_class: Mapping[int, tuple[str, ...]]
    candidates: int
    scores: Sequence[Scored] = field(default_factory=tuple)


class Trainer(Protocol):
    """Fine-tunes a classifier on a labeled pool."""

    def train(
        self, checkpoint: ClassifierCheckpoint, samples: Sequence[ImageSample], *, round_index: int, seed: int
    ) -> ClassifierCheckpoint:
        """Return a trained copy; `round_index` 0 is the initial-pool training."""


class Evaluator(Protocol):
    """Measures validation macro-AUC."""

    def validate(self, checkpoint: ClassifierCheckpoint) -> AucReport:
        """Return the validation AUC report (its macro may be None when undefined)."""


class Scorer(Protocol):
    """Assigns informativeness scores."""

    def score(
        self, checkpoint: ClassifierCheckpoint, samples: Sequence[ImageSample], *, seed: int
    ) -> Sequence[Scored]:
        """Return one score per sample, in input order."""


class Augmenter(Protocol):
    """Produces synthetic samples from the reals picked in a round."""

    def augment(
        self,
        picked: Sequence[ImageSample],
        checkpoint: ClassifierCheckpoint,
        scorer: Scorer,
        *,
        seed: int,
        round_index: int,
    ) -> AugmentResult:
        """Generate candidates from `picked`, score them with `scorer` and keep the selection."""
