# SPDX-License-Identifier: LGPL-3.0-or-later
# SPDX-FileNotice: Part of the cagan-active-learning project.

"""Active-learning loop, strategies and run persistence."""

from .controller import ActiveLearningController, LoopState, initial_pool_ids
from .loop_ports import AugmentResult, Augmenter, Evaluator, Scorer, Trainer
from .pipeline import run_al
from .records import AlRoundRecord, AlTrail
from .run_store import RunStore
from .stopping import admits, stopping_check
from .strategies import (
    BnnScorer,
    CaganAugmenter,
    EntropyScorer,
    FinetuneTrainer,
    PlainGanAugmenter,
    RandomScorer,
    StandardAugmenter,
    StoreEvaluator,
    build_strategy,
)

__all__ = [
    "ActiveLearningController",
    "AlRoundRecord",
    "AlTrail",
    "AugmentResult",
    "Augmenter",
    "BnnScorer",
    "CaganAugmenter",
    "EntropyScorer",
    "Evaluator",
    "FinetuneTrainer",
    "LoopState",
    "PlainGanAugmenter",
    "RandomScorer",
    "RunStore",
    "Scorer",
    "StandardAugmenter",
    "StoreEvaluator",
    "Trainer",
    "admits",
    "build_strategy",
    "initial_pool_ids",
    "run_al",
    "stopping_check",
]
