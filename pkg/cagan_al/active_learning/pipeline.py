# SPDX-License-Identifier: LGPL-3.0-or-later
# SPDX-FileNotice: Part of the cagan-active-learning project.

"""`run_al`: wire a strategy into the controller and run it."""

from __future__ import annotations

import logging

from ..cagan.plain_gan import PlainGanCheckpoint
from ..cagan.training import CaganCheckpoint
from ..classifier.checkpoint import ClassifierCheckpoint
from ..config import RunConfig, StrategyName
from ..data.sample_store import SampleStore
from ..segmenter.training import SegmenterCheckpoint
from .controller import ActiveLearningController, RoundCallback
from .loop_ports import Evaluator, Trainer
from .records import AlTrail
from .run_store import RunStore
from .strategies import FinetuneTrainer, StoreEvaluator, build_strategy

logger = logging.getLogger(__name__)


def run_al(
    store: SampleStore,
    segmenter: SegmenterCheckpoint | None,
    cagan: CaganCheckpoint | None,
    classifier: ClassifierCheckpoint,
    config: RunConfig,
    *,
    strategy: StrategyName | None = None,
    seed: int | None = None,
    plain_gan: PlainGanCheckpoint | None = None,
    run_store: RunStore | None = None,
    resume: bool = False,
    callback: RoundCallback | None = None,
    trainer: Trainer | None = None,
    evaluator: Evaluator | None = None,
) -> tuple[ClassifierCheckpoint, AlTrail]:
    """Run active learning with the configured (or given) strategy.

    Args:
        store: Samples and splits; the test split stays closed throughout.
        segmenter: Trained segmenter (mask latents for class transfer).
        cagan: Trained class-aware GAN; required by the mask-conditioned strategies.
        classifier: Starting classifier; an untrained one is first fit on the initial pool.
        config: Resolved run configuration.
        strategy: Overrides ``config.schedule.strategy``.
        seed: Overrides ``config.seed``.
        plain_gan: Trained baseline GAN for the ``plain_gan`` strategy.
        run_store: Persist every round here when given.
        resume: Continue from the last completed round in `run_store`.
        callback: Called with each round record and the round's classifier.
        trainer: Replaces the default fine-tuning trainer.
        evaluator: Replaces the default validation evaluator.

    Raises:
        CapabilityError: If the strategy's generator checkpoint is missing.
        ScheduleError: If the unlabeled pool is empty before round 1.
        SplitError: If a patient spans two splits.
    """
    chosen = strategy or config.schedule.strategy
    run_seed = config.seed if seed is None else seed
    store.check_patient_disjoint()
    scorer, augmenter = build_strategy(
        chosen,
        config,
        num_classes=store.num_classes,
        segmenter=segmenter,
        cagan=cagan,
        plain_gan=plain_gan,
    )
    logger.info("running active learning: strategy %s, seed %d", chosen, run_seed)
    controller = ActiveLearningController(
        store,
        config.schedule,
        trainer=trainer or FinetuneTrainer(config.classifier),
        evaluator=evaluator or StoreEvaluator(store),
        scorer=scorer,
        augmenter=augmenter,
        seed=run_seed,
        run_store=run_store,
        callback=callback,
    )
    return controller.run(classifier, resume=resume)
