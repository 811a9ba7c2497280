# SPDX-License-Identifier: LGPL-3.0-or-later
# SPDX-FileNotice: Part of the cagan-active-learning project.

"""Scorer, augmenter, trainer and evaluator adapters for the loop ports.

Strategies pair a scorer with an augmenter:

- ``cagan``: Monte-Carlo scoring, class-transfer generation from perturbed masks.
- ``standard_da``: Monte-Carlo scoring, rotation/translation/flip variants.
- ``plain_gan``: Monte-Carlo scoring, unconditioned GAN variants.
- ``no_bnn_entropy``: prediction-entropy scoring, class-transfer generation.
- ``random_select``: random scores for reals and candidates, class-transfer generation.
"""

from __future__ import annotations

from abc import ABC, abstractmethod
from collections import defaultdict
from collections.abc import Sequence
from dataclasses import dataclass
import logging
import math

from ..cagan.generation import generate_batch
from ..cagan.plain_gan import PlainGanCheckpoint, generate_plain
from ..cagan.training import CaganCheckpoint
from ..classifier.checkpoint import ClassifierCheckpoint
from ..classifier.evaluation import evaluate
from ..classifier.training import finetune, inverse_frequency_weights
from ..config import ClassifierConfig, RunConfig, ScheduleConfig, SegmenterConfig, StrategyName, UncertaintyConfig
from ..data.augment import augment_standard
from ..data.sample_store import SampleStore
from ..domain.auc_report import AucReport
from ..domain.image_sample import ImageSample
from ..domain.manifest import Split
from ..domain.mask_latent import MaskLatent
from ..errors import CapabilityError, DomainError
from ..seeding import child_seed
from ..segmenter.latent import latent_for_sample
from ..segmenter.mask_perturb import perturb_mask
from ..segmenter.training import SegmenterCheckpoint
from ..uncertainty.scoring import Scored, entropy_scores, random_scores, rank_by_informativeness, score_samples
from .loop_ports import AugmentResult, Augmenter, Scorer

logger = logging.getLogger(__name__)


@dataclass
class BnnScorer:
    """Monte-Carlo predictive-variance scores."""

    config: UncertaintyConfig

    def score(
        self, checkpoint: ClassifierCheckpoint, samples: Sequence[ImageSample], *, seed: int
    ) -> Sequence[Scored]:
        return score_samples(checkpoint, samples, self.config, seed=seed)


class EntropyScorer:
    """Entropy of the deterministic prediction."""

    def score(
        self, checkpoint: ClassifierCheckpoint, samples: Sequence[ImageSample], *, seed: int
    ) -> Sequence[Scored]:
        return entropy_scores(checkpoint, samples)


class RandomScorer:
    """Uniform random scores."""

    def score(
        self, checkpoint: ClassifierCheckpoint, samples: Sequence[ImageSample], *, seed: int
    ) -> Sequence[Scored]:
        return random_scores(samples, seed)


def _keep_top(scored: Sequence[Scored], keep: int, tie_seed: int) -> tuple[str, ...]:
    if not scored:
        return ()
    return rank_by_informativeness(scored, keep, tie_seed).ids


class CaganAugmenter:
    """Class-transfer generation: every picked image, under perturbed masks, into every class.

    For each class, `gen_per_class` candidates are built from (picked image,
    perturbed mask) pairs taken mask-index major, so every picked image
    contributes; the `keep_per_class` highest-scoring candidates per class are kept.
    """

    def __init__(
        self,
        cagan: CaganCheckpoint,
        segmenter: SegmenterCheckpoint,
        schedule: ScheduleConfig,
        segmenter_config: SegmenterConfig,
    ) -> None:
        self._cagan = cagan
        self._segmenter = segmenter
        self._schedule = schedule
        self._segmenter_config = segmenter_config

    def _mask_variants(
        self, picked: Sequence[ImageSample], per_image: int, seed: int
    ) -> list[tuple[ImageSample, list[MaskLatent]]]:
        usable = []
        for index, sample in enumerate(picked):
            parent = latent_for_sample(self._segmenter, sample)
            try:
                variants = perturb_mask(
                    parent,
                    self._segmenter_config.perturb_magnitude,
                    per_image,
                    child_seed(seed, "masks", index) % 1_000_000,
                    segmenter=self._segmenter,
                    control_points=self._segmenter_config.control_points,
                )
            except DomainError as exc:
                logger.warning("skipping %s for generation: %s", sample.id, exc)
                continue
            usable.append((sample, variants))
        return usable

    def augment(
        self,
        picked: Sequence[ImageSample],
        checkpoint: ClassifierCheckpoint,
        scorer: Scorer,
        *,
        seed: int,
        round_index: int,
    ) -> AugmentResult:
        schedule = self._schedule
        if not picked:
            return AugmentResult(kept=[], kept_per_class={}, candidates=0)
        per_image = min(math.ceil(schedule.gen_per_class / len(picked)), self._segmenter_config.max_perturbations)
        usable = self._mask_variants(picked, per_image, child_seed(seed, "round", round_index))
        pairs = [(sample, variants[k]) for k in range(per_image) for sample, variants in usable if k < len(variants)]
        pairs = pairs[: schedule.gen_per_class]
        if len(pairs) < schedule.gen_per_class:
            logger.warning("only %d candidates per class available (wanted %d)", len(pairs), schedule.gen_per_class)

        candidates: list[ImageSample] = []
        by_class: dict[int, list[int]] = defaultdict(list)
        for target in range(self._cagan.num_classes):
            generated = generate_batch(
                self._cagan, [p[0] for p in pairs], [p[1] for p in pairs], [target] * len(pairs)
            )
            by_class[target] = list(range(len(candidates), len(candidates) + len(generated)))
            candidates.extend(generated)

        scores = list(scorer.score(checkpoint, candidates, seed=child_seed(seed, "candidates", round_index)))
        kept_ids: dict[int, tuple[str, ...]] = {}
        for target, indices in by_class.items():
            kept_ids[target] = _keep_top(
                [scores[i] for i in indices], schedule.keep_per_class, child_seed(seed, "keep", round_index, target)
            )
        chosen = {sid for ids in kept_ids.values() for sid in ids}
        kept = [c for c in candidates if c.id in chosen]
        logger.info("round %d: kept %d of %d class-transfer candidates", round_index, len(kept), len(candidates))
        return AugmentResult(kept=kept, kept_per_class=kept_ids, candidates=len(candidates), scores=scores)


class _LabelPreservingAugmenter(ABC):
    """Shared selection of label-copying strategies: keep ``C * keep_per_class`` overall."""

    def __init__(self, schedule: ScheduleConfig, num_classes: int) -> None:
        self._schedule = schedule
        self._num_classes = num_classes

    @abstractmethod
    def _generate(self, picked: Sequence[ImageSample], per_sample: int, seed: int) -> list[ImageSample]:
        """Return at least `per_sample` label-copying variants of every picked sample."""

    def augment(
        self,
        picked: Sequence[ImageSample],
        checkpoint: ClassifierCheckpoint,
        scorer: Scorer,
        *,
        seed: int,
        round_index: int,
    ) -> AugmentResult:
        if not picked:
            return AugmentResult(kept=[], kept_per_class={}, candidates=0)
        schedule = self._schedule
        per_sample = max(1, math.ceil(self._num_classes * schedule.gen_per_class / len(picked)))
        candidates = self._generate(picked, per_sample, child_seed(seed, "round", round_index) % 1_000_000)
        scores = list(scorer.score(checkpoint, candidates, seed=child_seed(seed, "candidates", round_index)))
        keep = self._num_classes * schedule.keep_per_class
        chosen = set(_keep_top(scores, keep, child_seed(seed, "keep", round_index)))
        kept = [c for c in candidates if c.id in chosen]
        per_class: dict[int, list[str]] = defaultdict(list)
        for sample in kept:
            per_class[sample.primary_class if not sample.is_normal else -1].append(sample.id)
        return AugmentResult(
            kept=kept,
            kept_per_class={c: tuple(ids) for c, ids in per_class.items()},
            candidates=len(candidates),
            scores=scores,
        )


class StandardAugmenter(_LabelPreservingAugmenter):
    """Rotation, translation and horizontal-flip variants."""

    def _generate(self, picked: Sequence[ImageSample], per_sample: int, seed: int) -> list[ImageSample]:
        return augment_standard(picked, per_sample, seed)


class PlainGanAugmenter(_LabelPreservingAugmenter):
    """Unconditioned GAN variants that copy the base labels."""

    def __init__(self, plain_gan: PlainGanCheckpoint, schedule: ScheduleConfig, num_classes: int) -> None:
        super().__init__(schedule, num_classes)
        self._plain_gan = plain_gan

    def _generate(self, picked: Sequence[ImageSample], per_sample: int, seed: int) -> list[ImageSample]:
        return generate_plain(self._plain_gan, picked, per_sample, seed)


@dataclass
class FinetuneTrainer:
    """Initial-pool training at round 0, frozen fine-tuning afterwards."""

    config: ClassifierConfig

    def train(
        self, checkpoint: ClassifierCheckpoint, samples: Sequence[ImageSample], *, round_index: int, seed: int
    ) -> ClassifierCheckpoint:
        initial = round_index == 0
        return finetune(
            checkpoint,
            samples,
            epochs=self.config.initial_epochs if initial else self.config.epochs,
            seed=seed,
            freeze="none" if initial else self.config.freeze_after_round0,
            class_weights=inverse_frequency_weights(samples) if self.config.weighted_loss else None,
            round_index=round_index,
        )


@dataclass
class StoreEvaluator:
    """Validation AUC read through the store's access guard."""

    store: SampleStore
    split: Split = Split.VAL

    def validate(self, checkpoint: ClassifierCheckpoint) -> AucReport:
        return evaluate(checkpoint, self.store, self.split)


def build_strategy(
    strategy: StrategyName,
    config: RunConfig,
    *,
    num_classes: int,
    segmenter: SegmenterCheckpoint | None,
    cagan: CaganCheckpoint | None,
    plain_gan: PlainGanCheckpoint | None = None,
) -> tuple[Scorer, Augmenter]:
    """Return the scorer and augmenter of `strategy`.

    Raises:
        CapabilityError: If the strategy needs a checkpoint that was not supplied.
    """
    if strategy == "standard_da":
        return BnnScorer(config.uncertainty), StandardAugmenter(config.schedule, num_classes)
    if strategy == "plain_gan":
        if plain_gan is None:
            raise CapabilityError("strategy plain_gan needs a trained plain GAN; run train-cagan first")
        return BnnScorer(config.uncertainty), PlainGanAugmenter(plain_gan, config.schedule, num_classes)
    if cagan is None:
        raise CapabilityError(f"strategy {strategy} needs a trained CAGAN checkpoint; run train-cagan first")
    if segmenter is None:
        raise CapabilityError(f"strategy {strategy} needs a trained segmenter; run train-seg first")
    segmenter.require_usable()
    augmenter = CaganAugmenter(cagan, segmenter, config.schedule, config.segmenter)
    scorer: Scorer
    if strategy == "no_bnn_entropy":
        scorer = EntropyScorer()
    elif strategy == "random_select":
        scorer = RandomScorer()
    else:
        scorer = BnnScorer(config.uncertainty)
    return scorer, augmenter
