"""Unit tests for the scorer, augmenter and trainer adapters."""

from __future__ import annotations

from collections.abc import Sequence

import pytest
import torch

from cagan_al.active_learning.strategies import (
    BnnScorer,
    CaganAugmenter,
    EntropyScorer,
    FinetuneTrainer,
    RandomScorer,
    StandardAugmenter,
    StoreEvaluator,
    _LabelPreservingAugmenter,
    build_strategy,
)
from cagan_al.cagan.losses import LossWeights
from cagan_al.cagan.training import train_cagan
from cagan_al.classifier.checkpoint import ClassifierCheckpoint, new_classifier
from cagan_al.config import ClassifierConfig, RunConfig, ScheduleConfig
from cagan_al.data.sample_store import SampleStore
from cagan_al.domain.image_sample import ImageSample, Provenance
from cagan_al.domain.manifest import Split
from cagan_al.errors import CapabilityError
from cagan_al.segmenter.training import train_segmenter
from cagan_al.uncertainty.scoring import ScoredSample


class IndexScorer:
    """Scores candidates by their position so the first ones win."""

    def score(
        self, checkpoint: ClassifierCheckpoint, samples: Sequence[ImageSample], *, seed: int
    ) -> Sequence[ScoredSample]:
        return [ScoredSample(s.id, float(len(samples) - i)) for i, s in enumerate(samples)]


def _classifier(num_classes: int = 2) -> ClassifierCheckpoint:
    config = ClassifierConfig(widths=(4, 4, 8, 8), epochs=1, initial_epochs=1, batch=4, heteroscedastic_samples=2)
    return new_classifier(config, side=32, num_classes=num_classes, label_mode="multilabel", masking_rate=0.2, seed=0)


def test_build_strategy_pairs_scorers_with_augmenters(tiny_config: RunConfig) -> None:
    """standard_da needs no generator and scores with Monte-Carlo variance."""
    scorer, augmenter = build_strategy("standard_da", tiny_config, num_classes=3, segmenter=None, cagan=None)
    assert isinstance(scorer, BnnScorer)
    assert isinstance(augmenter, StandardAugmenter)


def test_build_strategy_requires_checkpoints(tiny_config: RunConfig) -> None:
    """Generator-backed strategies refuse to start without their checkpoints."""
    for strategy in ("cagan", "no_bnn_entropy", "random_select", "plain_gan"):
        with pytest.raises(CapabilityError):
            build_strategy(strategy, tiny_config, num_classes=3, segmenter=None, cagan=None)


def test_build_strategy_refuses_untrained_segmenter(sample_factory, tiny_config: RunConfig) -> None:
    """A segmenter trained for zero epochs cannot drive mask perturbation."""
    pool = [sample_factory(f"r{i}", (i % 2, 1 - i % 2), seed=i) for i in range(4)]
    untrained = train_segmenter(pool, tiny_config.segmenter.model_copy(update={"epochs": 0}), seed=0)
    cagan = train_cagan(pool, untrained, tiny_config.cagan, LossWeights.from_config(tiny_config.cagan), seed=0)
    with pytest.raises(CapabilityError):
        build_strategy("cagan", tiny_config, num_classes=2, segmenter=untrained, cagan=cagan)


def test_cagan_strategy_variants(sample_factory, tiny_config: RunConfig) -> None:
    """Entropy and random selection reuse class-transfer generation."""
    pool = [sample_factory(f"r{i}", (i % 2, 1 - i % 2), seed=i) for i in range(4)]
    segmenter = train_segmenter(pool, tiny_config.segmenter, seed=0)
    cagan = train_cagan(pool, segmenter, tiny_config.cagan, LossWeights.from_config(tiny_config.cagan), seed=0)
    expected = {"cagan": BnnScorer, "no_bnn_entropy": EntropyScorer, "random_select": RandomScorer}
    for strategy, scorer_type in expected.items():
        scorer, augmenter = build_strategy(strategy, tiny_config, num_classes=2, segmenter=segmenter, cagan=cagan)
        assert isinstance(scorer, scorer_type)
        assert isinstance(augmenter, CaganAugmenter)


def test_cagan_augmenter_keeps_top_candidates_per_class(sample_factory, tiny_config: RunConfig) -> None:
    """Each class receives keep_per_class twins, one-hot on that class."""
    pool = [sample_factory(f"r{i}", (i % 2, 1 - i % 2), seed=i) for i in range(6)]
    segmenter = train_segmenter(pool, tiny_config.segmenter, seed=0)
    cagan = train_cagan(pool, segmenter, tiny_config.cagan, LossWeights.from_config(tiny_config.cagan), seed=0)
    schedule = ScheduleConfig(initial_pool_fraction=0.25, top_k_real=2, gen_per_class=2, keep_per_class=1)
    augmenter = CaganAugmenter(cagan, segmenter, schedule, tiny_config.segmenter)

    result = augmenter.augment(pool[:2], _classifier(), IndexScorer(), seed=0, round_index=1)
    assert result.candidates == 4
    assert sorted(result.kept_per_class) == [0, 1]
    assert all(len(ids) == 1 for ids in result.kept_per_class.values())
    for target, (sid,) in result.kept_per_class.items():
        twin = next(s for s in result.kept if s.id == sid)
        assert twin.labels == tuple(int(c == target) for c in range(2))
        assert twin.provenance is Provenance.SYNTHETIC
        assert twin.base_id in {"r0", "r1"}


def test_augmenters_return_nothing_for_an_empty_pick() -> None:
    """No picked samples means no candidates."""
    schedule = ScheduleConfig(initial_pool_fraction=0.25, top_k_real=2, gen_per_class=2, keep_per_class=1)
    result = StandardAugmenter(schedule, 2).augment([], _classifier(), IndexScorer(), seed=0, round_index=1)
    assert result.kept == []
    assert result.candidates == 0


def test_standard_augmenter_keeps_classes_times_keep(sample_factory) -> None:
    """Label-copying strategies keep C * keep_per_class variants overall."""
    schedule = ScheduleConfig(initial_pool_fraction=0.25, top_k_real=2, gen_per_class=2, keep_per_class=1)
    picked = [sample_factory("a", (1, 0)), sample_factory("b", (0, 1), seed=1)]
    result = StandardAugmenter(schedule, 2).augment(picked, _classifier(), IndexScorer(), seed=0, round_index=1)
    assert result.candidates == 4
    assert len(result.kept) == 2
    assert all(s.base_id in {"a", "b"} for s in result.kept)
    assert all(s.labels == (1, 0) if s.base_id == "a" else s.labels == (0, 1) for s in result.kept)


def test_label_preserving_augmenter_needs_a_generator(sample_factory) -> None:
    """The shared base cannot be built alone; a subclass only supplies the variants."""

    class CopyAugmenter(_LabelPreservingAugmenter):
        def _generate(self, picked: Sequence[ImageSample], per_sample: int, seed: int) -> list[ImageSample]:
            return [
                sample_factory(f"{p.id}~c{i}", p.labels, provenance=Provenance.SYNTHETIC, base_id=p.id)
                for p in picked
                for i in range(per_sample)
            ]

    schedule = ScheduleConfig(initial_pool_fraction=0.25, top_k_real=2, gen_per_class=2, keep_per_class=1)
    with pytest.raises(TypeError):
        _LabelPreservingAugmenter(schedule, 2)  # type: ignore[abstract]
    picked = [sample_factory("a", (1, 0))]
    result = CopyAugmenter(schedule, 2).augment(picked, _classifier(), IndexScorer(), seed=0, round_index=1)
    assert result.candidates == 4
    assert [s.id for s in result.kept] == ["a~c0", "a~c1"]


def test_finetune_trainer_freezes_after_the_initial_round(sample_factory) -> None:
    """Round 0 trains every layer; later rounds keep early blocks fixed."""
    samples = [sample_factory(f"x{i}", (i % 2, 1 - i % 2), seed=i) for i in range(4)]
    start = _classifier()
    trainer = FinetuneTrainer(start.config)

    initial = trainer.train(start, samples, round_index=0, seed=0)
    assert initial.round_index == 0
    before, after = start.backbone.state_dict(), initial.backbone.state_dict()
    assert not torch.equal(after["blocks.0.weight"], before["blocks.0.weight"])

    later = trainer.train(initial, samples, round_index=1, seed=0)
    assert later.round_index == 1
    assert torch.equal(later.backbone.state_dict()["blocks.0.weight"], initial.backbone.state_dict()["blocks.0.weight"])
    assert not torch.equal(later.backbone.state_dict()["head.weight"], initial.backbone.state_dict()["head.weight"])


def test_store_evaluator_reads_validation(sample_factory) -> None:
    """Validation AUC comes from the val split only."""
    samples = [sample_factory(f"v{i}", (i % 2, 1 - i % 2), seed=i) for i in range(4)]
    store = SampleStore(samples, {s.id: Split.VAL for s in samples}, ("a", "b"))
    report = StoreEvaluator(store).validate(_classifier())
    assert report.split == "val"
    assert report.positives == (2, 2)
