# SPDX-License-Identifier: LGPL-3.0-or-later
# SPDX-FileNotice: Part of the cagan-active-learning project.

"""Helpers shared by the experiments: fully supervised fits, test reads, job fan-out."""

from __future__ import annotations

from collections.abc import Callable, Iterable, Mapping, Sequence
from dataclasses import dataclass
import logging
from typing import Any, TypeVar

from joblib import Parallel, delayed

from ..active_learning.strategies import FinetuneTrainer
from ..cagan.plain_gan import PlainGanCheckpoint
from ..cagan.training import CaganCheckpoint
from ..classifier.checkpoint import ClassifierCheckpoint, new_classifier
from ..classifier.evaluation import evaluate
from ..config import RunConfig, config_hash
from ..data.sample_store import SampleStore
from ..domain.auc_report import AucReport
from ..domain.image_sample import ImageSample
from ..domain.manifest import Split
from ..errors import ConfigurationError
from ..seeding import child_seed
from ..segmenter.training import SegmenterCheckpoint
from ..version import get_version

logger = logging.getLogger(__name__)

T = TypeVar("T")


@dataclass(frozen=True)
class Generators:
    """Trained generative checkpoints an experiment may need."""

    segmenter: SegmenterCheckpoint | None = None
    cagan: CaganCheckpoint | None = None
    plain_gan: PlainGanCheckpoint | None = None


def fresh_classifier(config: RunConfig, num_classes: int, seed: int) -> ClassifierCheckpoint:
    """Return an untrained classifier for `config`."""
    return new_classifier(
        config.classifier,
        side=config.data.side,
        num_classes=num_classes,
        label_mode=config.data.label_mode,
        masking_rate=config.uncertainty.masking_rate,
        seed=seed,
    )


def fit_fsl(samples: Sequence[ImageSample], config: RunConfig, *, num_classes: int, seed: int) -> ClassifierCheckpoint:
    """Train a fresh classifier on a fixed labeled set, as the loop trains its initial pool."""
    trainer = FinetuneTrainer(config.classifier)
    return trainer.train(
        fresh_classifier(config, num_classes, seed), samples, round_index=0, seed=child_seed(seed, "train", 0)
    )


def sorted_train_samples(store: SampleStore, ids: Iterable[str] | None = None) -> list[ImageSample]:
    """Return train samples in id order (all of them when `ids` is None)."""
    chosen = store.split_ids(Split.TRAIN) if ids is None else list(ids)
    return store.get(sorted(chosen))


def final_test_report(checkpoint: ClassifierCheckpoint, store: SampleStore, model_tag: str) -> AucReport:
    """Evaluate on the test split through the guard, then close it again.

    Raises:
        SplitAccessError: If `model_tag` already read the test split.
    """
    store.guard.enter_final()
    try:
        return evaluate(checkpoint, store, Split.TEST, model_tag=model_tag)
    finally:
        store.guard.enter_tuning()


def resolve_seeds(config: RunConfig, seeds: Sequence[int] | None) -> list[int]:
    """Return the experiment seeds.

    Raises:
        ConfigurationError: For an empty seed list.
    """
    chosen = list(config.experiment.seeds if seeds is None else seeds)
    if not chosen:
        raise ConfigurationError("experiment.seeds", "at least one seed is required")
    return chosen


def run_jobs(function: Callable[..., T], jobs: Sequence[Mapping[str, Any]], n_jobs: int) -> list[T]:
    """Run ``function(**job)`` for every job; results come back in job order."""
    logger.info("running %d jobs on %d workers", len(jobs), n_jobs)
    results: list[T] = Parallel(n_jobs=n_jobs)(delayed(function)(**job) for job in jobs)
    return results


def provenance(config: RunConfig) -> dict[str, str]:
    """Return the config hash and code version embedded in every report."""
    return {"config_hash": config_hash(config), "version": get_version()}
