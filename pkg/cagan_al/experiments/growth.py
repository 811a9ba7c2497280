# SPDX-License-Identifier: LGPL-3.0-or-later
# SPDX-FileNotice: Part of the cagan-active-learning project.

"""Synthetic-only augmentation curve.

A small fixed real pool (``growth_initial_per_class`` images per class) is
grown by synthetic images only: each step generates class-transfer candidates
from the pool and adds ``growth_step_per_class`` of them per class, ranked by
informativeness or at random, then fine-tunes and tests. A classifier trained
on every real train label gives the horizontal reference line.
"""

from __future__ import annotations

from collections.abc import Sequence
import logging
from typing import Any, Literal

import numpy as np
from scipy import stats

from ..active_learning.strategies import BnnScorer, CaganAugmenter, FinetuneTrainer, RandomScorer
from ..cagan.training import CaganCheckpoint
from ..config import RunConfig
from ..data.sample_store import SampleStore
from ..domain.image_sample import ImageSample
from ..domain.manifest import Split
from ..errors import CapabilityError, ConfigurationError
from ..seeding import child_rng, child_seed
from ..segmenter.training import SegmenterCheckpoint
from .common import Generators, final_test_report, fit_fsl, provenance, resolve_seeds, run_jobs, sorted_train_samples
from .report import ConditionResult, ExperimentReport

logger = logging.getLogger(__name__)

GrowthMode = Literal["informative", "random"]
GROWTH_MODES: tuple[GrowthMode, ...] = ("informative", "random")
FSL_FULL = "fsl_full"


def _require_generators(generators: Generators) -> tuple[CaganCheckpoint, SegmenterCheckpoint]:
    if generators.cagan is None:
        raise CapabilityError("the growth curve needs a trained CAGAN checkpoint; run train-cagan first")
    if generators.segmenter is None:
        raise CapabilityError("the growth curve needs a trained segmenter; run train-seg first")
    return generators.cagan, generators.segmenter


def initial_real_pool(store: SampleStore, per_class: int, seed: int) -> list[str]:
    """Pick `per_class` train images per class (by primary class), seeded.

    Classes with fewer images contribute what they have; images without a
    finding are not used.
    """
    samples = sorted_train_samples(store)
    chosen: list[str] = []
    for target in range(store.num_classes):
        members = [s.id for s in samples if not s.is_normal and s.primary_class == target]
        order = child_rng(seed, "growth_pool", target).permutation(len(members))
        picked = [members[i] for i in order[:per_class]]
        if len(picked) < per_class:
            logger.warning(
                "class %s has only %d train images for the growth pool", store.class_names[target], len(picked)
            )
        chosen.extend(picked)
    return sorted(chosen)


def growth_condition(
    store: SampleStore,
    config: RunConfig,
    generators: Generators,
    *,
    mode: GrowthMode,
    seed: int,
    steps: int,
) -> list[ConditionResult]:
    """Run one curve: a baseline point plus one point per step."""
    experiment = config.experiment
    train_size = len(store.split_ids(Split.TRAIN))
    pool = sorted_train_samples(store, initial_real_pool(store, experiment.growth_initial_per_class, seed))
    model = fit_fsl(pool, config, num_classes=store.num_classes, seed=seed)

    def point(step: int, count: int) -> ConditionResult:
        report = final_test_report(model, store, f"growth/{mode}/seed{seed}/step{step}")
        logger.info("growth %s seed %d step %d: %d synthetic, test macro-AUC %s", mode, seed, step, count, report.macro)
        return ConditionResult(
            method=mode,
            x=float(step),
            seed=seed,
            report=report,
            x_count=count,
            x_share_train=count / train_size,
            x_share_initial=count / len(pool),
        )

    schedule = config.schedule.model_copy(
        update={
            "keep_per_class": experiment.growth_step_per_class,
            "gen_per_class": max(experiment.growth_step_per_class, config.schedule.gen_per_class),
        }
    )
    cagan, segmenter = _require_generators(generators)
    augmenter = CaganAugmenter(cagan, segmenter, schedule, config.segmenter)
    scorer = BnnScorer(config.uncertainty) if mode == "informative" else RandomScorer()
    trainer = FinetuneTrainer(config.classifier)
    synthetic: dict[str, ImageSample] = {}
    results = [point(0, 0)]
    for step in range(1, steps + 1):
        added = augmenter.augment(pool, model, scorer, seed=seed, round_index=step)
        synthetic.update((s.id, s) for s in added.kept)
        model = trainer.train(
            model, pool + list(synthetic.values()), round_index=step, seed=child_seed(seed, "growth", step)
        )
        results.append(point(step, len(synthetic)))
    return results


def fsl_full_condition(store: SampleStore, config: RunConfig, *, seed: int) -> list[ConditionResult]:
    """Fully supervised reference on every real train label."""
    samples = sorted_train_samples(store)
    model = fit_fsl(samples, config, num_classes=store.num_classes, seed=seed)
    report = final_test_report(model, store, f"growth/{FSL_FULL}/seed{seed}")
    return [ConditionResult(method=FSL_FULL, x=0.0, seed=seed, report=report, x_count=0)]


def _run(kind: str, **job: Any) -> list[ConditionResult]:
    if kind == FSL_FULL:
        return fsl_full_condition(job["store"], job["config"], seed=job["seed"])
    return growth_condition(**job)


def trend_spearman(medians: Sequence[float | None], window: int = 3) -> float | None:
    """Return Spearman's rho of the moving-average curve against the step index."""
    values = np.asarray([np.nan if m is None else m for m in medians], dtype=np.float64)
    if len(values) < window + 1 or np.isnan(values).any():
        return None
    smoothed = np.convolve(values, np.ones(window) / window, mode="valid")
    if np.ptp(smoothed) == 0.0:
        return None
    rho = stats.spearmanr(np.arange(len(smoothed)), smoothed).statistic
    return float(rho)


def synthetic_growth_curve(
    store: SampleStore,
    config: RunConfig,
    generators: Generators,
    *,
    modes: Sequence[GrowthMode] = GROWTH_MODES,
    seeds: Sequence[int] | None = None,
    steps: int | None = None,
) -> ExperimentReport:
    """Record test macro-AUC while synthetic images are added to a small real pool.

    Raises:
        CapabilityError: If the CAGAN or segmenter checkpoint is missing.
        ConfigurationError: For unknown modes or a negative step count.
    """
    _require_generators(generators)
    unknown = [m for m in modes if m not in GROWTH_MODES]
    if unknown:
        raise ConfigurationError("modes", f"unknown growth modes {unknown}")
    chosen_steps = config.experiment.growth_steps if steps is None else steps
    if chosen_steps < 0:
        raise ConfigurationError("experiment.growth_steps", "must be >= 0")
    chosen_seeds = resolve_seeds(config, seeds)

    jobs: list[dict[str, Any]] = [
        {
            "kind": "curve",
            "store": store,
            "config": config,
            "generators": generators,
            "mode": m,
            "seed": s,
            "steps": chosen_steps,
        }
        for m in modes
        for s in chosen_seeds
    ]
    jobs += [{"kind": FSL_FULL, "store": store, "config": config, "seed": s} for s in chosen_seeds]
    nested = run_jobs(_run, jobs, config.experiment.n_jobs)
    results = [r for group in nested for r in group]
    report = ExperimentReport(
        kind="synthetic_growth_curve", class_names=store.class_names, results=results, **provenance(config)
    )

    finals = {m: report.median_macro(m, float(chosen_steps)) for m in modes}
    summary: dict[str, Any] = {
        "steps": chosen_steps,
        "final_median": finals,
        "fsl_full_median": report.median_macro(FSL_FULL, 0.0),
    }
    if "informative" in modes:
        medians = [report.median_macro("informative", float(k)) for k in range(chosen_steps + 1)]
        summary["informative_trend_spearman"] = trend_spearman(medians)
    informative, random_final = finals.get("informative"), finals.get("random")
    if informative is not None and random_final is not None:
        summary["informative_beats_random"] = informative > random_final
    report.summary = summary
    return report
