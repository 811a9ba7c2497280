# SPDX-License-Identifier: LGPL-3.0-or-later
# SPDX-FileNotice: Part of the cagan-active-learning project.

"""Real/Syn/Mix plausibility matrix.

A synthetic "twin" corpus holds one same-class image per real image, generated
from a perturbed version of its mask. Twins follow their base patient's fold,
so Real, Syn and Mix variants of every fold share patients exactly. A Mix fold
swaps a seeded random `mix_fraction` of the real images for their twins.

Each (train source, seed) model is tested once on the Real, Syn and Mix test
folds; each source keeps its own access guard, so every guard sees one read
per model. Real-Real is the fully supervised baseline on all real labels.
"""

from __future__ import annotations

from collections.abc import Mapping, Sequence
import logging
from typing import Any

from ..cagan.generation import generate_batch
from ..cagan.training import CaganCheckpoint
from ..config import RunConfig
from ..data.sample_store import SampleStore
from ..domain.image_sample import ImageSample, Provenance
from ..domain.manifest import Split
from ..domain.mask_latent import MaskLatent
from ..errors import CapabilityError, DomainError, LeakageError
from ..seeding import child_rng, child_seed
from ..segmenter.latent import latent_for_sample
from ..segmenter.mask_perturb import perturb_mask
from ..segmenter.training import SegmenterCheckpoint
from .common import final_test_report, fit_fsl, provenance, resolve_seeds, run_jobs, sorted_train_samples
from .report import ConditionResult, ExperimentReport, median_iqr

logger = logging.getLogger(__name__)

SOURCES = ("Real", "Syn", "Mix")
MATRIX_FILE = "matrix.csv"


def build_twin_corpus(
    real: Sequence[ImageSample],
    cagan: CaganCheckpoint | None,
    segmenter: SegmenterCheckpoint | None,
    config: RunConfig,
    *,
    seed: int,
) -> list[ImageSample]:
    """Generate one same-class twin per real image from a perturbed copy of its mask.

    Images without a finding, or whose mask cannot be perturbed, get no twin.

    Raises:
        CapabilityError: If either checkpoint is missing.
    """
    if cagan is None or segmenter is None:
        raise CapabilityError("the twin corpus needs trained segmenter and CAGAN checkpoints")
    bases: list[ImageSample] = []
    latents: list[MaskLatent] = []
    skipped = 0
    for index, sample in enumerate(real):
        if sample.is_normal:
            skipped += 1
            continue
        parent = latent_for_sample(segmenter, sample)
        try:
            (variant,) = perturb_mask(
                parent,
                config.segmenter.perturb_magnitude,
                1,
                child_seed(seed, "twin", index) % 1_000_000,
                segmenter=segmenter,
                control_points=config.segmenter.control_points,
            )
        except DomainError as exc:
            logger.warning("no twin for %s: %s", sample.id, exc)
            skipped += 1
            continue
        bases.append(sample)
        latents.append(variant)
    twins = generate_batch(cagan, bases, latents, [b.primary_class for b in bases])
    logger.info("twin corpus: %d twins, %d reals without one", len(twins), skipped)
    return twins


def twin_assignment(synthetic: Sequence[ImageSample], real_assignment: Mapping[str, Split]) -> dict[str, Split]:
    """Place every synthetic sample in the fold of its base image."""
    assignment = {}
    for sample in synthetic:
        split = real_assignment.get(sample.base_id or "")
        if split is not None:
            assignment[sample.id] = split
    return assignment


def check_lineage(
    real: Sequence[ImageSample],
    synthetic: Sequence[ImageSample],
    real_assignment: Mapping[str, Split],
    synthetic_assignment: Mapping[str, Split],
) -> None:
    """Verify that no patient reaches two folds through real or synthetic images.

    Raises:
        LeakageError: For a synthetic image without a known base, in a fold other
            than its base's, or whose patient differs from the base's, and for a
            patient whose images span folds.
    """
    by_id = {s.id: s for s in real}
    patient_fold: dict[str, Split] = {}

    def claim(patient: str, split: Split, sample_id: str) -> None:
        previous = patient_fold.setdefault(patient, split)
        if previous != split:
            raise LeakageError(f"patient {patient} reaches {previous.value} and {split.value} (via {sample_id})")

    for sample in real:
        split = real_assignment.get(sample.id)
        if split is not None:
            claim(sample.patient_id, split, sample.id)
    for sample in synthetic:
        base = by_id.get(sample.base_id or "")
        if base is None:
            raise LeakageError(f"synthetic {sample.id} has no base among the real images")
        if sample.patient_id != base.patient_id:
            raise LeakageError(f"synthetic {sample.id} carries patient {sample.patient_id}, base has {base.patient_id}")
        split = synthetic_assignment.get(sample.id)
        if split is None:
            continue
        if split != real_assignment.get(base.id):
            raise LeakageError(f"synthetic {sample.id} sits in {split.value}, its base does not")
        claim(sample.patient_id, split, sample.id)


def mix_samples(
    real: Sequence[ImageSample], synthetic: Sequence[ImageSample], fraction: float, seed: int
) -> list[ImageSample]:
    """Swap a random `fraction` of the reals that have a twin for that twin."""
    twins = {s.base_id: s for s in synthetic}
    rng = child_rng(seed, "mix")
    mixed = []
    for sample in real:
        twin = twins.get(sample.id)
        mixed.append(twin if twin is not None and rng.random() < fraction else sample)
    return mixed


def _source_stores(
    real: Sequence[ImageSample],
    synthetic: Sequence[ImageSample],
    assignment: Mapping[str, Split],
    class_names: tuple[str, ...],
    fraction: float,
    seed: int,
) -> dict[str, SampleStore]:
    mixed = mix_samples(real, synthetic, fraction, seed)
    return {
        "Real": SampleStore(real, assignment, class_names),
        "Syn": SampleStore(synthetic, assignment, class_names),
        "Mix": SampleStore(mixed, assignment, class_names),
    }


def matrix_condition(
    real: Sequence[ImageSample],
    synthetic: Sequence[ImageSample],
    assignment: Mapping[str, Split],
    class_names: tuple[str, ...],
    config: RunConfig,
    *,
    train_source: str,
    seed: int,
) -> list[ConditionResult]:
    """Train on one source and test on all three."""
    stores = _source_stores(real, synthetic, assignment, class_names, config.experiment.mix_fraction, seed)
    train = sorted_train_samples(stores[train_source])
    model = fit_fsl(train, config, num_classes=len(class_names), seed=seed)
    results = []
    for test_source, store in stores.items():
        name = f"{train_source}-{test_source}"
        report = final_test_report(model, store, f"matrix/{train_source}/seed{seed}")
        logger.info("%s seed %d: test macro-AUC %s", name, seed, report.macro)
        results.append(ConditionResult(method=name, x=0.0, seed=seed, report=report, x_count=len(train)))
    return results


def _gap(results: Sequence[ConditionResult], first: str, second: str) -> dict[str, float | None]:
    by_seed: dict[int, dict[str, float | None]] = {}
    for r in results:
        by_seed.setdefault(r.seed, {})[r.method] = r.macro
    gaps: list[float | None] = []
    for cells in by_seed.values():
        a, b = cells.get(first), cells.get(second)
        gaps.append(None if a is None or b is None else abs(a - b))
    median, q1, q3 = median_iqr(gaps)
    return {"median": median, "q1": q1, "q3": q3}


def _matrix_rows(report: ExperimentReport) -> list[list[str]]:
    rows = [["train\\test", *SOURCES]]
    for train_source in SOURCES:
        row = [train_source]
        for test_source in SOURCES:
            aggregate = next(a for a in report.aggregate() if a.method == f"{train_source}-{test_source}")
            if aggregate.median is None:
                row.append("undef")
            else:
                row.append(f"{aggregate.median:.4f} [{aggregate.q1:.4f}, {aggregate.q3:.4f}]")
        rows.append(row)
    return rows


def real_syn_mix_matrix(
    real: Sequence[ImageSample],
    synthetic: Sequence[ImageSample],
    real_assignment: Mapping[str, Split],
    class_names: tuple[str, ...],
    config: RunConfig,
    *,
    synthetic_assignment: Mapping[str, Split] | None = None,
    seeds: Sequence[int] | None = None,
) -> ExperimentReport:
    """Train and test over every {Real, Syn, Mix} combination.

    Args:
        real: Real images of every fold.
        synthetic: Twins with ``base_id`` set; see `build_twin_corpus`.
        real_assignment: Fold of every real image.
        class_names: Class order.
        config: Resolved configuration; ``experiment.mix_fraction`` sets the Mix share.
        synthetic_assignment: Folds of a persisted synthetic manifest; derived from
            the bases when omitted.
        seeds: Overrides ``experiment.seeds``.

    Raises:
        LeakageError: If a patient reaches two folds through real or synthetic images.
    """
    chosen_seeds = resolve_seeds(config, seeds)
    derived = twin_assignment(synthetic, real_assignment)
    check_lineage(real, synthetic, real_assignment, synthetic_assignment or derived)
    assignment = {**real_assignment, **derived}

    jobs = [
        {
            "real": real,
            "synthetic": synthetic,
            "assignment": assignment,
            "class_names": class_names,
            "config": config,
            "train_source": source,
            "seed": seed,
        }
        for source in SOURCES
        for seed in chosen_seeds
    ]
    nested = run_jobs(matrix_condition, jobs, config.experiment.n_jobs)
    results = [r for group in nested for r in group]
    report = ExperimentReport(
        kind="real_syn_mix_matrix",
        class_names=class_names,
        results=results,
        axis_in_columns=False,
        **provenance(config),
    )
    summary: dict[str, Any] = {
        "real_vs_syn_gap": _gap(results, "Real-Real", "Syn-Real"),
        "real_vs_mix_gap": _gap(results, "Real-Real", "Mix-Mix"),
        "baseline": "Real-Real",
        "twins": len(synthetic),
    }
    report.summary = summary
    report.tables[MATRIX_FILE] = _matrix_rows(report)
    return report
