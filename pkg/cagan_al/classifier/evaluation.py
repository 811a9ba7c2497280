# SPDX-License-Identifier: LGPL-3.0-or-later
# SPDX-FileNotice: Part of the cagan-active-learning project.

"""Prediction, rank-based AUC and per-split evaluation.

AUC is the Mann-Whitney statistic computed from midranks, which equals the
pairwise probability ``P(s+ > s-) + 0.5 * P(s+ = s-)``.
"""

from __future__ import annotations

from collections.abc import Mapping, Sequence
import csv
import json
import logging
from pathlib import Path

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy import stats
import torch

from ..data.sample_store import SampleStore
from ..domain.auc_report import AucReport
from ..domain.image_sample import ImageSample, stack_labels, stack_pixels
from ..domain.manifest import Split
from ..errors import DomainError, ShapeError
from .checkpoint import ClassifierCheckpoint

logger = logging.getLogger(__name__)

PREDICT_BATCH = 256


def predict_proba(checkpoint: ClassifierCheckpoint, samples: Sequence[ImageSample]) -> NDArray[np.float64]:
    """Return an (N, C) probability matrix with stochastic masking off.

    Exclusive mode applies a softmax (rows sum to 1); multilabel mode an
    element-wise sigmoid.

    Raises:
        ShapeError: If image sides differ from the classifier's.
    """
    if not samples:
        return np.zeros((0, checkpoint.num_classes), dtype=np.float64)
    pixels = stack_pixels(list(samples))
    if pixels.shape[-1] != checkpoint.side:
        raise ShapeError(f"image side {pixels.shape[-1]} != classifier side {checkpoint.side}")
    backbone = checkpoint.backbone
    backbone.eval()
    backbone.set_mc_active(False)
    chunks = []
    with torch.no_grad():
        for start in range(0, len(pixels), PREDICT_BATCH):
            logits = backbone(torch.from_numpy(pixels[start : start + PREDICT_BATCH])).logits.double()
            if checkpoint.label_mode == "exclusive":
                chunks.append(torch.softmax(logits, dim=1).numpy())
            else:
                chunks.append(torch.sigmoid(logits).numpy())
    return np.concatenate(chunks)


def auc(scores: ArrayLike, labels: ArrayLike) -> float | None:
    """Return the rank-based AUC, or None without both a positive and a negative.

    Raises:
        ShapeError: If `scores` and `labels` differ in length.
    """
    s = np.asarray(scores, dtype=np.float64).ravel()
    y = np.asarray(labels).ravel().astype(bool)
    if s.shape != y.shape:
        raise ShapeError(f"scores ({s.size}) and labels ({y.size}) differ in length")
    n_pos = int(y.sum())
    n_neg = int(y.size - n_pos)
    if n_pos == 0 or n_neg == 0:
        return None
    ranks = stats.rankdata(s, method="average")
    u = float(ranks[y].sum()) - n_pos * (n_pos + 1) / 2.0
    return u / (n_pos * n_neg)


def auc_report(
    probabilities: NDArray[np.float64],
    labels: NDArray[np.float32],
    class_names: tuple[str, ...],
    *,
    split: str,
    model_tag: str = "",
) -> AucReport:
    """Return one-vs-rest AUCs; classes with < 2 positives or < 2 negatives are undefined."""
    if probabilities.shape != labels.shape:
        raise ShapeError(f"probabilities {probabilities.shape} do not match labels {labels.shape}")
    per_class: list[float | None] = []
    positives: list[int] = []
    negatives: list[int] = []
    for c in range(labels.shape[1]):
        column = labels[:, c] > 0
        pos = int(column.sum())
        neg = int(column.size - pos)
        positives.append(pos)
        negatives.append(neg)
        per_class.append(auc(probabilities[:, c], column) if pos >= 2 and neg >= 2 else None)
    return AucReport(
        class_names=class_names,
        per_class=tuple(per_class),
        positives=tuple(positives),
        negatives=tuple(negatives),
        split=split,
        model_tag=model_tag,
    )


def evaluate_samples(
    checkpoint: ClassifierCheckpoint,
    samples: Sequence[ImageSample],
    class_names: tuple[str, ...],
    *,
    split: str,
    model_tag: str = "",
) -> AucReport:
    """Evaluate on an explicit sample list.

    Raises:
        DomainError: If `samples` is empty.
    """
    if not samples:
        raise DomainError(f"split {split} is empty")
    probabilities = predict_proba(checkpoint, samples)
    report = auc_report(probabilities, stack_labels(list(samples)), class_names, split=split, model_tag=model_tag)
    if report.undefined_classes:
        logger.info("AUC undefined on %s for %s", split, ", ".join(report.undefined_classes))
    return report


def evaluate(
    checkpoint: ClassifierCheckpoint, store: SampleStore, split: Split, *, model_tag: str | None = None
) -> AucReport:
    """Evaluate on a split of `store`, through its access guard.

    Raises:
        SplitAccessError: If the guard refuses the read.
        DomainError: If the split is empty.
    """
    samples = store.split_samples(split, model_tag=model_tag)
    return evaluate_samples(checkpoint, samples, store.class_names, split=split.value, model_tag=model_tag or "")


def write_auc_json(report: AucReport, path: Path) -> None:
    """Write one report as JSON."""
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(report.to_json(), indent=2, sort_keys=True), encoding="utf-8")


def read_auc_json(path: Path) -> AucReport:
    """Read a report written by `write_auc_json`."""
    return AucReport.from_json(json.loads(path.read_text(encoding="utf-8")))


def write_auc_table(reports: Mapping[str, AucReport], path: Path) -> None:
    """Write a class-by-column table (one column per method or round) plus a macro row."""
    if not reports:
        raise DomainError("write_auc_table needs at least one report")
    columns = list(reports)
    class_names = reports[columns[0]].class_names
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["class", *columns])
        for index, name in enumerate(class_names):
            writer.writerow([name, *(reports[col].cell(index) for col in columns)])
        writer.writerow(["macro", *(reports[col].macro_cell() for col in columns)])
