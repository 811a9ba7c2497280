# SPDX-License-Identifier: LGPL-3.0-or-later
# SPDX-FileNotice: Part of the cagan-active-learning project.

"""Informativeness scores and selection.

The predictive variance of a class output over T passes is

    var = (1/T) sum_t p_t^2 - ((1/T) sum_t p_t)^2 + (1/T) sum_t sigma_t^2

i.e. the population variance of the pass probabilities (epistemic part) plus
the mean predicted variance (aleatoric part). The per-class variances reduce
to one score by their mean (or max).
"""

from __future__ import annotations

from collections.abc import Iterable, Sequence
import csv
from dataclasses import dataclass, field
import logging
from pathlib import Path
from typing import Literal, NamedTuple, Protocol

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy import special

from ..classifier.checkpoint import ClassifierCheckpoint
from ..classifier.evaluation import predict_proba
from ..config import LabelMode, UncertaintyConfig
from ..domain.image_sample import ImageSample
from ..errors import DomainError, NumericError, ShapeError
from ..seeding import child_seed
from .monte_carlo import mc_predict

logger = logging.getLogger(__name__)

VARIANCE_TOLERANCE = 1e-12
PROBABILITY_TOLERANCE = 1e-9

Reduction = Literal["mean", "max"]


class Scored(Protocol):
    """Anything carrying a sample id and a score."""

    @property
    def sample_id(self) -> str: ...

    @property
    def score(self) -> float: ...


class ScoredSample(NamedTuple):
    """Plain (id, score) pair."""

    sample_id: str
    score: float


@dataclass(frozen=True, eq=False)
class UncertaintyEstimate:
    """Monte-Carlo passes of one sample and the resulting score."""

    sample_id: str
    predictions: NDArray[np.float64] = field(repr=False)
    variances: NDArray[np.float64] = field(repr=False)
    var: NDArray[np.float64]
    score: float

    def __post_init__(self) -> None:
        if self.predictions.ndim != 2 or self.predictions.shape[0] < 2:
            raise DomainError(f"{self.sample_id}: an estimate needs at least 2 passes")
        if self.predictions.shape != self.variances.shape:
            raise ShapeError(f"{self.sample_id}: prediction and variance passes differ in shape")
        if bool((self.var < -VARIANCE_TOLERANCE).any()):
            raise NumericError("var", f"{self.sample_id}: negative variance beyond tolerance")
        if not (np.isfinite(self.score) and self.score >= 0.0):
            raise NumericError("score", f"{self.sample_id}: score {self.score} is not a finite non-negative value")

    @property
    def passes(self) -> int:
        """Return T."""
        return int(self.predictions.shape[0])


@dataclass(frozen=True)
class SelectionResult:
    """Descending-score prefix of a ranking."""

    ids: tuple[str, ...]
    scores: tuple[float, ...]
    cutoff: int
    tie_seed: int
    truncated: bool


def combine_variance(predictions: ArrayLike, variances: ArrayLike) -> NDArray[np.float64]:
    """Return the epistemic plus aleatoric variance over axis 0 (the passes).

    Raises:
        ShapeError: If the two inputs differ in shape or have no passes.
        NumericError: For non-finite inputs.
    """
    p = np.asarray(predictions, dtype=np.float64)
    s2 = np.asarray(variances, dtype=np.float64)
    if p.shape != s2.shape:
        raise ShapeError(f"predictions {p.shape} and variances {s2.shape} differ")
    if p.ndim == 0 or p.shape[0] == 0:
        raise ShapeError("combine_variance needs at least one pass")
    if not (np.isfinite(p).all() and np.isfinite(s2).all()):
        raise NumericError("mc_passes")
    epistemic = np.mean((p - p.mean(axis=0)) ** 2, axis=0)
    result: NDArray[np.float64] = epistemic + s2.mean(axis=0)
    return result


def reduce_variance(var: NDArray[np.float64], reduction: Reduction = "mean") -> float:
    """Reduce per-class variances to one score."""
    if reduction == "max":
        return float(np.max(var))
    return float(np.mean(var))


def estimates_from_passes(
    sample_ids: Sequence[str],
    predictions: NDArray[np.float64],
    variances: NDArray[np.float64],
    reduction: Reduction = "mean",
) -> list[UncertaintyEstimate]:
    """Build estimates from (T, N, C) pass arrays."""
    if predictions.shape[1] != len(sample_ids):
        raise ShapeError(f"{predictions.shape[1]} pass columns for {len(sample_ids)} ids")
    combined = combine_variance(predictions, variances)
    return [
        UncertaintyEstimate(
            sample_id=sid,
            predictions=predictions[:, i],
            variances=variances[:, i],
            var=combined[i],
            score=reduce_variance(combined[i], reduction),
        )
        for i, sid in enumerate(sample_ids)
    ]


def score_samples(
    checkpoint: ClassifierCheckpoint, samples: Sequence[ImageSample], config: UncertaintyConfig, *, seed: int
) -> list[UncertaintyEstimate]:
    """Return Monte-Carlo informativeness estimates for `samples`."""
    predictions, variances = mc_predict(
        checkpoint,
        samples,
        config.mc_samples,
        seed,
        epistemic_only=config.epistemic_only,
        aleatoric_space=config.aleatoric_space,
    )
    return estimates_from_passes([s.id for s in samples], predictions, variances, config.reduction)


def entropy_score(probabilities: ArrayLike, mode: LabelMode) -> float:
    """Return the prediction entropy in nats.

    Exclusive mode: Shannon entropy of the class distribution. Multilabel
    mode: mean binary entropy of the per-class probabilities.

    Raises:
        DomainError: For probabilities outside [0, 1] beyond 1e-9.
    """
    p = np.asarray(probabilities, dtype=np.float64)
    if p.size == 0 or not np.isfinite(p).all():
        raise DomainError("entropy_score needs finite probabilities")
    if bool((p < -PROBABILITY_TOLERANCE).any() or (p > 1.0 + PROBABILITY_TOLERANCE).any()):
        raise DomainError("probabilities outside [0, 1]")
    p = np.clip(p, 0.0, 1.0)
    if mode == "exclusive":
        return float(special.entr(p).sum())
    return float(np.mean(special.entr(p) + special.entr(1.0 - p)))


def entropy_scores(checkpoint: ClassifierCheckpoint, samples: Sequence[ImageSample]) -> list[ScoredSample]:
    """Score samples by the entropy of the deterministic prediction."""
    probabilities = predict_proba(checkpoint, samples)
    return [
        ScoredSample(sample.id, entropy_score(row, checkpoint.label_mode))
        for sample, row in zip(samples, probabilities, strict=True)
    ]


def random_scores(samples: Sequence[ImageSample], seed: int) -> list[ScoredSample]:
    """Score samples uniformly at random (selection baseline)."""
    rng = np.random.default_rng(child_seed(seed, "random_scores"))
    values = rng.random(len(samples))
    return [ScoredSample(sample.id, float(v)) for sample, v in zip(samples, values, strict=True)]


def rank_by_informativeness(estimates: Sequence[Scored], n_inf: int, tie_seed: int) -> SelectionResult:
    """Return the `n_inf` highest-scoring ids in descending order.

    Equal scores are ordered by a seeded per-id key and then by id, so the
    order does not depend on input order.

    Raises:
        DomainError: For an empty input, ``n_inf < 1`` or duplicate ids.
    """
    if not estimates:
        raise DomainError("rank_by_informativeness needs at least one estimate")
    if n_inf < 1:
        raise DomainError(f"n_inf must be >= 1, got {n_inf}")
    ids = [e.sample_id for e in estimates]
    if len(set(ids)) != len(ids):
        raise DomainError("duplicate sample ids in ranking input")
    ordered = sorted(estimates, key=lambda e: (-e.score, child_seed(tie_seed, e.sample_id), e.sample_id))
    cutoff = min(n_inf, len(ordered))
    if n_inf > len(ordered):
        logger.info("selection of %d truncated to the %d available samples", n_inf, len(ordered))
    head = ordered[:cutoff]
    return SelectionResult(
        ids=tuple(e.sample_id for e in head),
        scores=tuple(float(e.score) for e in head),
        cutoff=cutoff,
        tie_seed=tie_seed,
        truncated=n_inf > len(ordered),
    )


def write_scores_csv(path: Path, scored: Iterable[Scored], selected: Iterable[str]) -> None:
    """Write ``sample_id,score,selected`` rows."""
    chosen = set(selected)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["sample_id", "score", "selected"])
        for item in scored:
            writer.writerow([item.sample_id, repr(float(item.score)), int(item.sample_id in chosen)])
