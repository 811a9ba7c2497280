# SPDX-License-Identifier: LGPL-3.0-or-later
# SPDX-FileNotice: Part of the cagan-active-learning project.

"""The active-learning loop.

Per round: score the unlabeled pool, label the top ``top_k_real`` ids
(class-agnostic), generate and select synthetic samples from them, fine-tune on
the labeled reals plus the synthetic pool, validate, and move the picked ids
out of the pool. The loop stops when the validation AUC has been stable for
``stop_window`` rounds, the pool or label budget runs out, or ``max_rounds``
is reached. Stability is judged on every round's candidate classifier, so a
rejected round contributes the AUC it measured, not the one it kept.
"""

from __future__ import annotations

from collections.abc import Callable, Sequence
from dataclasses import dataclass, field
import logging
import math
import time

from ..classifier.checkpoint import ClassifierCheckpoint
from ..config import ScheduleConfig
from ..data.sample_store import SampleStore
from ..domain.auc_report import AucReport
from ..domain.image_sample import ImageSample
from ..domain.manifest import Split
from ..errors import DomainError, ScheduleError
from ..seeding import child_rng, child_seed
from ..uncertainty.scoring import Scored, rank_by_informativeness
from .loop_ports import Augmenter, Evaluator, Scorer, Trainer
from .records import AlRoundRecord, AlTrail
from .run_store import RunStore
from .stopping import admits, stopping_check

logger = logging.getLogger(__name__)

RoundCallback = Callable[[AlRoundRecord, ClassifierCheckpoint], None]


@dataclass
class LoopState:
    """Mutable bookkeeping between rounds."""

    labeled: list[str]
    pool: list[str]
    synthetic: list[ImageSample] = field(default_factory=list)
    history: list[float] = field(default_factory=list)
    observed: list[float] = field(default_factory=list)


def initial_pool_ids(train_ids: Sequence[str], fraction: float, seed: int) -> list[str]:
    """Return a seeded random ``fraction`` of `train_ids` (at least one id)."""
    if not train_ids:
        raise ScheduleError("the train split is empty")
    count = max(1, round(fraction * len(train_ids)))
    order = child_rng(seed, "initial_pool").permutation(len(train_ids))
    ordered = sorted(train_ids)
    return [ordered[i] for i in sorted(order[:count])]


def _auc_value(report: AucReport) -> float:
    macro = report.macro
    return float("nan") if macro is None else macro


class ActiveLearningController:
    """Runs the loop against the trainer, evaluator, scorer and augmenter ports."""

    def __init__(
        self,
        store: SampleStore,
        schedule: ScheduleConfig,
        *,
        trainer: Trainer,
        evaluator: Evaluator,
        scorer: Scorer,
        augmenter: Augmenter,
        seed: int,
        run_store: RunStore | None = None,
        callback: RoundCallback | None = None,
    ) -> None:
        self._store = store
        self._schedule = schedule
        self._trainer = trainer
        self._evaluator = evaluator
        self._scorer = scorer
        self._augmenter = augmenter
        self._seed = seed
        self._run_store = run_store
        self._callback = callback
        self._train_ids = store.split_ids(Split.TRAIN)

    def label_cap(self) -> int | None:
        """Return the maximum number of real labels, or None without a budget."""
        if self._schedule.label_budget is None:
            return None
        return max(1, math.floor(self._schedule.label_budget * len(self._train_ids)))

    def run(
        self, classifier: ClassifierCheckpoint, *, resume: bool = False
    ) -> tuple[ClassifierCheckpoint, AlTrail]:
        """Run the loop from an untrained or pre-trained classifier.

        Raises:
            ScheduleError: If the unlabeled pool is empty before round 1.
        """
        schedule = self._schedule
        trail = AlTrail(epsilon_absolute=schedule.epsilon_absolute, epsilon_units=schedule.epsilon_units)
        if schedule.max_rounds == 0:
            trail.stop_reason = "max_rounds"
            logger.info("max_rounds is 0; returning the initial classifier")
            return classifier, trail

        restored = self._restore() if resume else None
        if restored is not None:
            classifier, trail, state = restored
        else:
            classifier, state = self._start(classifier, trail)
        if not state.pool and not trail.records:
            raise ScheduleError("the unlabeled pool is empty before the first round")

        while not trail.stop_reason:
            reason = self._stop_reason(trail, state)
            if reason:
                trail.stop_reason = reason
                break
            classifier = self._round(classifier, trail, state)
            if self._run_store is not None:
                self._run_store.write_trail(trail)
        logger.info("active learning stopped after %d rounds: %s", len(trail.records), trail.stop_reason)
        if self._run_store is not None:
            self._run_store.write_trail(trail)
        return classifier, trail

    def _start(self, classifier: ClassifierCheckpoint, trail: AlTrail) -> tuple[ClassifierCheckpoint, LoopState]:
        labeled = initial_pool_ids(self._train_ids, self._schedule.initial_pool_fraction, self._seed)
        cap = self.label_cap()
        if cap is not None:
            labeled = labeled[:cap]
        chosen = set(labeled)
        state = LoopState(labeled=labeled, pool=[sid for sid in sorted(self._train_ids) if sid not in chosen])
        if classifier.round_index < 0:
            classifier = self._trainer.train(
                classifier, self._store.get(labeled), round_index=0, seed=child_seed(self._seed, "train", 0)
            )
        report = self._evaluator.validate(classifier)
        trail.initial_ids = tuple(labeled)
        trail.initial_auc = report.macro
        state.history.append(_auc_value(report))
        state.observed.append(_auc_value(report))
        if self._run_store is not None:
            self._run_store.write_initial(classifier, report)
            self._run_store.write_trail(trail)
        logger.info("initial pool: %d labels, validation AUC %s", len(labeled), report.macro)
        return classifier, state

    def _restore(self) -> tuple[ClassifierCheckpoint, AlTrail, LoopState] | None:
        if self._run_store is None:
            return None
        trail = self._run_store.load_trail()
        if trail is None or not trail.initial_ids:
            return None
        trail.stop_reason = ""
        labeled = list(trail.initial_ids)
        synthetic: list[ImageSample] = []
        for record in trail.records:
            labeled.extend(record.selected_ids)
            if record.admitted:
                synthetic = self._merge_synthetic(synthetic, self._run_store.load_synthetic(record.round_index))
        chosen = set(labeled)
        state = LoopState(
            labeled=labeled,
            pool=[sid for sid in sorted(self._train_ids) if sid not in chosen],
            synthetic=synthetic,
            history=trail.auc_history(),
            observed=trail.observed_auc_history(),
        )
        if trail.records:
            classifier = self._run_store.load_round_checkpoint(trail.records[-1].round_index)
        else:
            classifier = self._run_store.load_initial()
        logger.info("resumed after round %d", len(trail.records))
        return classifier, trail, state

    def _stop_reason(self, trail: AlTrail, state: LoopState) -> str:
        schedule = self._schedule
        if len(trail.records) >= schedule.max_rounds:
            return "max_rounds"
        if not state.pool:
            return "pool_exhausted"
        cap = self.label_cap()
        if cap is not None and len(state.labeled) >= cap:
            return "label_budget"
        if stopping_check(state.observed, schedule.epsilon_absolute, schedule.stop_window):
            return "auc_stable"
        return ""

    def _merge_synthetic(self, current: list[ImageSample], kept: list[ImageSample]) -> list[ImageSample]:
        if self._schedule.synthetic_mode == "replace":
            return list(kept)
        merged = current + kept
        overflow = len(merged) - self._schedule.synthetic_cap
        if overflow > 0:
            logger.info("synthetic pool at cap %d; dropping the %d oldest", self._schedule.synthetic_cap, overflow)
            merged = merged[overflow:]
        return merged

    def _round(self, classifier: ClassifierCheckpoint, trail: AlTrail, state: LoopState) -> ClassifierCheckpoint:
        schedule = self._schedule
        round_index = len(trail.records) + 1
        started = time.perf_counter()
        auc_before = state.history[-1]

        take = schedule.top_k_real
        cap = self.label_cap()
        if cap is not None:
            take = min(take, cap - len(state.labeled))
        pool_samples = self._store.get(state.pool)
        pool_scores = list(
            self._scorer.score(classifier, pool_samples, seed=child_seed(self._seed, "pool", round_index))
        )
        self._check_scores(pool_scores, round_index)
        selection = rank_by_informativeness(pool_scores, take, child_seed(self._seed, "ties", round_index))
        picked = self._store.get(selection.ids)

        augmented = self._augmenter.augment(
            picked, classifier, self._scorer, seed=self._seed, round_index=round_index
        )
        synthetic = self._merge_synthetic(state.synthetic, augmented.kept)
        labeled = state.labeled + list(selection.ids)
        training_pool = self._store.get(labeled) + synthetic
        candidate = self._trainer.train(
            classifier, training_pool, round_index=round_index, seed=child_seed(self._seed, "train", round_index)
        )
        report = self._evaluator.validate(candidate)
        auc_after = report.macro
        admitted = admits(None if math.isnan(auc_before) else auc_before, auc_after, schedule.gain_threshold)

        state.observed.append(_auc_value(report))
        chosen = set(selection.ids)
        state.pool = [sid for sid in state.pool if sid not in chosen]
        state.labeled = labeled
        if admitted:
            classifier = candidate
            state.synthetic = synthetic
            state.history.append(_auc_value(report))
        else:
            logger.info("round %d not admitted: gain below %s", round_index, schedule.gain_threshold)
            classifier = classifier.at_round(round_index)
            state.history.append(auc_before)

        record = AlRoundRecord(
            round_index=round_index,
            selected_ids=selection.ids,
            synthetic_per_class=augmented.kept_per_class,
            auc_before=None if math.isnan(auc_before) else auc_before,
            auc_after=auc_after,
            labels_consumed=len(state.labeled),
            wall_time=time.perf_counter() - started,
            admitted=admitted,
            pool_remaining=len(state.pool),
            candidates=augmented.candidates,
        )
        trail.records.append(record)
        if self._run_store is not None:
            self._run_store.write_round(
                record,
                selected=picked,
                selected_scores=selection.scores,
                synthetic=augmented.kept,
                pool_scores=pool_scores,
                report=report,
                checkpoint=classifier,
            )
        if self._callback is not None:
            self._callback(record, classifier)
        logger.info(
            "round %d: %d labels, %d synthetic kept, validation AUC %s -> %s",
            round_index,
            record.labels_consumed,
            record.synthetic_count,
            record.auc_before,
            record.auc_after,
        )
        return classifier

    @staticmethod
    def _check_scores(scores: Sequence[Scored], round_index: int) -> None:
        for item in scores:
            value = float(item.score)
            if not math.isfinite(value) or value < 0.0:
                raise DomainError(f"round {round_index}: score {value} of {item.sample_id} is invalid")
