# SPDX-License-Identifier: LGPL-3.0-or-later
# SPDX-FileNotice: Part of the cagan-active-learning project.

"""Per-round records of an active-learning run."""

from __future__ import annotations

from collections.abc import Mapping
from dataclasses import dataclass, field
from typing import Any

from ..errors import DomainError


@dataclass(frozen=True)
class AlRoundRecord:
    """What one round picked, kept and achieved.

    Attributes:
        round_index: 1-based round number.
        selected_ids: Real samples labeled in this round, in selection order.
        synthetic_per_class: Synthetic ids kept this round keyed by class index.
        auc_before: Validation macro-AUC entering the round.
        auc_after: Validation macro-AUC of the round's fine-tuned classifier.
        labels_consumed: Cumulative real labels after the round (initial pool included).
        wall_time: Seconds spent in the round.
        admitted: False when the gain rule rejected the round's classifier.
        pool_remaining: Unlabeled pool size after the round.
    """

    round_index: int
    selected_ids: tuple[str, ...]
    synthetic_per_class: Mapping[int, tuple[str, ...]]
    auc_before: float | None
    auc_after: float | None
    labels_consumed: int
    wall_time: float
    admitted: bool = True
    pool_remaining: int = 0
    candidates: int = 0

    def __post_init__(self) -> None:
        if self.round_index < 1:
            raise DomainError("round_index starts at 1")
        if len(set(self.selected_ids)) != len(self.selected_ids):
            raise DomainError(f"round {self.round_index} selected an id twice")

    @property
    def synthetic_count(self) -> int:
        """Return the number of synthetic samples kept this round."""
        return sum(len(ids) for ids in self.synthetic_per_class.values())

    def to_json(self) -> dict[str, Any]:
        """Return a JSON-friendly mapping."""
        return {
            "round_index": self.round_index,
            "selected_ids": list(self.selected_ids),
            "synthetic_per_class": {str(c): list(ids) for c, ids in sorted(self.synthetic_per_class.items())},
            "auc_before": self.auc_before,
            "auc_after": self.auc_after,
            "labels_consumed": self.labels_consumed,
            "wall_time": self.wall_time,
            "admitted": self.admitted,
            "pool_remaining": self.pool_remaining,
            "candidates": self.candidates,
        }

    @classmethod
    def from_json(cls, data: Mapping[str, Any]) -> AlRoundRecord:
        """Rebuild a record from `to_json` output."""
        return cls(
            round_index=int(data["round_index"]),
            selected_ids=tuple(data["selected_ids"]),
            synthetic_per_class={int(c): tuple(ids) for c, ids in data["synthetic_per_class"].items()},
            auc_before=data["auc_before"],
            auc_after=data["auc_after"],
            labels_consumed=int(data["labels_consumed"]),
            wall_time=float(data["wall_time"]),
            admitted=bool(data.get("admitted", True)),
            pool_remaining=int(data.get("pool_remaining", 0)),
            candidates=int(data.get("candidates", 0)),
        )


@dataclass
class AlTrail:
    """Ordered round records plus how the run ended."""

    initial_ids: tuple[str, ...] = ()
    initial_auc: float | None = None
    records: list[AlRoundRecord] = field(default_factory=list)
    stop_reason: str = ""
    epsilon_absolute: float = 0.0
    epsilon_units: str = ""

    def auc_history(self) -> list[float]:
        """Return validation AUCs of the accepted classifier, initial value first (NaN when undefined)."""
        values = [self.initial_auc]
        for record in self.records:
            values.append(record.auc_after if record.admitted else values[-1])
        return [float("nan") if v is None else float(v) for v in values]

    def observed_auc_history(self) -> list[float]:
        """Return the validation AUC measured in every round, admitted or not, initial value first."""
        values = [self.initial_auc, *(record.auc_after for record in self.records)]
        return [float("nan") if v is None else float(v) for v in values]

    def to_json(self) -> dict[str, Any]:
        """Return a JSON-friendly mapping."""
        return {
            "initial_ids": list(self.initial_ids),
            "initial_auc": self.initial_auc,
            "rounds": [r.to_json() for r in self.records],
            "stop_reason": self.stop_reason,
            "epsilon_absolute": self.epsilon_absolute,
            "epsilon_units": self.epsilon_units,
        }

    @classmethod
    def from_json(cls, data: Mapping[str, Any]) -> AlTrail:
        """Rebuild a trail from `to_json` output."""
        return cls(
            initial_ids=tuple(data["initial_ids"]),
            initial_auc=data.get("initial_auc"),
            records=[AlRoundRecord.from_json(r) for r in data.get("rounds", [])],
            stop_reason=str(data.get("stop_reason", "")),
            epsilon_absolute=float(data.get("epsilon_absolute", 0.0)),
            epsilon_units=str(data.get("epsilon_units", "")),
        )
