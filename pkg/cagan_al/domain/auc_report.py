# SPDX-License-Identifier: LGPL-3.0-or-later
# SPDX-FileNotice: Part of the cagan-active-learning project.

"""Per-class AUC results.

A class with fewer than two positives or two negatives in the evaluated split
has an undefined AUC (``None``); it is written as ``undef`` in tables and left
out of the macro average.
"""

from __future__ import annotations

from collections.abc import Mapping
from dataclasses import dataclass
import math
from typing import Any

from ..errors import DomainError

UNDEFINED = "undef"


@dataclass(frozen=True)
class AucReport:
    """Per-class one-vs-rest AUC over one split."""

    class_names: tuple[str, ...]
    per_class: tuple[float | None, ...]
    positives: tuple[int, ...]
    negatives: tuple[int, ...]
    split: str
    model_tag: str = ""

    def __post_init__(self) -> None:
        width = len(self.class_names)
        if not len(self.per_class) == len(self.positives) == len(self.negatives) == width:
            raise DomainError("AucReport fields must all have one entry per class")
        for value in self.per_class:
            if value is not None and not (math.isfinite(value) and 0.0 <= value <= 1.0):
                raise DomainError(f"AUC {value} outside [0, 1]")

    @property
    def macro(self) -> float | None:
        """Return the mean AUC over defined classes, or None if none is defined."""
        defined = [v for v in self.per_class if v is not None]
        if not defined:
            return None
        return math.fsum(defined) / len(defined)

    @property
    def undefined_classes(self) -> tuple[str, ...]:
        """Return names of classes whose AUC is undefined."""
        return tuple(name for name, v in zip(self.class_names, self.per_class, strict=True) if v is None)

    def cell(self, index: int) -> str:
        """Return the table cell of class `index`."""
        value = self.per_class[index]
        return UNDEFINED if value is None else repr(value)

    def macro_cell(self) -> str:
        """Return the table cell of the macro average."""
        macro = self.macro
        return UNDEFINED if macro is None else repr(macro)

    def to_json(self) -> dict[str, Any]:
        """Return a JSON-friendly mapping."""
        return {
            "class_names": list(self.class_names),
            "per_class": list(self.per_class),
            "positives": list(self.positives),
            "negatives": list(self.negatives),
            "split": self.split,
            "model_tag": self.model_tag,
            "macro": self.macro,
        }

    @classmethod
    def from_json(cls, data: Mapping[str, Any]) -> AucReport:
        """Rebuild a report from `to_json` output."""
        return cls(
            class_names=tuple(data["class_names"]),
            per_class=tuple(None if v is None else float(v) for v in data["per_class"]),
            positives=tuple(int(v) for v in data["positives"]),
            negatives=tuple(int(v) for v in data["negatives"]),
            split=str(data["split"]),
            model_tag=str(data.get("model_tag", "")),
        )
