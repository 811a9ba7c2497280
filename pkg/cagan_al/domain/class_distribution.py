# SPDX-License-Identifier: LGPL-3.0-or-later
# SPDX-FileNotice: Part of the cagan-active-learning project.

"""Per-class label statistics."""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class ClassDistribution:
    """Per-class counts and fractions over a sample set.

    Fractions of multilabel data need not sum to 1.
    """

    counts: tuple[int, ...]
    fractions: tuple[float, ...]
    total: int

    def as_dict(self, class_names: tuple[str, ...]) -> dict[str, dict[str, float]]:
        """Return a JSON-friendly mapping keyed by class name."""
        return {
            name: {"count": count, "fraction": fraction}
            for name, count, fraction in zip(class_names, self.counts, self.fractions, strict=True)
        }
