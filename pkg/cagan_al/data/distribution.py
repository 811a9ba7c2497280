# SPDX-License-Identifier: LGPL-3.0-or-later
# SPDX-FileNotice: Part of the cagan-active-learning project.

"""Class distribution of a sample set."""

from __future__ import annotations

from collections.abc import Sequence
from typing import Protocol

import numpy as np

from ..domain.class_distribution import ClassDistribution
from ..errors import DomainError, ShapeError


class _Labeled(Protocol):
    @property
    def labels(self) -> tuple[int, ...]: ...


def class_distribution(samples: Sequence[_Labeled]) -> ClassDistribution:
    """Count samples per set label bit.

    ``count_c`` is the number of samples whose label vector has bit ``c`` set
    and ``fraction_c = count_c / len(samples)``.

    Raises:
        DomainError: If `samples` is empty.
        ShapeError: If label widths differ.
    """
    if not samples:
        raise DomainError("class_distribution needs at least one sample")
    widths = {len(s.labels) for s in samples}
    if len(widths) != 1:
        raise ShapeError(f"mixed label widths {sorted(widths)}")
    matrix = np.asarray([s.labels for s in samples], dtype=np.int64)
    counts = matrix.sum(axis=0)
    total = len(samples)
    return ClassDistribution(
        counts=tuple(int(c) for c in counts),
        fractions=tuple(float(c) / total for c in counts),
        total=total,
    )
