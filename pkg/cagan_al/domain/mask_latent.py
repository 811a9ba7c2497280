# SPDX-License-Identifier: LGPL-3.0-or-later
# SPDX-FileNotice: Part of the cagan-active-learning project.

"""Binary lung mask paired with its segmenter bottleneck code."""

from __future__ import annotations

from dataclasses import dataclass
from enum import StrEnum

import numpy as np
from numpy.typing import NDArray

from ..errors import DomainError


class MaskSource(StrEnum):
    """How a mask was obtained."""

    GROUND_TRUTH = "ground_truth"
    PREDICTED = "predicted"
    PERTURBED = "perturbed"


@dataclass(frozen=True, eq=False)
class MaskLatent:
    """A mask and the latent vector `z` the generator is conditioned on."""

    id: str
    mask: NDArray[np.uint8]
    z: NDArray[np.float32]
    source: MaskSource
    parent_mask_id: str | None = None

    def __post_init__(self) -> None:
        if self.mask.ndim != 2 or not np.isin(self.mask, (0, 1)).all():
            raise DomainError(f"mask {self.id} must be a binary 2-D array")
        if self.z.ndim != 1 or not np.all(np.isfinite(self.z)):
            raise DomainError(f"mask {self.id}: z must be a finite vector")
        if self.source is MaskSource.PERTURBED and not self.parent_mask_id:
            raise DomainError(f"perturbed mask {self.id} has no parent_mask_id")

    @property
    def area(self) -> int:
        """Return the foreground pixel count."""
        return int(self.mask.sum())
