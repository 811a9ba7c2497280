# SPDX-License-Identifier: LGPL-3.0-or-later
# SPDX-FileNotice: Part of the cagan-active-learning project.

"""The image sample value type.

An `ImageSample` is one square grayscale image with its binary label vector,
patient and lineage. Pixels are float32 in [0, 1]; labels are a tuple of 0/1
ints of length C. Synthetic samples always name the real sample they were
generated from.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import StrEnum

import numpy as np
from numpy.typing import NDArray

from ..errors import DomainError, ShapeError


class Provenance(StrEnum):
    """Where a sample's pixels came from."""

    REAL = "real"
    SYNTHETIC = "synthetic"


@dataclass(frozen=True, eq=False)
class ImageSample:
    """One labeled image.

    Attributes:
        id: Opaque unique token.
        pixels: 2-D float32 array of side S with values in [0, 1].
        labels: Length-C tuple of 0/1 ints.
        patient_id: Opaque patient token; synthetic samples inherit it from the base.
        provenance: Real or synthetic.
        base_id: Id of the real sample a synthetic one was generated from.
        mask_id: Id of the `MaskLatent` used to generate or describe the sample.
        mask: Optional ground-truth lung mask (uint8, same side as `pixels`).
    """

    id: str
    pixels: NDArray[np.float32]
    labels: tuple[int, ...]
    patient_id: str
    provenance: Provenance = Provenance.REAL
    base_id: str | None = None
    mask_id: str | None = None
    mask: NDArray[np.uint8] | None = field(default=None, repr=False)

    def __post_init__(self) -> None:
        pixels = self.pixels
        if pixels.ndim != 2 or pixels.shape[0] != pixels.shape[1]:
            raise ShapeError(f"sample {self.id}: pixels must be a square 2-D array, got {pixels.shape}")
        if not np.all(np.isfinite(pixels)) or pixels.min() < 0.0 or pixels.max() > 1.0:
            raise DomainError(f"sample {self.id}: pixels must be finite and within [0, 1]")
        if any(bit not in (0, 1) for bit in self.labels):
            raise DomainError(f"sample {self.id}: labels must be 0/1")
        if self.provenance is Provenance.SYNTHETIC and not self.base_id:
            raise DomainError(f"synthetic sample {self.id} has no base_id")
        if self.mask is not None and self.mask.shape != pixels.shape:
            raise ShapeError(f"sample {self.id}: mask shape {self.mask.shape} differs from image")

    @property
    def side(self) -> int:
        """Return the image side S."""
        return int(self.pixels.shape[0])

    @property
    def num_classes(self) -> int:
        """Return C, the label vector length."""
        return len(self.labels)

    @property
    def is_normal(self) -> bool:
        """Return whether the label vector is the all-zero no-finding pattern."""
        return not any(self.labels)

    @property
    def positive_classes(self) -> tuple[int, ...]:
        """Return the indices of set label bits."""
        return tuple(i for i, bit in enumerate(self.labels) if bit)

    @property
    def primary_class(self) -> int:
        """Return the lowest set class index (the class in exclusive mode)."""
        positives = self.positive_classes
        if not positives:
            raise DomainError(f"sample {self.id} has no finding")
        return positives[0]

    def check_labels(self, *, allow_normal: bool) -> None:
        """Raise `DomainError` for an all-zero label vector when normals are off."""
        if self.is_normal and not allow_normal:
            raise DomainError(f"sample {self.id} has no set label bit and allow_normal is off")


def one_hot(index: int, num_classes: int) -> tuple[int, ...]:
    """Return the length-`num_classes` one-hot label tuple for `index`."""
    if not 0 <= index < num_classes:
        raise DomainError(f"class index {index} outside 0..{num_classes - 1}")
    return tuple(1 if i == index else 0 for i in range(num_classes))


def stack_pixels(samples: list[ImageSample]) -> NDArray[np.float32]:
    """Return an (N, 1, S, S) float32 batch of the samples' pixels."""
    if not samples:
        raise DomainError("cannot stack an empty sample list")
    sides = {s.side for s in samples}
    if len(sides) != 1:
        raise ShapeError(f"samples have mixed sides {sorted(sides)}")
    return np.stack([s.pixels for s in samples]).astype(np.float32)[:, None, :, :]


def stack_labels(samples: list[ImageSample]) -> NDArray[np.float32]:
    """Return an (N, C) float32 label matrix."""
    widths = {s.num_classes for s in samples}
    if len(widths) != 1:
        raise ShapeError(f"samples have mixed label widths {sorted(widths)}")
    return np.asarray([s.labels for s in samples], dtype=np.float32)
