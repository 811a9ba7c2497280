# SPDX-License-Identifier: LGPL-3.0-or-later
# SPDX-FileNotice: Part of the cagan-active-learning project.

"""Standard geometric augmentation.

Random rotation within ``±max_rotation`` degrees, translation up to
``max_shift`` of the side, horizontal flip, and optional isotropic scaling.
Augmented samples are synthetic copies that keep the base labels.
"""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray
from skimage import transform

from ..domain.image_sample import ImageSample, Provenance
from ..errors import DomainError


@dataclass(frozen=True)
class AugmentParams:
    """One draw of geometric parameters."""

    angle: float = 0.0
    shift_rows: float = 0.0
    shift_cols: float = 0.0
    flip: bool = False
    scale: float = 1.0

    @property
    def is_identity(self) -> bool:
        """Return whether the transform leaves pixels unchanged."""
        no_motion = self.angle == 0.0 and self.shift_rows == 0.0 and self.shift_cols == 0.0
        return no_motion and not self.flip and self.scale == 1.0


def transform_image(pixels: NDArray[np.float32], params: AugmentParams) -> NDArray[np.float32]:
    """Apply `params` about the image centre with edge padding."""
    if params.is_identity:
        return pixels.copy()
    image = pixels[:, ::-1] if params.flip else pixels
    side = image.shape[0]
    center = np.array([(side - 1) / 2.0, (side - 1) / 2.0])
    to_origin = transform.AffineTransform(translation=-center)
    rotate_scale = transform.AffineTransform(rotation=np.deg2rad(params.angle), scale=params.scale)
    back = transform.AffineTransform(translation=center + np.array([params.shift_cols, params.shift_rows]))
    forward = to_origin + rotate_scale + back
    warped = transform.warp(image, forward.inverse, order=1, mode="edge", preserve_range=True)
    return np.clip(warped, 0.0, 1.0).astype(np.float32)


def draw_params(
    rng: np.random.Generator,
    side: int,
    *,
    max_rotation: float = 15.0,
    max_shift: float = 0.10,
    flip: bool = True,
    scale_range: tuple[float, float] | None = None,
) -> AugmentParams:
    """Draw one parameter set."""
    limit = max_shift * side
    return AugmentParams(
        angle=float(rng.uniform(-max_rotation, max_rotation)) if max_rotation else 0.0,
        shift_rows=float(rng.uniform(-limit, limit)) if limit else 0.0,
        shift_cols=float(rng.uniform(-limit, limit)) if limit else 0.0,
        flip=bool(rng.integers(0, 2)) if flip else False,
        scale=float(rng.uniform(*scale_range)) if scale_range else 1.0,
    )


def augment_standard(
    samples: Sequence[ImageSample],
    per_sample_count: int,
    seed: int,
    *,
    max_rotation: float = 15.0,
    max_shift: float = 0.10,
    flip: bool = True,
    scale_range: tuple[float, float] | None = None,
) -> list[ImageSample]:
    """Return `per_sample_count` geometric variants of every sample.

    Raises:
        DomainError: If `per_sample_count` is below 1.
    """
    if per_sample_count < 1:
        raise DomainError("per_sample_count must be >= 1")
    outputs: list[ImageSample] = []
    for index, base in enumerate(samples):
        rng = np.random.default_rng([seed, index])
        for k in range(per_sample_count):
            params = draw_params(
                rng, base.side, max_rotation=max_rotation, max_shift=max_shift, flip=flip, scale_range=scale_range
            )
            outputs.append(
                ImageSample(
                    id=f"{base.id}~aug{seed}.{k}",
                    pixels=transform_image(base.pixels, params),
                    labels=base.labels,
                    patient_id=base.patient_id,
                    provenance=Provenance.SYNTHETIC,
                    base_id=base.base_id or base.id,
                )
            )
    return outputs
