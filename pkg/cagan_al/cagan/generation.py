# SPDX-License-Identifier: LGPL-3.0-or-later
# SPDX-FileNotice: Part of the cagan-active-learning project.

"""Synthetic image generation with a trained class-aware GAN.

Synthetic ids are ``{base_id}~{mask_id}~c{class}``, so the same request always
yields the same id and pixels.
"""

from __future__ import annotations

from collections.abc import Sequence
import logging

import numpy as np
import torch
import torch.nn.functional as F

from ..domain.image_sample import ImageSample, Provenance, one_hot
from ..domain.mask_latent import MaskLatent
from ..errors import DomainError, ShapeError
from ..segmenter.latent import latent_for_sample
from ..segmenter.mask_perturb import perturb_mask
from ..segmenter.training import SegmenterCheckpoint
from .training import CaganCheckpoint

logger = logging.getLogger(__name__)

GENERATION_BATCH = 64


def synthetic_id(base_id: str, mask_id: str, target_class: int) -> str:
    """Return the deterministic id of a generated sample."""
    return f"{base_id}~{mask_id}~c{target_class}"


def generate(checkpoint: CaganCheckpoint, x: ImageSample, mask_latent: MaskLatent, target_class: int) -> ImageSample:
    """Generate one image of `target_class` from `x` conditioned on `mask_latent`.

    Raises:
        DomainError: If `target_class` is outside ``0..C-1``.
        ShapeError: For an image side or code width the checkpoint was not built for.
    """
    return generate_batch(checkpoint, [x], [mask_latent], [target_class])[0]


def generate_batch(
    checkpoint: CaganCheckpoint,
    bases: Sequence[ImageSample],
    latents: Sequence[MaskLatent],
    targets: Sequence[int],
) -> list[ImageSample]:
    """Generate one image per ``(base, latent, target)`` triple."""
    if not len(bases) == len(latents) == len(targets):
        raise ShapeError("bases, latents and targets must have equal length")
    for target in targets:
        if not 0 <= target < checkpoint.num_classes:
            raise DomainError(f"target class {target} outside 0..{checkpoint.num_classes - 1}")
    for base in bases:
        if base.side != checkpoint.side:
            raise ShapeError(f"sample {base.id} side {base.side} != generator side {checkpoint.side}")
    for latent in latents:
        if latent.z.shape[0] != checkpoint.code_dim:
            raise ShapeError(f"latent {latent.id} width {latent.z.shape[0]} != {checkpoint.code_dim}")

    generator = checkpoint.generator
    generator.eval()
    outputs: list[ImageSample] = []
    for start in range(0, len(bases), GENERATION_BATCH):
        chunk = slice(start, start + GENERATION_BATCH)
        x = torch.from_numpy(np.stack([b.pixels for b in bases[chunk]]).astype(np.float32)[:, None])
        z = torch.from_numpy(np.stack([m.z for m in latents[chunk]]).astype(np.float32))
        t = F.one_hot(torch.tensor(list(targets[chunk])), checkpoint.num_classes).float()
        with torch.no_grad():
            images = generator(x, z, t)[:, 0].numpy()
        for base, latent, target, pixels in zip(bases[chunk], latents[chunk], targets[chunk], images, strict=True):
            outputs.append(
                ImageSample(
                    id=synthetic_id(base.id, latent.id, target),
                    pixels=np.clip(pixels, 0.0, 1.0).astype(np.float32),
                    labels=one_hot(target, checkpoint.num_classes),
                    patient_id=base.patient_id,
                    provenance=Provenance.SYNTHETIC,
                    base_id=base.id,
                    mask_id=latent.id,
                )
            )
    return outputs


def generate_mask_variants(
    checkpoint: CaganCheckpoint,
    segmenter: SegmenterCheckpoint,
    x: ImageSample,
    *,
    count: int,
    magnitude: float,
    seed: int,
    control_points: int = 12,
    allow_untrained: bool = False,
) -> list[ImageSample]:
    """Generate same-class variants of `x` from up to 200 perturbed masks.

    Raises:
        DomainError: If `x` has no finding to keep.
    """
    target = x.primary_class
    parent = latent_for_sample(segmenter, x, allow_untrained=allow_untrained)
    variants = perturb_mask(parent, magnitude, count, seed, segmenter=segmenter, control_points=control_points)
    logger.info("generating %d mask variants of %s", len(variants), x.id)
    return generate_batch(checkpoint, [x] * len(variants), variants, [target] * len(variants))
