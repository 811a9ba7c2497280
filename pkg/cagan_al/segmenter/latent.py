# SPDX-License-Identifier: LGPL-3.0-or-later
# SPDX-FileNotice: Part of the cagan-active-learning project.

"""Latent codes from the segmenter bottleneck.

The generator is conditioned on the code of a lung mask, so masks (ground
truth, predicted or perturbed) are fed through the encoder as images.
"""

from __future__ import annotations

from collections.abc import Sequence

import numpy as np
from numpy.typing import NDArray
import torch

from ..domain.image_sample import ImageSample
from ..domain.mask_latent import MaskLatent, MaskSource
from ..errors import ShapeError
from .training import SegmenterCheckpoint


def _check_side(checkpoint: SegmenterCheckpoint, array: NDArray[np.generic]) -> None:
    if array.shape != (checkpoint.side, checkpoint.side):
        raise ShapeError(f"input {array.shape} does not match segmenter side {checkpoint.side}")


def encode_masks(checkpoint: SegmenterCheckpoint, masks: Sequence[NDArray[np.uint8]]) -> NDArray[np.float32]:
    """Return an (N, Z) array of bottleneck codes for binary masks."""
    for mask in masks:
        _check_side(checkpoint, mask)
    batch = np.stack(masks).astype(np.float32)[:, None, :, :]
    network = checkpoint.network
    network.eval()
    with torch.no_grad():
        z = network.encode(torch.from_numpy(batch))
    return z.numpy().astype(np.float32)


def extract_latent(
    checkpoint: SegmenterCheckpoint,
    image_or_mask: ImageSample | NDArray[np.uint8],
    *,
    mask_id: str | None = None,
    allow_untrained: bool = False,
) -> MaskLatent:
    """Return the mask and bottleneck code of an image or of a supplied mask.

    For an image the mask is the decoder output thresholded at the checkpoint
    threshold; a supplied mask is returned unchanged. `z` is the bottleneck
    activation of the input in both cases.

    Raises:
        ShapeError: If the input side differs from the trained side.
        CapabilityError: If the segmenter is untrained and `allow_untrained` is off.
    """
    checkpoint.require_usable(allow_untrained=allow_untrained)
    network = checkpoint.network
    network.eval()
    if isinstance(image_or_mask, ImageSample):
        _check_side(checkpoint, image_or_mask.pixels)
        batch = torch.from_numpy(image_or_mask.pixels.astype(np.float32)[None, None])
        with torch.no_grad():
            probs, z = network(batch)
        mask = (probs[0, 0].numpy() >= checkpoint.threshold).astype(np.uint8)
        return MaskLatent(
            id=mask_id or f"{image_or_mask.id}:pred",
            mask=mask,
            z=z[0].numpy().astype(np.float32),
            source=MaskSource.PREDICTED,
        )
    mask = np.asarray(image_or_mask).astype(np.uint8)
    _check_side(checkpoint, mask)
    z_mask = encode_masks(checkpoint, [mask])[0]
    return MaskLatent(id=mask_id or "mask", mask=mask, z=z_mask, source=MaskSource.GROUND_TRUTH)


def latent_for_sample(
    checkpoint: SegmenterCheckpoint, sample: ImageSample, *, allow_untrained: bool = False
) -> MaskLatent:
    """Return the conditioning latent of a sample.

    Uses the ground-truth mask when the sample has one, otherwise the predicted
    mask; `z` is always the code of that mask.
    """
    checkpoint.require_usable(allow_untrained=allow_untrained)
    if sample.mask is not None:
        return extract_latent(
            checkpoint, sample.mask, mask_id=sample.mask_id or f"{sample.id}:gt", allow_untrained=allow_untrained
        )
    predicted = extract_latent(checkpoint, sample, allow_untrained=allow_untrained)
    z = encode_masks(checkpoint, [predicted.mask])[0]
    return MaskLatent(id=predicted.id, mask=predicted.mask, z=z, source=MaskSource.PREDICTED)
