# SPDX-License-Identifier: LGPL-3.0-or-later
# SPDX-FileNotice: Part of the cagan-active-learning project.

"""Smooth random deformation of lung masks.

Every connected component is traced, a few control points on its contour are
pushed radially away from (or towards) the component centroid, and a periodic
cubic B-spline through the moved points is rasterised as the new outline.
Components too small to trace (under three pixels) are shifted instead, by up
to one pixel at first and further as repeated attempts fail.
Candidates that merge or split components, drift too far in area, or repeat an
earlier output are drawn again.
"""

from __future__ import annotations

import logging

import numpy as np
from numpy.typing import NDArray
from scipy import interpolate, ndimage
from skimage import draw, measure

from ..domain.mask_latent import MaskLatent, MaskSource
from ..errors import DomainError
from .latent import encode_masks
from .training import SegmenterCheckpoint

logger = logging.getLogger(__name__)

MAX_PERTURBATIONS = 200
MAX_ATTEMPTS_PER_MASK = 100
_SPLINE_SAMPLES = 400
_MIN_TRACEABLE_PIXELS = 3
_ATTEMPTS_PER_SHIFT_STEP = 10


def _component_outline(component: NDArray[np.bool_]) -> NDArray[np.float64]:
    padded = np.pad(component, 1)
    contours = measure.find_contours(padded.astype(np.float64), 0.5)
    outline = max(contours, key=len)
    return np.asarray(outline[:-1] - 1.0, dtype=np.float64)


def _deform_component(
    component: NDArray[np.bool_],
    magnitude: float,
    control_points: int,
    rng: np.random.Generator,
) -> NDArray[np.bool_]:
    outline = _component_outline(component)
    center = outline.mean(axis=0)
    count = min(control_points, len(outline))
    picks = outline[np.linspace(0, len(outline), count, endpoint=False).astype(int)]
    scale = 1.0 + magnitude * rng.uniform(-1.0, 1.0, size=count)
    moved = center + (picks - center) * scale[:, None]
    closed = np.vstack([moved, moved[:1]])
    tck, _ = interpolate.splprep([closed[:, 0], closed[:, 1]], s=0, per=1, k=min(3, count - 1))
    rows, cols = interpolate.splev(np.linspace(0.0, 1.0, _SPLINE_SAMPLES), tck)
    out = np.zeros(component.shape, dtype=bool)
    rr, cc = draw.polygon(np.asarray(rows), np.asarray(cols), shape=component.shape)
    out[rr, cc] = True
    return out


def _shift_component(component: NDArray[np.bool_], reach: int, rng: np.random.Generator) -> NDArray[np.bool_]:
    offset = rng.integers(-reach, reach + 1, size=2)
    moved = ndimage.shift(component.astype(np.uint8), offset, order=0, mode="constant", cval=0)
    return np.asarray(moved > 0)


def _deform(
    labeled: NDArray[np.integer],
    num_components: int,
    magnitude: float,
    control_points: int,
    rng: np.random.Generator,
    shift_reach: int = 1,
) -> NDArray[np.uint8]:
    out = np.zeros(labeled.shape, dtype=bool)
    for label in range(1, num_components + 1):
        component = labeled == label
        if component.sum() < _MIN_TRACEABLE_PIXELS:
            out |= _shift_component(component, shift_reach, rng)
            continue
        out |= _deform_component(component, magnitude, control_points, rng)
    return out.astype(np.uint8)


def perturb_mask(
    mask: MaskLatent,
    magnitude: float,
    count: int,
    seed: int,
    *,
    segmenter: SegmenterCheckpoint,
    control_points: int = 12,
) -> list[MaskLatent]:
    """Return `count` smoothly deformed variants of `mask`.

    Each output keeps the connected-component count of the parent and a
    foreground area within ``±3·magnitude`` (relative) of it; for
    ``magnitude > 0`` all outputs are distinct from the parent and each other.
    `z` of every output is recomputed through `segmenter`.

    Args:
        mask: Parent mask.
        magnitude: Radial displacement as a share of the local radius, in [0, 1].
        count: Number of outputs; values above 200 are clamped.
        seed: Seed of the displacement draws.
        segmenter: Checkpoint used to encode the new masks.
        control_points: Control points per component contour.

    Raises:
        DomainError: For an empty mask, ``count < 1`` or magnitude outside [0, 1],
            or when `count` distinct valid variants cannot be drawn (a mask
            with more requested variants than free placements).
    """
    if mask.area == 0:
        raise DomainError(f"mask {mask.id} is empty")
    if count < 1:
        raise DomainError("perturb_mask count must be >= 1")
    if not 0.0 <= magnitude <= 1.0:
        raise DomainError(f"magnitude {magnitude} outside [0, 1]")
    if count > MAX_PERTURBATIONS:
        logger.warning("perturb_mask count %d clamped to %d", count, MAX_PERTURBATIONS)
        count = MAX_PERTURBATIONS

    parent = mask.mask.astype(np.uint8)
    if magnitude == 0.0:
        masks = [parent.copy() for _ in range(count)]
    else:
        masks = _draw_variants(parent, magnitude, count, seed, control_points, mask.id)

    codes = encode_masks(segmenter, masks)
    return [
        MaskLatent(
            id=f"{mask.id}~m{seed}.{i}",
            mask=m,
            z=codes[i],
            source=MaskSource.PERTURBED,
            parent_mask_id=mask.id,
        )
        for i, m in enumerate(masks)
    ]


def _draw_variants(
    parent: NDArray[np.uint8],
    magnitude: float,
    count: int,
    seed: int,
    control_points: int,
    mask_id: str,
) -> list[NDArray[np.uint8]]:
    labeled, num_components = measure.label(parent, connectivity=1, return_num=True)
    area = float(parent.sum())
    band = 3.0 * magnitude
    rng = np.random.default_rng(seed)
    seen = {parent.tobytes()}
    masks: list[NDArray[np.uint8]] = []
    for _ in range(count):
        for attempt in range(MAX_ATTEMPTS_PER_MASK):
            reach = 1 + attempt // _ATTEMPTS_PER_SHIFT_STEP
            candidate = _deform(labeled, num_components, magnitude, control_points, rng, shift_reach=reach)
            key = candidate.tobytes()
            if key in seen:
                continue
            if measure.label(candidate, connectivity=1, return_num=True)[1] != num_components:
                continue
            if abs(float(candidate.sum()) / area - 1.0) > band:
                continue
            seen.add(key)
            masks.append(candidate)
            break
        else:
            raise DomainError(f"could not draw a distinct valid perturbation of mask {mask_id}")
    return masks
