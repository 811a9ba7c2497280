# SPDX-License-Identifier: LGPL-3.0-or-later
# SPDX-FileNotice: Part of the cagan-active-learning project.

"""Normalized mutual information of two images.

``NMI = (H(x) + H(y)) / H(x, y)`` over intensities quantised into B bins,
with entropies in nats. The value lies in [1, 2] and is 2 for identical
non-constant images. When the joint entropy is 0 (both images constant) the
NMI is reported as 0 and the content loss falls back to its epsilon guard.

`normalized_mutual_information` is the exact numpy form. Entropies are summed
over sorted probabilities, which makes the result exactly symmetric and exactly
invariant to a bin relabelling applied to both images. `soft_nmi` is the
differentiable triangular-kernel histogram used during training.
"""

from __future__ import annotations

import math

import numpy as np
from numpy.typing import NDArray
import torch

from ..errors import ShapeError


def quantize_bins(image: NDArray[np.floating], bins: int) -> NDArray[np.int64]:
    """Map [0, 1] intensities to bin indices ``clip(floor(v * bins), 0, bins - 1)``."""
    return np.clip(np.floor(np.asarray(image, dtype=np.float64) * bins), 0, bins - 1).astype(np.int64)


def _entropy(counts: NDArray[np.int64], total: int) -> float:
    probs = np.sort(counts[counts > 0].astype(np.float64) / total)
    return -math.fsum(float(p) * math.log(float(p)) for p in probs)


def entropies_from_bins(qx: NDArray[np.int64], qy: NDArray[np.int64], bins: int) -> tuple[float, float, float]:
    """Return ``(H(x), H(y), H(x, y))`` of pre-quantised images."""
    if qx.shape != qy.shape:
        raise ShapeError(f"NMI inputs differ in shape: {qx.shape} vs {qy.shape}")
    flat_x = qx.ravel()
    flat_y = qy.ravel()
    total = flat_x.size
    hx = _entropy(np.bincount(flat_x, minlength=bins), total)
    hy = _entropy(np.bincount(flat_y, minlength=bins), total)
    hxy = _entropy(np.bincount(flat_x * bins + flat_y, minlength=bins * bins), total)
    return hx, hy, hxy


def normalized_mutual_information(x: NDArray[np.floating], y: NDArray[np.floating], bins: int = 64) -> float:
    """Return the exact histogram NMI of two same-shape images in [0, 1]."""
    hx, hy, hxy = entropies_from_bins(quantize_bins(x, bins), quantize_bins(y, bins), bins)
    if hxy == 0.0:
        return 0.0
    return (hx + hy) / hxy


def soft_nmi(x: torch.Tensor, y: torch.Tensor, bins: int = 64) -> torch.Tensor:
    """Return a differentiable per-sample NMI of two (N, ...) image batches."""
    if x.shape != y.shape:
        raise ShapeError(f"NMI inputs differ in shape: {tuple(x.shape)} vs {tuple(y.shape)}")
    centers = (torch.arange(bins, dtype=x.dtype, device=x.device) + 0.5) / bins

    def weights(v: torch.Tensor) -> torch.Tensor:
        flat = v.flatten(1).clamp(0.0, 1.0)[:, :, None]
        w = torch.relu(1.0 - (flat - centers).abs() * bins)
        return w / w.sum(dim=2, keepdim=True).clamp_min(1e-12)

    wx = weights(x)
    wy = weights(y)
    pixels = wx.shape[1]
    joint = torch.einsum("npb,npc->nbc", wx, wy) / pixels
    px = joint.sum(dim=2)
    py = joint.sum(dim=1)

    def entropy(p: torch.Tensor) -> torch.Tensor:
        flat = p.flatten(1)
        return -(flat * torch.log(flat.clamp_min(1e-12))).sum(dim=1)

    hxy = entropy(joint)
    nmi = (entropy(px) + entropy(py)) / hxy.clamp_min(1e-12)
    return torch.where(hxy > 1e-9, nmi, torch.zeros_like(nmi))
