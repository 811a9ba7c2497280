# SPDX-License-Identifier: LGPL-3.0-or-later
# SPDX-FileNotice: Part of the cagan-active-learning project.

"""Lung segmenter, bottleneck latent codes and mask perturbation."""

from .latent import encode_masks, extract_latent, latent_for_sample
from .mask_perturb import perturb_mask
from .network import Segmenter
from .training import SegmenterCheckpoint, dice_score, load_segmenter, save_segmenter, train_segmenter

__all__ = [
    "Segmenter",
    "SegmenterCheckpoint",
    "dice_score",
    "encode_masks",
    "extract_latent",
    "latent_for_sample",
    "load_segmenter",
    "perturb_mask",
    "save_segmenter",
    "train_segmenter",
]
