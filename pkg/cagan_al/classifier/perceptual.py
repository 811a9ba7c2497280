# SPDX-License-Identifier: LGPL-3.0-or-later
# SPDX-FileNotice: Part of the cagan-active-learning project.

"""Frozen classifier features for the generator's perceptual term."""

from __future__ import annotations

import copy

import torch

from ..ports.backbone_port import Backbone
from .checkpoint import ClassifierCheckpoint


class ClassifierFeatureExtractor:
    """`PerceptualExtractor` adapter over a frozen copy of a classifier backbone.

    Gradients flow to the input images but never to the copied weights.
    """

    def __init__(self, checkpoint: ClassifierCheckpoint, block: int = 2) -> None:
        self._backbone: Backbone = copy.deepcopy(checkpoint.backbone)
        self._backbone.eval()
        self._backbone.set_mc_active(False)
        for param in self._backbone.parameters():
            param.requires_grad_(False)
        self.block = block

    def __call__(self, images: torch.Tensor) -> torch.Tensor:
        return self._backbone.block_features(images, self.block)
