# SPDX-License-Identifier: LGPL-3.0-or-later
# SPDX-FileNotice: Part of the cagan-active-learning project.

"""Classifier backbone and perceptual-feature ports.

Any network returning ``(features, logits, log_var)`` can drive fine-tuning,
Monte-Carlo scoring and the generator's perceptual term. ``log_var`` is
``None`` for backbones without a variance head.
"""

from __future__ import annotations

from collections.abc import Iterator, Mapping
from typing import Any, NamedTuple, Protocol

import torch
from torch import nn


class BackboneOutput(NamedTuple):
    """Forward result of a backbone."""

    features: torch.Tensor
    logits: torch.Tensor
    log_var: torch.Tensor | None


class Backbone(Protocol):
    """Port interface for classifier backbones."""

    num_classes: int
    has_variance_head: bool

    def __call__(self, x: torch.Tensor) -> BackboneOutput:
        """Run a forward pass on an (N, 1, S, S) batch."""

    def set_mc_active(self, active: bool) -> None:
        """Switch stochastic masking on or off independently of train/eval mode."""

    def block_features(self, x: torch.Tensor, block: int) -> torch.Tensor:
        """Return the activation after conv block `block` (1-based)."""

    def trainable_parameters(self, freeze: str) -> list[nn.Parameter]:
        """Return the parameters updated under freeze mode none|head|last_block."""

    def parameters(self, recurse: bool = True) -> Iterator[nn.Parameter]:
        """Return all parameters."""

    def state_dict(self) -> Mapping[str, Any]:
        """Return the weights."""

    def load_state_dict(self, state_dict: Mapping[str, Any], strict: bool = True) -> Any:
        """Load weights."""

    def train(self, mode: bool = True) -> Any:
        """Enter training mode."""

    def eval(self) -> Any:
        """Enter inference mode."""


class PerceptualExtractor(Protocol):
    """Frozen feature map used by the content loss."""

    def __call__(self, images: torch.Tensor) -> torch.Tensor:
        """Return features of an (N, 1, S, S) batch."""
