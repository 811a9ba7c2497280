# SPDX-License-Identifier: LGPL-3.0-or-later
# SPDX-FileNotice: Part of the cagan-active-learning project.

"""Classifier backbones.

`ToyCnn` is the desk-scale backbone: four 3x3 convolution blocks with 2x2 max
pooling, global average pooling, a dense class head and a dense log-variance
head. Stochastic masking sits after the penultimate block; it is active in
training mode and, independently of the mode, whenever `set_mc_active(True)`
was called.

Other backbones are loaded from a ``module:factory`` path. The factory is
called as ``factory(num_classes=..., side=..., masking_rate=...)`` and must
return an object satisfying the `Backbone` port.
"""

from __future__ import annotations

import importlib
import logging
from typing import Any, cast

import torch
from torch import nn
import torch.nn.functional as F

from ..config import ClassifierConfig
from ..errors import ConfigurationError, ShapeError
from ..ports.backbone_port import Backbone, BackboneOutput

logger = logging.getLogger(__name__)

BLOCKS = 4
FREEZE_MODES = ("none", "head", "last_block")


class StochasticMask(nn.Module):
    """Element-wise Bernoulli masking with inverted scaling."""

    def __init__(self, rate: float) -> None:
        super().__init__()
        if not 0.0 <= rate < 1.0:
            raise ConfigurationError("uncertainty.masking_rate", f"must be in [0, 1), got {rate}")
        self.rate = rate
        self.mc_active = False

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        if self.rate == 0.0 or not (self.training or self.mc_active):
            return x
        return F.dropout(x, p=self.rate, training=True)


class ToyCnn(nn.Module):
    """Four-block CNN with class and log-variance heads."""

    def __init__(
        self,
        side: int,
        num_classes: int,
        *,
        widths: tuple[int, int, int, int] = (16, 32, 64, 64),
        masking_rate: float = 0.2,
        variance_head: bool = True,
    ) -> None:
        super().__init__()
        if side % (2**BLOCKS):
            raise ShapeError(f"classifier side must be a multiple of {2**BLOCKS}, got {side}")
        if num_classes < 1:
            raise ConfigurationError("data.num_classes", "classifier needs at least one class")
        self.side = side
        self.num_classes = num_classes
        self.widths = tuple(widths)
        self.has_variance_head = variance_head
        channels = (1, *self.widths)
        self.blocks = nn.ModuleList(
            nn.Conv2d(channels[i], channels[i + 1], kernel_size=3, padding=1) for i in range(BLOCKS)
        )
        self.mask = StochasticMask(masking_rate)
        self.head = nn.Linear(self.widths[-1], num_classes)
        self.var_head = nn.Linear(self.widths[-1], num_classes) if variance_head else None

    def spec(self) -> dict[str, Any]:
        """Return the layer layout recorded next to the weights."""
        return {
            "side": self.side,
            "num_classes": self.num_classes,
            "widths": list(self.widths),
            "masking_rate": self.mask.rate,
            "variance_head": self.has_variance_head,
        }

    def set_mc_active(self, active: bool) -> None:
        """Switch inference-time stochastic masking on or off."""
        self.mask.mc_active = active

    def _check(self, x: torch.Tensor) -> None:
        if x.ndim != 4 or x.shape[1] != 1 or x.shape[-2:] != (self.side, self.side):
            raise ShapeError(f"expected (N, 1, {self.side}, {self.side}) input, got {tuple(x.shape)}")

    def block_features(self, x: torch.Tensor, block: int) -> torch.Tensor:
        """Return the activation after conv block `block` (1-based, before pooling)."""
        if not 1 <= block <= BLOCKS:
            raise ShapeError(f"block must be in 1..{BLOCKS}, got {block}")
        self._check(x)
        h = x
        for index, conv in enumerate(self.blocks[:block]):
            if index:
                h = F.max_pool2d(h, 2)
            h = F.relu(conv(h))
            if index == BLOCKS - 2:
                h = self.mask(h)
        return h

    def forward(self, x: torch.Tensor) -> BackboneOutput:
        h = F.max_pool2d(self.block_features(x, BLOCKS), 2)
        features = h.mean(dim=(2, 3))
        logits = self.head(features)
        log_var = self.var_head(features) if self.var_head is not None else None
        return BackboneOutput(features=features, logits=logits, log_var=log_var)

    def trainable_parameters(self, freeze: str) -> list[nn.Parameter]:
        """Return the parameters updated under `freeze`."""
        if freeze not in FREEZE_MODES:
            raise ConfigurationError("classifier.freeze_after_round0", f"unknown freeze mode {freeze!r}")
        heads: list[nn.Parameter] = list(self.head.parameters())
        if self.var_head is not None:
            heads += list(self.var_head.parameters())
        if freeze == "head":
            return heads
        if freeze == "last_block":
            return list(self.blocks[-1].parameters()) + heads
        return list(self.parameters())


def _import_factory(path: str) -> Any:
    module_name, _, attr = path.partition(":")
    if not module_name or not attr:
        raise ConfigurationError("classifier.backbone_factory", f"expected 'module:factory', got {path!r}")
    try:
        module = importlib.import_module(module_name)
    except ImportError as exc:
        raise ConfigurationError("classifier.backbone_factory", f"cannot import {module_name}: {exc}") from exc
    factory = getattr(module, attr, None)
    if not callable(factory):
        raise ConfigurationError("classifier.backbone_factory", f"{path} is not callable")
    return factory


def build_backbone(config: ClassifierConfig, *, side: int, num_classes: int, masking_rate: float) -> Backbone:
    """Instantiate the configured backbone (parameters drawn from the current torch stream).

    Raises:
        ConfigurationError: If a pluggable factory cannot be imported or returns a non-backbone.
    """
    if config.backbone == "toy_cnn":
        return cast(Backbone, ToyCnn(side, num_classes, widths=config.widths, masking_rate=masking_rate))
    assert config.backbone_factory is not None
    factory = _import_factory(config.backbone_factory)
    backbone = factory(num_classes=num_classes, side=side, masking_rate=masking_rate)
    for name in ("num_classes", "has_variance_head", "set_mc_active", "block_features", "trainable_parameters"):
        if not hasattr(backbone, name):
            raise ConfigurationError("classifier.backbone_factory", f"backbone lacks {name}")
    if backbone.num_classes != num_classes:
        raise ConfigurationError("classifier.backbone_factory", "backbone class count differs from the dataset")
    logger.info("loaded pluggable backbone %s", config.backbone_factory)
    return cast(Backbone, backbone)
