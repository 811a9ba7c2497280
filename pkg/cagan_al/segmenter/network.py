# SPDX-License-Identifier: LGPL-3.0-or-later
# SPDX-FileNotice: Part of the cagan-active-learning project.

"""U-Net style segmenter with a fully connected bottleneck.

Four 3x3 encoder convolutions, each followed by 2x2 max pooling, feed a dense
bottleneck of width Z whose activation is the latent code. The decoder mirrors
the encoder with nearest-neighbour upsampling, skip concatenation and 3x3
convolutions, ending in a sigmoid probability map of the input side.
"""

from __future__ import annotations

from typing import Any

import torch
from torch import nn
import torch.nn.functional as F

from ..errors import ShapeError

DEPTH = 4


class Segmenter(nn.Module):
    """Segmenter network; `forward` returns ``(probabilities, z)``."""

    def __init__(self, side: int, *, latent_dim: int = 256, filters: int = 64) -> None:
        super().__init__()
        if side % (2**DEPTH):
            raise ShapeError(f"segmenter side must be a multiple of {2**DEPTH}, got {side}")
        self.side = side
        self.latent_dim = latent_dim
        self.filters = filters
        self.encoder = nn.ModuleList(
            nn.Conv2d(1 if i == 0 else filters, filters, kernel_size=3, padding=1) for i in range(DEPTH)
        )
        self.bottom = side // (2**DEPTH)
        flat = filters * self.bottom * self.bottom
        self.to_latent = nn.Linear(flat, latent_dim)
        self.from_latent = nn.Linear(latent_dim, flat)
        self.decoder = nn.ModuleList(nn.Conv2d(2 * filters, filters, kernel_size=3, padding=1) for _ in range(DEPTH))
        self.head = nn.Conv2d(filters, 1, kernel_size=1)

    def spec(self) -> dict[str, Any]:
        """Return the layer layout recorded next to the weights."""
        return {
            "side": self.side,
            "latent_dim": self.latent_dim,
            "filters": self.filters,
            "encoder_layers": DEPTH,
            "decoder_layers": DEPTH,
            "kernel": 3,
        }

    def _encode(self, x: torch.Tensor) -> tuple[torch.Tensor, list[torch.Tensor]]:
        if x.ndim != 4 or x.shape[1] != 1 or x.shape[-1] != self.side or x.shape[-2] != self.side:
            raise ShapeError(f"expected (N, 1, {self.side}, {self.side}) input, got {tuple(x.shape)}")
        skips = []
        h = x
        for conv in self.encoder:
            h = F.relu(conv(h))
            skips.append(h)
            h = F.max_pool2d(h, 2)
        z = self.to_latent(h.flatten(1))
        return z, skips

    def encode(self, x: torch.Tensor) -> torch.Tensor:
        """Return the bottleneck activation for a batch."""
        return self._encode(x)[0]

    def forward(self, x: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        z, skips = self._encode(x)
        h = F.relu(self.from_latent(z)).view(-1, self.filters, self.bottom, self.bottom)
        for conv, skip in zip(self.decoder, reversed(skips), strict=True):
            h = F.interpolate(h, scale_factor=2, mode="nearest")
            h = F.relu(conv(torch.cat([h, skip], dim=1)))
        return torch.sigmoid(self.head(h)), z
