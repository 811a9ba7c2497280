# SPDX-License-Identifier: LGPL-3.0-or-later
# SPDX-FileNotice: Part of the cagan-active-learning project.

"""Generator and patch critic of the class-aware GAN."""

from __future__ import annotations

from typing import Literal

import torch
from torch import nn

from ..errors import ShapeError

NormKind = Literal["instance", "batch", "none"]

DISC_LAYERS = 6
_MIN_DOWNSAMPLE_SIDE = 8


def _norm(kind: NormKind, channels: int) -> nn.Module:
    if kind == "instance":
        return nn.InstanceNorm2d(channels, affine=True)
    if kind == "batch":
        return nn.BatchNorm2d(channels)
    return nn.Identity()


def replicate(code: torch.Tensor, side: int) -> torch.Tensor:
    """Tile an (N, K) code into an (N, K, side, side) feature stack."""
    return code[:, :, None, None].expand(-1, -1, side, side)


class ResidualBlock(nn.Module):
    """Pre-activation residual block of two 3x3 convolutions."""

    def __init__(self, channels: int) -> None:
        super().__init__()
        self.body = nn.Sequential(
            nn.InstanceNorm2d(channels, affine=True),
            nn.ReLU(),
            nn.Conv2d(channels, channels, kernel_size=3, padding=1),
            nn.InstanceNorm2d(channels, affine=True),
            nn.ReLU(),
            nn.Conv2d(channels, channels, kernel_size=3, padding=1),
        )

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return x + self.body(x)


class Generator(nn.Module):
    """G(x, code, target) -> image in [0, 1] of the input side.

    `code` is the mask latent (or a noise code for the unconditioned
    baseline); `target` is a one-hot class vector, absent when
    ``num_classes == 0``. Both are spatially replicated and concatenated to
    the input image.
    """

    def __init__(self, code_dim: int, num_classes: int, *, base_channels: int = 64, residual_blocks: int = 3) -> None:
        super().__init__()
        self.code_dim = code_dim
        self.num_classes = num_classes
        b = base_channels
        in_channels = 1 + code_dim + num_classes
        self.down = nn.Sequential(
            nn.Conv2d(in_channels, b, kernel_size=4, stride=2, padding=1),
            nn.InstanceNorm2d(b, affine=True),
            nn.ReLU(),
            nn.Conv2d(b, 2 * b, kernel_size=4, stride=2, padding=1),
            nn.InstanceNorm2d(2 * b, affine=True),
            nn.ReLU(),
            nn.Conv2d(2 * b, 4 * b, kernel_size=4, stride=2, padding=1),
            nn.InstanceNorm2d(4 * b, affine=True),
            nn.ReLU(),
        )
        self.residual = nn.Sequential(*(ResidualBlock(4 * b) for _ in range(residual_blocks)))
        self.up = nn.Sequential(
            nn.ConvTranspose2d(4 * b, 2 * b, kernel_size=4, stride=2, padding=1),
            nn.InstanceNorm2d(2 * b, affine=True),
            nn.ReLU(),
            nn.ConvTranspose2d(2 * b, b, kernel_size=4, stride=2, padding=1),
            nn.InstanceNorm2d(b, affine=True),
            nn.ReLU(),
            nn.ConvTranspose2d(b, b, kernel_size=4, stride=2, padding=1),
            nn.InstanceNorm2d(b, affine=True),
            nn.ReLU(),
        )
        self.out = nn.Conv2d(b, 1, kernel_size=3, padding=1)

    def forward(self, x: torch.Tensor, code: torch.Tensor, target: torch.Tensor | None = None) -> torch.Tensor:
        side = x.shape[-1]
        if side % 8:
            raise ShapeError(f"generator side must be a multiple of 8, got {side}")
        if code.shape[-1] != self.code_dim:
            raise ShapeError(f"code width {code.shape[-1]} != {self.code_dim}")
        parts = [x, replicate(code, side)]
        if self.num_classes:
            if target is None or target.shape[-1] != self.num_classes:
                raise ShapeError(f"target must be a width-{self.num_classes} one-hot batch")
            parts.append(replicate(target.to(x.dtype), side))
        h = self.residual(self.down(torch.cat(parts, dim=1)))
        return torch.sigmoid(self.out(self.up(h)))


def critic_widths(base: int) -> list[int]:
    """Return the six critic widths: doubling from `base`, last width held."""
    widths = [base * 2**i for i in range(DISC_LAYERS - 1)]
    return [*widths, widths[-1]]


class Discriminator(nn.Module):
    """Six-layer patch critic with a realness map head and a class head.

    Layers use 4x4 stride-2 convolutions while the feature side is at least 8
    and size-preserving 3x3 convolutions afterwards. The first layer has no
    normalisation.
    """

    def __init__(self, side: int, num_classes: int, *, base_channels: int = 64, norm: NormKind = "instance") -> None:
        super().__init__()
        self.num_classes = num_classes
        layers: list[nn.Module] = []
        in_channels = 1
        current = side
        for index, width in enumerate(critic_widths(base_channels)):
            if current >= _MIN_DOWNSAMPLE_SIDE:
                layers.append(nn.Conv2d(in_channels, width, kernel_size=4, stride=2, padding=1))
                current //= 2
            else:
                layers.append(nn.Conv2d(in_channels, width, kernel_size=3, stride=1, padding=1))
            if index:
                layers.append(_norm(norm, width))
            layers.append(nn.LeakyReLU(0.2))
            in_channels = width
        self.trunk = nn.Sequential(*layers)
        self.map_side = current
        self.src = nn.Conv2d(in_channels, 1, kernel_size=3, padding=1)
        self.cls = nn.Linear(in_channels * current * current, num_classes) if num_classes else None

    def forward(self, x: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor | None]:
        """Return ``(patch_map, class_logits)``; logits are None without a class head."""
        h = self.trunk(x)
        logits = self.cls(h.flatten(1)) if self.cls is not None else None
        return self.src(h), logits

    def critic(self, x: torch.Tensor) -> torch.Tensor:
        """Return the realness patch map only."""
        return self.src(self.trunk(x))


def per_sample_critic(patch_map: torch.Tensor) -> torch.Tensor:
    """Reduce an (N, 1, H, W) patch map, or (N,) critic values, to one value per sample."""
    return patch_map.reshape(patch_map.shape[0], -1).mean(dim=1)

