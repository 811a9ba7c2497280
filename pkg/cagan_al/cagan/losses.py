# SPDX-License-Identifier: LGPL-3.0-or-later
# SPDX-FileNotice: Part of the cagan-active-learning project.

"""Loss terms of the class-aware GAN objective.

Critic objective: ``L_D = -L_adv + lambda_cls * L_cls_real``.
Generator objective: ``L_G = L_adv + lambda_cls * L_cls_fake + lambda_content * L_content``.
"""

from __future__ import annotations

from collections.abc import Callable
from dataclasses import dataclass
from typing import Literal

import numpy as np
import torch
import torch.nn.functional as F

from ..config import CaganConfig
from ..errors import ConfigurationError, NumericError, ShapeError
from ..ports.backbone_port import PerceptualExtractor
from .networks import per_sample_critic
from .nmi import normalized_mutual_information, soft_nmi

LabelMode = Literal["multilabel", "exclusive"]
Critic = Callable[[torch.Tensor], torch.Tensor]


@dataclass(frozen=True)
class LossWeights:
    """Weights of the composite objective."""

    lambda_cls: float = 1.0
    lambda_content: float = 10.0
    lambda_gp: float = 10.0
    w_perc: float = 1.0
    w_mse: float = 1.0
    w_nmi: float = 1.0
    nmi_eps: float = 1e-4

    def __post_init__(self) -> None:
        for name in ("lambda_cls", "lambda_content", "lambda_gp", "w_perc", "w_mse", "w_nmi"):
            if getattr(self, name) < 0:
                raise ConfigurationError(name, "loss weights must be non-negative")
        if self.nmi_eps <= 0:
            raise ConfigurationError("nmi_eps", "must be > 0")

    @classmethod
    def from_config(cls, config: CaganConfig) -> LossWeights:
        """Build weights from the cagan configuration section."""
        return cls(
            lambda_cls=config.lambda_cls,
            lambda_content=config.lambda_content,
            lambda_gp=config.lambda_gp,
            w_perc=config.w_perc,
            w_mse=config.w_mse,
            w_nmi=config.w_nmi,
            nmi_eps=config.nmi_eps,
        )

    def as_dict(self) -> dict[str, float]:
        """Return a JSON-friendly mapping."""
        return dict(self.__dict__)


def _check_finite(head: str, *tensors: torch.Tensor) -> None:
    for tensor in tensors:
        if not bool(torch.isfinite(tensor).all()):
            raise NumericError(head, "non-finite values")


def gradient_penalty(
    critic: Critic, real: torch.Tensor, fake: torch.Tensor, *, alpha: torch.Tensor | None = None
) -> torch.Tensor:
    """Return ``mean((||grad D(x_hat)||_2 - 1)^2)`` over real/fake interpolates.

    One interpolate is drawn per real/fake pair, uniformly on the segment
    between them. The critic value of a sample is the mean of its patch map.
    The returned tensor keeps its graph so the penalty trains the critic.
    """
    if real.shape != fake.shape:
        raise ShapeError(f"real {tuple(real.shape)} and fake {tuple(fake.shape)} differ")
    if alpha is None:
        alpha = torch.rand(real.shape[0], *([1] * (real.ndim - 1)), dtype=real.dtype, device=real.device)
    interpolates = (alpha * real.detach() + (1.0 - alpha) * fake.detach()).requires_grad_(True)
    values = per_sample_critic(critic(interpolates))
    (grads,) = torch.autograd.grad(values.sum(), interpolates, create_graph=True)
    norms = grads.reshape(real.shape[0], -1).norm(2, dim=1)
    return ((norms - 1.0) ** 2).mean()


def adv_loss_wgan_gp(
    d_src_real: torch.Tensor, d_src_fake: torch.Tensor, gp_term: torch.Tensor | float, weights: LossWeights
) -> torch.Tensor:
    """Return ``mean(d_src_real) - mean(d_src_fake) - lambda_gp * gp_term``.

    Raises:
        ShapeError: If the two patch maps differ in shape.
        NumericError: Naming ``d_src_real``, ``d_src_fake`` or ``gp`` when non-finite.
    """
    if d_src_real.shape != d_src_fake.shape:
        raise ShapeError(f"patch maps differ: {tuple(d_src_real.shape)} vs {tuple(d_src_fake.shape)}")
    gp = torch.as_tensor(gp_term, dtype=d_src_real.dtype)
    _check_finite("d_src_real", d_src_real)
    _check_finite("d_src_fake", d_src_fake)
    _check_finite("gp", gp)
    return d_src_real.mean() - d_src_fake.mean() - weights.lambda_gp * gp


def classification_loss(logits: torch.Tensor, labels: torch.Tensor, mode: LabelMode) -> torch.Tensor:
    """Return the class-head loss shared by the real and fake terms.

    Exclusive mode is the softmax negative log-likelihood of the labelled
    class; multilabel mode is the mean per-class binary cross-entropy.

    Raises:
        ShapeError: If the logit width differs from the label width.
        NumericError: For non-finite logits.
    """
    if logits.ndim != 2 or logits.shape != labels.shape:
        raise ShapeError(f"logits {tuple(logits.shape)} do not match labels {tuple(labels.shape)}")
    _check_finite("d_cls", logits)
    if mode == "exclusive":
        return F.cross_entropy(logits, labels.argmax(dim=1))
    return F.binary_cross_entropy_with_logits(logits, labels.to(logits.dtype))


def cls_loss_real(d_cls_logits: torch.Tensor, labels: torch.Tensor, mode: LabelMode = "multilabel") -> torch.Tensor:
    """Return the class-head loss on real images (trains the critic)."""
    return classification_loss(d_cls_logits, labels, mode)


def cls_loss_fake(d_cls_logits: torch.Tensor, targets: torch.Tensor, mode: LabelMode = "multilabel") -> torch.Tensor:
    """Return the class-head loss on generated images against their requested targets (trains G)."""
    return classification_loss(d_cls_logits, targets, mode)


def content_loss(
    x: torch.Tensor,
    y: torch.Tensor,
    feat: PerceptualExtractor | None,
    weights: LossWeights,
    *,
    bins: int = 64,
    soft: bool = True,
) -> torch.Tensor:
    """Return ``w_perc * perceptual + w_mse * MSE + w_nmi / (NMI + nmi_eps)``.

    The perceptual term is the mean squared difference of `feat` activations;
    it is skipped when `feat` is None or ``w_perc`` is 0. The NMI term is
    averaged over the batch; ``soft=False`` uses the exact histogram NMI and
    carries no gradient.

    Raises:
        ShapeError: If `x` and `y` differ in shape.
    """
    if x.shape != y.shape:
        raise ShapeError(f"content_loss inputs differ: {tuple(x.shape)} vs {tuple(y.shape)}")
    total = weights.w_mse * F.mse_loss(x, y)
    if feat is not None and weights.w_perc > 0:
        total = total + weights.w_perc * (feat(x) - feat(y)).pow(2).mean()
    if weights.w_nmi > 0:
        if soft:
            nmi = soft_nmi(x, y, bins)
        else:
            batch_x = x.detach().reshape(x.shape[0], -1).cpu().numpy()
            batch_y = y.detach().reshape(y.shape[0], -1).cpu().numpy()
            nmi = torch.tensor(
                np.array([normalized_mutual_information(a, b, bins) for a, b in zip(batch_x, batch_y, strict=True)]),
                dtype=x.dtype,
            )
        total = total + weights.w_nmi * (1.0 / (nmi + weights.nmi_eps)).mean()
    return total
