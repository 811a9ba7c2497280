# SPDX-License-Identifier: LGPL-3.0-or-later
# SPDX-FileNotice: Part of the cagan-active-learning project.

"""Class-aware GAN: networks, losses, training, generation and the plain baseline."""

from .generation import generate, generate_batch, generate_mask_variants
from .losses import (
    LossWeights,
    adv_loss_wgan_gp,
    classification_loss,
    cls_loss_fake,
    cls_loss_real,
    content_loss,
    gradient_penalty,
)
from .nmi import normalized_mutual_information, soft_nmi
from .plain_gan import PlainGanCheckpoint, generate_plain, load_plain_gan, save_plain_gan, train_plain_gan
from .training import CaganCheckpoint, class_head_accuracy, load_cagan, save_cagan, train_cagan

__all__ = [
    "CaganCheckpoint",
    "LossWeights",
    "PlainGanCheckpoint",
    "adv_loss_wgan_gp",
    "class_head_accuracy",
    "classification_loss",
    "cls_loss_fake",
    "cls_loss_real",
    "content_loss",
    "generate",
    "generate_batch",
    "generate_mask_variants",
    "generate_plain",
    "gradient_penalty",
    "load_cagan",
    "load_plain_gan",
    "normalized_mutual_information",
    "save_cagan",
    "save_plain_gan",
    "soft_nmi",
    "train_cagan",
    "train_plain_gan",
]
