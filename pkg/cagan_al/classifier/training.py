# SPDX-License-Identifier: LGPL-3.0-or-later
# SPDX-FileNotice: Part of the cagan-active-learning project.

"""Classifier fine-tuning.

The class head is trained with the label-mode likelihood; a variance head, when
present, is trained jointly through the heteroscedastic logit-noise
likelihood: logits are corrupted with Gaussian noise of the predicted variance
and the likelihood is averaged over the noise draws.
"""

from __future__ import annotations

from collections.abc import Sequence
import logging
import math

import numpy as np
from numpy.typing import NDArray
import torch
import torch.nn.functional as F
from torch.utils.data import DataLoader, TensorDataset

from ..config import LabelMode
from ..domain.image_sample import ImageSample, stack_labels, stack_pixels
from ..errors import DomainError, ShapeError, TrainingError
from ..seeding import child_seed
from .checkpoint import ClassifierCheckpoint

logger = logging.getLogger(__name__)


def inverse_frequency_weights(samples: Sequence[ImageSample]) -> NDArray[np.float64]:
    """Return per-class weights proportional to 1 / positive count.

    Weights are normalised to mean 1 over the classes that occur; absent
    classes get weight 0.

    Raises:
        DomainError: If `samples` is empty.
    """
    if not samples:
        raise DomainError("inverse_frequency_weights needs samples")
    counts = stack_labels(list(samples)).sum(axis=0).astype(np.float64)
    weights = np.zeros_like(counts)
    present = counts > 0
    weights[present] = 1.0 / counts[present]
    weights[present] /= weights[present].mean()
    return weights


def _per_sample_nll(logits: torch.Tensor, labels: torch.Tensor, mode: LabelMode) -> torch.Tensor:
    if mode == "exclusive":
        return F.cross_entropy(logits, labels.argmax(dim=1), reduction="none")
    return F.binary_cross_entropy_with_logits(logits, labels, reduction="none")


def _weighted_mean(
    nll: torch.Tensor, labels: torch.Tensor, mode: LabelMode, class_weights: torch.Tensor | None
) -> torch.Tensor:
    if class_weights is None:
        return nll.mean()
    if mode == "exclusive":
        return (nll * class_weights[labels.argmax(dim=1)]).mean()
    return (nll * class_weights[None, :]).mean()


def heteroscedastic_loss(
    logits: torch.Tensor,
    log_var: torch.Tensor | None,
    labels: torch.Tensor,
    mode: LabelMode,
    *,
    samples: int = 10,
    class_weights: torch.Tensor | None = None,
) -> torch.Tensor:
    """Return the (optionally class-weighted) negative log-likelihood.

    With ``log_var`` the likelihood is ``log mean_t p(y | logits + sigma * eps_t)``
    over `samples` standard-normal draws; without it the plain likelihood.

    Raises:
        ShapeError: If logits, labels and log_var differ in shape.
    """
    if logits.shape != labels.shape or (log_var is not None and log_var.shape != logits.shape):
        raise ShapeError(f"logits {tuple(logits.shape)} do not match labels {tuple(labels.shape)}")
    if log_var is None:
        return _weighted_mean(_per_sample_nll(logits, labels, mode), labels, mode, class_weights)
    sigma = torch.exp(0.5 * log_var)
    draws = logits[None] + sigma[None] * torch.randn((samples, *logits.shape), dtype=logits.dtype)
    nll = torch.stack([_per_sample_nll(d, labels, mode) for d in draws])
    nll = -(torch.logsumexp(-nll, dim=0) - math.log(samples))
    return _weighted_mean(nll, labels, mode, class_weights)


def finetune(
    checkpoint: ClassifierCheckpoint,
    samples: Sequence[ImageSample],
    *,
    epochs: int,
    seed: int,
    freeze: str = "none",
    class_weights: NDArray[np.float64] | None = None,
    round_index: int | None = None,
) -> ClassifierCheckpoint:
    """Return a copy of `checkpoint` trained on `samples`.

    Args:
        checkpoint: Starting weights; left untouched.
        samples: Labeled pool (real and synthetic).
        epochs: Passes over the pool; 0 returns the weights unchanged.
        seed: Seed of batch order, masking and likelihood noise.
        freeze: ``none``, ``head`` or ``last_block``; only those parameters change.
        class_weights: Optional per-class loss weights (see `inverse_frequency_weights`).
        round_index: AL round recorded on the result.

    Raises:
        DomainError: For an empty pool.
        ShapeError: If label width or image side differ from the checkpoint.
        TrainingError: If an exclusive-mode pool holds a single class.
    """
    if not samples:
        raise DomainError("finetune needs at least one sample")
    if epochs < 0:
        raise DomainError("epochs must be non-negative")
    labels_np = stack_labels(list(samples))
    if labels_np.shape[1] != checkpoint.num_classes:
        raise ShapeError(f"labels have {labels_np.shape[1]} classes, classifier has {checkpoint.num_classes}")
    if checkpoint.label_mode == "exclusive" and int((labels_np.sum(axis=0) > 0).sum()) < 2:
        raise TrainingError("exclusive-mode pool holds a single class; the classifier cannot learn a boundary")
    pixels_np = stack_pixels(list(samples))
    if pixels_np.shape[-1] != checkpoint.side:
        raise ShapeError(f"image side {pixels_np.shape[-1]} != classifier side {checkpoint.side}")

    result = checkpoint.copy()
    if round_index is not None:
        result = result.at_round(round_index)
    if epochs == 0:
        return result

    hyper = checkpoint.config
    backbone = result.backbone
    weights_t = None if class_weights is None else torch.as_tensor(class_weights, dtype=torch.float32)
    stream = child_seed(seed, "finetune", result.round_index)
    loader = DataLoader(
        TensorDataset(torch.from_numpy(pixels_np), torch.from_numpy(labels_np)),
        batch_size=hyper.batch,
        shuffle=True,
        generator=torch.Generator().manual_seed(stream),
    )
    trainable = backbone.trainable_parameters(freeze)
    optimizer = torch.optim.Adam(trainable, lr=hyper.lr)
    trace: list[float] = []
    backbone.set_mc_active(False)
    with torch.random.fork_rng(devices=[]):
        torch.manual_seed(stream)
        backbone.train()
        for epoch in range(epochs):
            total = 0.0
            for x, y in loader:
                output = backbone(x)
                loss = heteroscedastic_loss(
                    output.logits,
                    output.log_var,
                    y,
                    checkpoint.label_mode,
                    samples=hyper.heteroscedastic_samples,
                    class_weights=weights_t,
                )
                for param in backbone.parameters():
                    param.grad = None
                loss.backward()
                optimizer.step()
                total += float(loss.item()) * x.shape[0]
            trace.append(total / len(samples))
            logger.debug("classifier epoch %d loss %.5f", epoch, trace[-1])
    backbone.eval()

    if len(trace) > 1 and not trace[-1] < trace[0]:
        logger.warning("fine-tuning made no progress: loss %.5f -> %.5f over %d epochs", trace[0], trace[-1], epochs)
    result.metrics = {"loss_trace": trace, "epochs": epochs, "freeze": freeze, "pool_size": len(samples)}
    logger.info("fine-tuned on %d samples for %d epochs (freeze=%s)", len(samples), epochs, freeze)
    return result
