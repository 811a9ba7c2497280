# SPDX-License-Identifier: LGPL-3.0-or-later
# SPDX-FileNotice: Part of the cagan-active-learning project.

"""Monte-Carlo forward passes with stochastic masking active.

The Bayesian view of a classifier is the same set of weights with its
stochastic masking switched on at inference. Each pass yields class
probabilities and, from the variance head, a per-class predicted variance.
The head predicts log-variance of the logits; by default it is mapped to
probability space with the delta method, ``var_p = (dp/dlogit)^2 * var_logit``.
"""

from __future__ import annotations

from collections.abc import Sequence
import logging
from typing import Literal

import numpy as np
from numpy.typing import NDArray
import torch

from ..classifier.checkpoint import ClassifierCheckpoint
from ..domain.image_sample import ImageSample, stack_pixels
from ..errors import CapabilityError, DomainError, ShapeError
from ..seeding import child_seed

logger = logging.getLogger(__name__)

MC_BATCH = 256

AleatoricSpace = Literal["probability", "logit"]


def _probabilities(logits: torch.Tensor, label_mode: str) -> torch.Tensor:
    if label_mode == "exclusive":
        return torch.softmax(logits, dim=1)
    return torch.sigmoid(logits)


def mc_predict(
    checkpoint: ClassifierCheckpoint,
    samples: Sequence[ImageSample],
    passes: int,
    seed: int,
    *,
    epistemic_only: bool = False,
    aleatoric_space: AleatoricSpace = "probability",
) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """Run `passes` stochastic forward passes over `samples`.

    Args:
        checkpoint: Classifier whose masking layers are switched on for the passes.
        samples: Images to score.
        passes: Number of passes T (>= 2).
        seed: Seed of the masking draws.
        epistemic_only: Use zero predicted variance instead of the variance head.
        aleatoric_space: Express the predicted variance for probabilities or logits.

    Returns:
        ``(probabilities, variances)``, both shaped (T, N, C).

    Raises:
        DomainError: If ``passes < 2``.
        CapabilityError: If the backbone has no variance head and `epistemic_only` is off.
        ShapeError: If image sides differ from the classifier's.
    """
    if passes < 2:
        raise DomainError(f"mc_predict needs at least 2 passes, got {passes}")
    backbone = checkpoint.backbone
    if not backbone.has_variance_head and not epistemic_only:
        raise CapabilityError("classifier has no variance head; enable uncertainty.epistemic_only to score anyway")
    if epistemic_only:
        logger.warning("epistemic-only scoring: aleatoric variance taken as 0")
    count = len(samples)
    shape = (passes, count, checkpoint.num_classes)
    probs = np.zeros(shape, dtype=np.float64)
    variances = np.zeros(shape, dtype=np.float64)
    if count == 0:
        return probs, variances
    pixels = stack_pixels(list(samples))
    if pixels.shape[-1] != checkpoint.side:
        raise ShapeError(f"image side {pixels.shape[-1]} != classifier side {checkpoint.side}")

    backbone.eval()
    backbone.set_mc_active(True)
    try:
        with torch.random.fork_rng(devices=[]), torch.no_grad():
            torch.manual_seed(child_seed(seed, "mc_predict"))
            for start in range(0, count, MC_BATCH):
                chunk = torch.from_numpy(pixels[start : start + MC_BATCH])
                stop = start + chunk.shape[0]
                for t in range(passes):
                    output = backbone(chunk)
                    logits = output.logits.double()
                    p = _probabilities(logits, checkpoint.label_mode)
                    probs[t, start:stop] = p.numpy()
                    if epistemic_only or output.log_var is None:
                        continue
                    logit_var = torch.exp(output.log_var.double())
                    if aleatoric_space == "probability":
                        logit_var = (p * (1.0 - p)) ** 2 * logit_var
                    variances[t, start:stop] = logit_var.numpy()
    finally:
        backbone.set_mc_active(False)
    return probs, variances
