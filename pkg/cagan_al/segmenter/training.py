# SPDX-License-Identifier: LGPL-3.0-or-later
# SPDX-FileNotice: Part of the cagan-active-learning project.

"""Segmenter training and checkpoint persistence.

Checkpoint layout: ``segmenter/{weights.bin, spec.json, metrics.json}``.
"""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass, field
import json
import logging
from pathlib import Path
from typing import Any

import numpy as np
from numpy.typing import NDArray
import torch
from torch.utils.data import DataLoader, TensorDataset

from ..config import SegmenterConfig
from ..domain.image_sample import ImageSample, stack_pixels
from ..errors import CapabilityError, DataError, ShapeError
from ..seeding import torch_seeded
from .network import Segmenter

logger = logging.getLogger(__name__)

WEIGHTS_FILE = "weights.bin"
SPEC_FILE = "spec.json"
METRICS_FILE = "metrics.json"


@dataclass
class SegmenterCheckpoint:
    """A segmenter network with its training record."""

    network: Segmenter
    threshold: float = 0.5
    trained: bool = False
    metrics: dict[str, Any] = field(default_factory=dict)

    @property
    def side(self) -> int:
        """Return the image side the network was built for."""
        return self.network.side

    def require_usable(self, *, allow_untrained: bool = False) -> None:
        """Raise `CapabilityError` for an untrained network unless explicitly allowed."""
        if not self.trained and not allow_untrained:
            raise CapabilityError("segmenter is untrained; pass allow_untrained to use it anyway")


def dice_score(pred: NDArray[np.integer] | NDArray[np.bool_], target: NDArray[np.integer] | NDArray[np.bool_]) -> float:
    """Return the Dice overlap of two binary masks (1.0 when both are empty)."""
    a = np.asarray(pred).astype(bool)
    b = np.asarray(target).astype(bool)
    if a.shape != b.shape:
        raise ShapeError(f"dice_score shapes differ: {a.shape} vs {b.shape}")
    denom = int(a.sum()) + int(b.sum())
    if denom == 0:
        return 1.0
    return 2.0 * float(np.logical_and(a, b).sum()) / denom


def _mask_stack(samples: Sequence[ImageSample]) -> NDArray[np.float32]:
    missing = [s.id for s in samples if s.mask is None]
    if missing:
        raise DataError("samples without a ground-truth mask", missing)
    return np.stack([s.mask for s in samples if s.mask is not None]).astype(np.float32)[:, None, :, :]


def predict_masks(checkpoint: SegmenterCheckpoint, pixels: NDArray[np.float32]) -> NDArray[np.uint8]:
    """Return thresholded masks for an (N, 1, S, S) batch."""
    network = checkpoint.network
    network.eval()
    with torch.no_grad():
        probs, _ = network(torch.from_numpy(np.ascontiguousarray(pixels, dtype=np.float32)))
    return (probs[:, 0].numpy() >= checkpoint.threshold).astype(np.uint8)


def mean_dice(checkpoint: SegmenterCheckpoint, samples: Sequence[ImageSample]) -> float:
    """Return the mean Dice of predicted against ground-truth masks."""
    if not samples:
        return float("nan")
    targets = _mask_stack(samples)[:, 0]
    predicted = predict_masks(checkpoint, stack_pixels(list(samples)))
    return float(np.mean([dice_score(p, t) for p, t in zip(predicted, targets, strict=True)]))


def train_segmenter(
    samples: Sequence[ImageSample],
    hyper: SegmenterConfig,
    *,
    seed: int,
    val_samples: Sequence[ImageSample] = (),
) -> SegmenterCheckpoint:
    """Train a segmenter with per-pixel binary cross-entropy.

    Args:
        samples: Training images; each needs a ground-truth mask.
        hyper: Segmenter section of the run configuration.
        seed: Seed of initialisation and batch order.
        val_samples: Optional validation images for the Dice report.

    Raises:
        DataError: Listing ids of samples without a mask.
    """
    if not samples:
        raise DataError("train_segmenter needs at least one sample")
    masks = _mask_stack(samples)
    if val_samples:
        _mask_stack(val_samples)
    pixels = stack_pixels(list(samples))

    with torch_seeded(seed):
        network = Segmenter(pixels.shape[-1], latent_dim=hyper.latent_dim, filters=hyper.filters)
    checkpoint = SegmenterCheckpoint(network=network, threshold=hyper.threshold, trained=hyper.epochs > 0)
    baseline = mean_dice(checkpoint, val_samples) if val_samples else None

    loader = DataLoader(
        TensorDataset(torch.from_numpy(pixels), torch.from_numpy(masks)),
        batch_size=hyper.batch,
        shuffle=True,
        generator=torch.Generator().manual_seed(seed),
    )
    optimizer = torch.optim.Adam(network.parameters(), lr=hyper.lr)
    loss_fn = torch.nn.BCELoss()
    trace: list[float] = []
    for epoch in range(hyper.epochs):
        network.train()
        total = 0.0
        for x, y in loader:
            optimizer.zero_grad()
            probs, _ = network(x)
            loss = loss_fn(probs, y)
            loss.backward()
            optimizer.step()
            total += float(loss.item()) * x.shape[0]
        trace.append(total / len(pixels))
        logger.debug("segmenter epoch %d loss %.5f", epoch, trace[-1])

    val_dice = mean_dice(checkpoint, val_samples) if val_samples else None
    checkpoint.metrics = {
        "loss_trace": trace,
        "epochs": hyper.epochs,
        "seed": seed,
        "val_dice": val_dice,
        "untrained_val_dice": baseline,
    }
    if val_dice is not None and hyper.epochs > 0 and val_dice < hyper.dice_gate:
        logger.warning("segmenter validation Dice %.3f is below the %.2f gate", val_dice, hyper.dice_gate)
    logger.info("segmenter trained: %d epochs, validation Dice %s", hyper.epochs, val_dice)
    return checkpoint


def save_segmenter(checkpoint: SegmenterCheckpoint, directory: Path) -> None:
    """Write ``weights.bin``, ``spec.json`` and ``metrics.json``."""
    directory.mkdir(parents=True, exist_ok=True)
    torch.save(checkpoint.network.state_dict(), directory / WEIGHTS_FILE)
    spec = checkpoint.network.spec() | {"threshold": checkpoint.threshold, "trained": checkpoint.trained}
    (directory / SPEC_FILE).write_text(json.dumps(spec, indent=2, sort_keys=True), encoding="utf-8")
    (directory / METRICS_FILE).write_text(json.dumps(checkpoint.metrics, indent=2, sort_keys=True), encoding="utf-8")


def load_segmenter(directory: Path) -> SegmenterCheckpoint:
    """Load a checkpoint written by `save_segmenter`.

    Raises:
        CapabilityError: If the directory holds no segmenter checkpoint.
    """
    spec_path = directory / SPEC_FILE
    if not spec_path.is_file():
        raise CapabilityError(f"no segmenter checkpoint in {directory}; run train-seg first")
    spec = json.loads(spec_path.read_text(encoding="utf-8"))
    network = Segmenter(spec["side"], latent_dim=spec["latent_dim"], filters=spec["filters"])
    network.load_state_dict(torch.load(directory / WEIGHTS_FILE, weights_only=True))
    network.eval()
    metrics_path = directory / METRICS_FILE
    metrics = json.loads(metrics_path.read_text(encoding="utf-8")) if metrics_path.is_file() else {}
    return SegmenterCheckpoint(network=network, threshold=spec["threshold"], trained=spec["trained"], metrics=metrics)
