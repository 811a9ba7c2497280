# SPDX-License-Identifier: LGPL-3.0-or-later
# SPDX-FileNotice: Part of the cagan-active-learning project.

"""Class-aware GAN training and checkpoints.

Checkpoint layout: ``cagan/{G.bin, D.bin, weights.json, history.csv}`` plus
``optim.bin`` holding optimizer state for resumed runs.

Each generator iteration runs `n_critic` critic updates on
``L_D = -L_adv + lambda_cls * L_cls_r`` followed by one generator update on
``L_G = L_adv_g + lambda_cls * L_cls_f + lambda_content * L_content``, where
``L_adv_g`` is the adversarial term with the real-side map and the gradient
penalty taken as constants.
"""

from __future__ import annotations

from collections.abc import Sequence
import copy
import csv
from dataclasses import dataclass, field
import json
import logging
import math
from pathlib import Path
from typing import Any

import numpy as np
from numpy.typing import NDArray
import torch
import torch.nn.functional as F

from ..config import CaganConfig, LabelMode
from ..domain.image_sample import ImageSample, stack_labels, stack_pixels
from ..errors import CapabilityError, NumericError, TrainingDivergedError, TrainingError
from ..ports.backbone_port import PerceptualExtractor
from ..seeding import child_seed, torch_seeded
from ..segmenter.latent import encode_masks
from ..segmenter.training import SegmenterCheckpoint, predict_masks
from .losses import LossWeights, adv_loss_wgan_gp, cls_loss_fake, cls_loss_real, content_loss, gradient_penalty
from .networks import Discriminator, Generator

logger = logging.getLogger(__name__)

HISTORY_COLUMNS = ("iter", "L_D", "L_G", "L_adv", "L_cls_r", "L_cls_f", "L_content", "gp", "L_adv_g")
G_FILE = "G.bin"
D_FILE = "D.bin"
WEIGHTS_FILE = "weights.json"
HISTORY_FILE = "history.csv"
OPTIM_FILE = "optim.bin"


@dataclass
class CaganCheckpoint:
    """Generator and critic with the record of how they were trained."""

    generator: Generator
    discriminator: Discriminator
    weights: LossWeights
    side: int
    num_classes: int
    label_mode: LabelMode
    seed: int
    iteration: int = 0
    history: list[dict[str, float]] = field(default_factory=list)
    arch: dict[str, Any] = field(default_factory=dict)
    optimizer_state: dict[str, Any] | None = None

    @property
    def code_dim(self) -> int:
        """Return the latent width the generator expects."""
        return self.generator.code_dim


def build_networks(side: int, num_classes: int, code_dim: int, hyper: CaganConfig) -> tuple[Generator, Discriminator]:
    """Instantiate a generator and critic from the configuration."""
    generator = Generator(
        code_dim, num_classes, base_channels=hyper.gen_base_channels, residual_blocks=hyper.residual_blocks
    )
    discriminator = Discriminator(
        side, num_classes, base_channels=hyper.disc_base_channels, norm=hyper.disc_norm
    )
    return generator, discriminator


def conditioning_codes(segmenter: SegmenterCheckpoint, samples: Sequence[ImageSample]) -> NDArray[np.float32]:
    """Return mask codes for samples, predicting masks where none is stored."""
    missing = [i for i, s in enumerate(samples) if s.mask is None]
    predicted: dict[int, NDArray[np.uint8]] = {}
    if missing:
        batch = stack_pixels([samples[i] for i in missing])
        predicted = dict(zip(missing, predict_masks(segmenter, batch), strict=True))
    masks = [s.mask if s.mask is not None else predicted[i] for i, s in enumerate(samples)]
    return encode_masks(segmenter, masks)


def _classes_present(labels: NDArray[np.float32]) -> int:
    return int((labels.sum(axis=0) > 0).sum())


def _random_targets(count: int, num_classes: int, generator: torch.Generator) -> torch.Tensor:
    picks = torch.randint(0, num_classes, (count,), generator=generator)
    return F.one_hot(picks, num_classes).float()


def train_cagan(
    samples: Sequence[ImageSample],
    segmenter: SegmenterCheckpoint,
    hyper: CaganConfig,
    weights: LossWeights,
    *,
    seed: int,
    label_mode: LabelMode = "multilabel",
    perceptual: PerceptualExtractor | None = None,
    resume: CaganCheckpoint | None = None,
    checkpoint_dir: Path | None = None,
) -> CaganCheckpoint:
    """Train the class-aware GAN on labeled samples.

    Args:
        samples: Labeled real images.
        segmenter: Source of the mask codes the generator is conditioned on.
        hyper: GAN section of the configuration (``iters`` caps generator updates).
        weights: Loss weights.
        seed: Seed of initialisation, batches and target classes.
        label_mode: Class-head loss form.
        perceptual: Frozen feature extractor for the content loss.
        resume: Checkpoint to continue from; training stops at ``hyper.iters``.
        checkpoint_dir: Where to persist the checkpoint every ``checkpoint_every`` iterations.

    Raises:
        TrainingError: If fewer than two classes are present.
        TrainingDivergedError: On a non-finite loss; the last good state is saved first.
    """
    if not samples:
        raise TrainingError("train_cagan needs labeled samples")
    pixels = torch.from_numpy(stack_pixels(list(samples)))
    labels_np = stack_labels(list(samples))
    if _classes_present(labels_np) < 2:
        raise TrainingError("train_cagan needs at least two classes; the class head would be degenerate")
    labels = torch.from_numpy(labels_np)
    codes = torch.from_numpy(conditioning_codes(segmenter, samples))
    side = pixels.shape[-1]
    num_classes = labels.shape[1]

    if resume is None:
        with torch_seeded(seed):
            generator, discriminator = build_networks(side, num_classes, codes.shape[1], hyper)
        checkpoint = CaganCheckpoint(
            generator=generator,
            discriminator=discriminator,
            weights=weights,
            side=side,
            num_classes=num_classes,
            label_mode=label_mode,
            seed=seed,
            arch=_arch(hyper),
        )
    else:
        checkpoint = resume
        checkpoint.weights = weights

    opt_g = torch.optim.Adam(checkpoint.generator.parameters(), lr=hyper.lr, betas=(hyper.beta1, hyper.beta2))
    opt_d = torch.optim.Adam(checkpoint.discriminator.parameters(), lr=hyper.lr, betas=(hyper.beta1, hyper.beta2))
    if checkpoint.optimizer_state:
        opt_g.load_state_dict(checkpoint.optimizer_state["G"])
        opt_d.load_state_dict(checkpoint.optimizer_state["D"])

    batch = min(hyper.batch, len(samples))
    last_good = _snapshot(checkpoint, opt_g, opt_d)
    stream = child_seed(seed, "cagan", checkpoint.iteration)
    draws = torch.Generator().manual_seed(stream)
    with torch.random.fork_rng(devices=[]):
        torch.manual_seed(stream)
        while checkpoint.iteration < hyper.iters:
            try:
                row = _train_step(
                    checkpoint, opt_g, opt_d, pixels, labels, codes, batch, hyper, perceptual, draws
                )
            except NumericError as exc:
                row = None
                logger.warning("non-finite %s at iteration %d", exc.head, checkpoint.iteration)
            if row is None or not all(math.isfinite(v) for v in row.values()):
                path = _abort(checkpoint, last_good, checkpoint_dir)
                raise TrainingDivergedError(checkpoint.iteration, path)
            checkpoint.iteration += 1
            row["iter"] = float(checkpoint.iteration)
            checkpoint.history.append(row)
            logger.debug("cagan iter %d L_D %.4f L_G %.4f", checkpoint.iteration, row["L_D"], row["L_G"])
            if checkpoint.iteration % hyper.checkpoint_every == 0:
                last_good = _snapshot(checkpoint, opt_g, opt_d)
                if checkpoint_dir is not None:
                    save_cagan(checkpoint, checkpoint_dir)
                logger.info("cagan iteration %d of %d", checkpoint.iteration, hyper.iters)

    checkpoint.optimizer_state = {"G": opt_g.state_dict(), "D": opt_d.state_dict()}
    if checkpoint_dir is not None:
        save_cagan(checkpoint, checkpoint_dir)
    return checkpoint


def _train_step(
    checkpoint: CaganCheckpoint,
    opt_g: torch.optim.Optimizer,
    opt_d: torch.optim.Optimizer,
    pixels: torch.Tensor,
    labels: torch.Tensor,
    codes: torch.Tensor,
    batch: int,
    hyper: CaganConfig,
    perceptual: PerceptualExtractor | None,
    draws: torch.Generator,
) -> dict[str, float]:
    generator = checkpoint.generator
    discriminator = checkpoint.discriminator
    weights = checkpoint.weights
    mode = checkpoint.label_mode
    generator.train()
    discriminator.train()

    for _ in range(hyper.n_critic):
        idx = torch.randint(0, pixels.shape[0], (batch,), generator=draws)
        x, y, z = pixels[idx], labels[idx], codes[idx]
        targets = _random_targets(batch, checkpoint.num_classes, draws)
        with torch.no_grad():
            fake = generator(x, z, targets)
        src_real, cls_real = discriminator(x)
        src_fake, _ = discriminator(fake)
        gp = gradient_penalty(discriminator.critic, x, fake)
        l_adv = adv_loss_wgan_gp(src_real, src_fake, gp, weights)
        assert cls_real is not None
        l_cls_r = cls_loss_real(cls_real, y, mode)
        l_d = -l_adv + weights.lambda_cls * l_cls_r
        opt_d.zero_grad()
        l_d.backward()
        opt_d.step()

    idx = torch.randint(0, pixels.shape[0], (batch,), generator=draws)
    x, z = pixels[idx], codes[idx]
    targets = _random_targets(batch, checkpoint.num_classes, draws)
    fake = generator(x, z, targets)
    src_fake, cls_fake = discriminator(fake)
    with torch.no_grad():
        src_real = discriminator.critic(x)
    l_adv_g = adv_loss_wgan_gp(src_real, src_fake, gp.detach(), weights)
    assert cls_fake is not None
    l_cls_f = cls_loss_fake(cls_fake, targets, mode)
    l_content = content_loss(x, fake, perceptual, weights, bins=hyper.nmi_bins, soft=True)
    l_g = l_adv_g + weights.lambda_cls * l_cls_f + weights.lambda_content * l_content
    opt_g.zero_grad()
    opt_d.zero_grad()
    l_g.backward()
    opt_g.step()

    return {
        "L_D": float(l_d.item()),
        "L_G": float(l_g.item()),
        "L_adv": float(l_adv.item()),
        "L_cls_r": float(l_cls_r.item()),
        "L_cls_f": float(l_cls_f.item()),
        "L_content": float(l_content.item()),
        "gp": float(gp.item()),
        "L_adv_g": float(l_adv_g.item()),
    }


def _arch(hyper: CaganConfig) -> dict[str, Any]:
    return {
        "gen_base_channels": hyper.gen_base_channels,
        "residual_blocks": hyper.residual_blocks,
        "disc_base_channels": hyper.disc_base_channels,
        "disc_norm": hyper.disc_norm,
        "nmi_bins": hyper.nmi_bins,
    }


def _snapshot(
    checkpoint: CaganCheckpoint, opt_g: torch.optim.Optimizer, opt_d: torch.optim.Optimizer
) -> dict[str, Any]:
    return {
        "G": copy.deepcopy(checkpoint.generator.state_dict()),
        "D": copy.deepcopy(checkpoint.discriminator.state_dict()),
        "optim": {"G": copy.deepcopy(opt_g.state_dict()), "D": copy.deepcopy(opt_d.state_dict())},
        "iteration": checkpoint.iteration,
        "history_len": len(checkpoint.history),
    }


def _abort(checkpoint: CaganCheckpoint, last_good: dict[str, Any], directory: Path | None) -> Path | None:
    checkpoint.generator.load_state_dict(last_good["G"])
    checkpoint.discriminator.load_state_dict(last_good["D"])
    checkpoint.optimizer_state = last_good["optim"]
    checkpoint.iteration = last_good["iteration"]
    del checkpoint.history[last_good["history_len"] :]
    if directory is None:
        return None
    save_cagan(checkpoint, directory)
    return directory


def class_head_accuracy(checkpoint: CaganCheckpoint, samples: Sequence[ImageSample]) -> float:
    """Return how often the critic's class head ranks a true label first."""
    discriminator = checkpoint.discriminator
    discriminator.eval()
    with torch.no_grad():
        _, logits = discriminator(torch.from_numpy(stack_pixels(list(samples))))
    if logits is None:
        raise CapabilityError("critic has no class head")
    labels = stack_labels(list(samples))
    top = logits.argmax(dim=1).numpy()
    return float(np.mean(labels[np.arange(len(top)), top] > 0))


def save_cagan(checkpoint: CaganCheckpoint, directory: Path) -> None:
    """Persist generator, critic, weights, metadata and loss history."""
    directory.mkdir(parents=True, exist_ok=True)
    torch.save(checkpoint.generator.state_dict(), directory / G_FILE)
    torch.save(checkpoint.discriminator.state_dict(), directory / D_FILE)
    if checkpoint.optimizer_state is not None:
        torch.save(checkpoint.optimizer_state, directory / OPTIM_FILE)
    meta = {
        "weights": checkpoint.weights.as_dict(),
        "iteration": checkpoint.iteration,
        "seed": checkpoint.seed,
        "side": checkpoint.side,
        "num_classes": checkpoint.num_classes,
        "code_dim": checkpoint.code_dim,
        "label_mode": checkpoint.label_mode,
        "arch": checkpoint.arch,
    }
    (directory / WEIGHTS_FILE).write_text(json.dumps(meta, indent=2, sort_keys=True), encoding="utf-8")
    with (directory / HISTORY_FILE).open("w", encoding="utf-8", newline="") as handle:
        writer = csv.DictWriter(handle, fieldnames=HISTORY_COLUMNS, lineterminator="\n")
        writer.writeheader()
        for row in checkpoint.history:
            writer.writerow({key: (int(row[key]) if key == "iter" else repr(row[key])) for key in HISTORY_COLUMNS})


def load_cagan(directory: Path) -> CaganCheckpoint:
    """Load a checkpoint written by `save_cagan`.

    Raises:
        CapabilityError: If `directory` holds no trained GAN.
    """
    meta_path = directory / WEIGHTS_FILE
    if not meta_path.is_file():
        raise CapabilityError(f"no CAGAN checkpoint in {directory}; run train-cagan first")
    meta = json.loads(meta_path.read_text(encoding="utf-8"))
    hyper = CaganConfig(**meta["arch"])
    generator, discriminator = build_networks(meta["side"], meta["num_classes"], meta["code_dim"], hyper)
    generator.load_state_dict(torch.load(directory / G_FILE, weights_only=True))
    discriminator.load_state_dict(torch.load(directory / D_FILE, weights_only=True))
    optim_path = directory / OPTIM_FILE
    optimizer_state = torch.load(optim_path, weights_only=False) if optim_path.is_file() else None
    history: list[dict[str, float]] = []
    history_path = directory / HISTORY_FILE
    if history_path.is_file():
        with history_path.open(encoding="utf-8", newline="") as handle:
            history = [{k: float(v) for k, v in row.items()} for row in csv.DictReader(handle)]
    return CaganCheckpoint(
        generator=generator,
        discriminator=discriminator,
        weights=LossWeights(**meta["weights"]),
        side=meta["side"],
        num_classes=meta["num_classes"],
        label_mode=meta["label_mode"],
        seed=meta["seed"],
        iteration=meta["iteration"],
        history=history,
        arch=meta["arch"],
        optimizer_state=optimizer_state,
    )
