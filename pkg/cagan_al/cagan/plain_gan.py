# SPDX-License-Identifier: LGPL-3.0-or-later
# SPDX-FileNotice: Part of the cagan-active-learning project.

"""Unconditioned GAN baseline.

The same generator and critic families with the class conditioning removed:
the generator sees the input image plus a replicated noise code, and the critic
has no class head. Real examples for the critic are standard-augmented images,
so the generator learns label-preserving geometric variation. Generated
samples copy the base labels.

Checkpoint layout: ``plain_gan/{G.bin, D.bin, meta.json, history.csv}``.
"""

from __future__ import annotations

from collections.abc import Sequence
import csv
from dataclasses import dataclass, field
import json
import logging
from pathlib import Path

import numpy as np
from numpy.typing import NDArray
import torch
import torch.nn.functional as F

from ..config import CaganConfig
from ..data.augment import draw_params, transform_image
from ..domain.image_sample import ImageSample, Provenance, stack_pixels
from ..errors import CapabilityError, TrainingDivergedError, TrainingError
from ..seeding import child_seed, torch_seeded
from .losses import LossWeights, adv_loss_wgan_gp, gradient_penalty
from .networks import Discriminator, Generator

logger = logging.getLogger(__name__)

PLAIN_HISTORY_COLUMNS = ("iter", "L_D", "L_G", "L_adv", "L_mse", "gp")


@dataclass
class PlainGanCheckpoint:
    """Unconditioned generator and critic."""

    generator: Generator
    discriminator: Discriminator
    side: int
    noise_dim: int
    seed: int
    iteration: int = 0
    arch: dict[str, object] = field(default_factory=dict)
    history: list[dict[str, float]] = field(default_factory=list)


def _augmented_batch(pixels: NDArray[np.float32], rng: np.random.Generator) -> torch.Tensor:
    side = pixels.shape[-1]
    out = [transform_image(p[0], draw_params(rng, side)) for p in pixels]
    return torch.from_numpy(np.stack(out)[:, None].astype(np.float32))


def train_plain_gan(
    samples: Sequence[ImageSample], hyper: CaganConfig, weights: LossWeights, *, seed: int
) -> PlainGanCheckpoint:
    """Train the baseline for ``hyper.plain_iters`` generator updates.

    Raises:
        TrainingError: If `samples` is empty.
        TrainingDivergedError: On a non-finite loss.
    """
    if not samples:
        raise TrainingError("train_plain_gan needs samples")
    pixels_np = stack_pixels(list(samples))
    pixels = torch.from_numpy(pixels_np)
    side = pixels.shape[-1]
    with torch_seeded(seed):
        generator = Generator(
            hyper.plain_noise_dim, 0, base_channels=hyper.gen_base_channels, residual_blocks=hyper.residual_blocks
        )
        discriminator = Discriminator(side, 0, base_channels=hyper.disc_base_channels, norm=hyper.disc_norm)
    checkpoint = PlainGanCheckpoint(
        generator=generator,
        discriminator=discriminator,
        side=side,
        noise_dim=hyper.plain_noise_dim,
        seed=seed,
        arch={
            "gen_base_channels": hyper.gen_base_channels,
            "residual_blocks": hyper.residual_blocks,
            "disc_base_channels": hyper.disc_base_channels,
            "disc_norm": hyper.disc_norm,
        },
    )
    opt_g = torch.optim.Adam(generator.parameters(), lr=hyper.lr, betas=(hyper.beta1, hyper.beta2))
    opt_d = torch.optim.Adam(discriminator.parameters(), lr=hyper.lr, betas=(hyper.beta1, hyper.beta2))
    batch = min(hyper.batch, len(samples))
    rng = np.random.default_rng(child_seed(seed, "plain_gan"))
    draws = torch.Generator().manual_seed(child_seed(seed, "plain_gan_torch"))

    with torch.random.fork_rng(devices=[]):
        torch.manual_seed(child_seed(seed, "plain_gan_gp"))
        for iteration in range(1, hyper.plain_iters + 1):
            for _ in range(hyper.n_critic):
                idx = torch.randint(0, len(samples), (batch,), generator=draws)
                x = pixels[idx]
                real = _augmented_batch(pixels_np[idx.numpy()], rng)
                noise = torch.randn(batch, hyper.plain_noise_dim, generator=draws)
                with torch.no_grad():
                    fake = generator(x, noise)
                src_real, _ = discriminator(real)
                src_fake, _ = discriminator(fake)
                gp = gradient_penalty(discriminator.critic, real, fake)
                l_adv = adv_loss_wgan_gp(src_real, src_fake, gp, weights)
                opt_d.zero_grad()
                (-l_adv).backward()
                opt_d.step()

            idx = torch.randint(0, len(samples), (batch,), generator=draws)
            x = pixels[idx]
            noise = torch.randn(batch, hyper.plain_noise_dim, generator=draws)
            fake = generator(x, noise)
            src_fake, _ = discriminator(fake)
            l_mse = F.mse_loss(fake, x)
            l_g = -src_fake.mean() + weights.lambda_content * weights.w_mse * l_mse
            opt_g.zero_grad()
            l_g.backward()
            opt_g.step()

            row = {
                "iter": float(iteration),
                "L_D": float(-l_adv.item()),
                "L_G": float(l_g.item()),
                "L_adv": float(l_adv.item()),
                "L_mse": float(l_mse.item()),
                "gp": float(gp.item()),
            }
            if not all(np.isfinite(v) for v in row.values()):
                raise TrainingDivergedError(iteration, None)
            checkpoint.history.append(row)
            checkpoint.iteration = iteration
    logger.info("plain GAN trained for %d iterations", checkpoint.iteration)
    return checkpoint


def generate_plain(
    checkpoint: PlainGanCheckpoint, samples: Sequence[ImageSample], per_sample_count: int, seed: int
) -> list[ImageSample]:
    """Generate `per_sample_count` label-preserving variants per sample."""
    generator = checkpoint.generator
    generator.eval()
    draws = torch.Generator().manual_seed(child_seed(seed, "plain_generate"))
    outputs: list[ImageSample] = []
    for base in samples:
        x = torch.from_numpy(np.repeat(base.pixels[None, None], per_sample_count, axis=0).astype(np.float32))
        noise = torch.randn(per_sample_count, checkpoint.noise_dim, generator=draws)
        with torch.no_grad():
            images = generator(x, noise)[:, 0].numpy()
        for k, pixels in enumerate(images):
            outputs.append(
                ImageSample(
                    id=f"{base.id}~gan{seed}.{k}",
                    pixels=np.clip(pixels, 0.0, 1.0).astype(np.float32),
                    labels=base.labels,
                    patient_id=base.patient_id,
                    provenance=Provenance.SYNTHETIC,
                    base_id=base.base_id or base.id,
                )
            )
    return outputs


def save_plain_gan(checkpoint: PlainGanCheckpoint, directory: Path) -> None:
    """Persist the baseline checkpoint."""
    directory.mkdir(parents=True, exist_ok=True)
    torch.save(checkpoint.generator.state_dict(), directory / "G.bin")
    torch.save(checkpoint.discriminator.state_dict(), directory / "D.bin")
    meta = {
        "side": checkpoint.side,
        "noise_dim": checkpoint.noise_dim,
        "seed": checkpoint.seed,
        "iteration": checkpoint.iteration,
        "arch": checkpoint.arch,
    }
    (directory / "meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True), encoding="utf-8")
    with (directory / "history.csv").open("w", encoding="utf-8", newline="") as handle:
        writer = csv.DictWriter(handle, fieldnames=PLAIN_HISTORY_COLUMNS, lineterminator="\n")
        writer.writeheader()
        writer.writerows(checkpoint.history)


def load_plain_gan(directory: Path) -> PlainGanCheckpoint:
    """Load a baseline checkpoint.

    Raises:
        CapabilityError: If `directory` holds no baseline checkpoint.
    """
    meta_path = directory / "meta.json"
    if not meta_path.is_file():
        raise CapabilityError(f"no plain GAN checkpoint in {directory}")
    meta = json.loads(meta_path.read_text(encoding="utf-8"))
    arch = meta["arch"]
    generator = Generator(
        meta["noise_dim"], 0, base_channels=arch["gen_base_channels"], residual_blocks=arch["residual_blocks"]
    )
    discriminator = Discriminator(
        meta["side"], 0, base_channels=arch["disc_base_channels"], norm=arch["disc_norm"]
    )
    generator.load_state_dict(torch.load(directory / "G.bin", weights_only=True))
    discriminator.load_state_dict(torch.load(directory / "D.bin", weights_only=True))
    return PlainGanCheckpoint(
        generator=generator,
        discriminator=discriminator,
        side=meta["side"],
        noise_dim=meta["noise_dim"],
        seed=meta["seed"],
        iteration=meta["iteration"],
        arch=arch,
    )
