# SPDX-License-Identifier: LGPL-3.0-or-later
# SPDX-FileNotice: Part of the cagan-active-learning project.

"""Procedural chest-X-ray-like toy corpus.

Each image is a smooth background with two elliptical lung fields (the
recorded ground-truth mask) plus class-specific artifacts. Label quotas follow
`imbalance_ratios` exactly (largest-remainder rounding), so class frequencies
match the configured ratios up to one image per class.

Rendering is sharded per patient with joblib; every patient draws from its own
generator seeded by ``[seed, patient_index]``, so the output does not depend on
the number of workers.
"""

from __future__ import annotations

from collections.abc import Callable
from dataclasses import dataclass
import logging
from pathlib import Path

from joblib import Parallel, delayed
import numpy as np
from numpy.typing import NDArray
from scipy import ndimage
from skimage import draw

from ..config import DataConfig
from ..domain.image_sample import ImageSample
from ..domain.manifest import DatasetManifest, ManifestEntry
from .manifest_io import quantize, write_image_png, write_manifest, write_mask_png

logger = logging.getLogger(__name__)

BASE_CLASS_NAMES = ("nodule", "effusion", "infiltration", "cardiomegaly", "pneumothorax", "atelectasis")

FloatImage = NDArray[np.float64]
Artifact = Callable[[FloatImage, NDArray[np.bool_], "_Anatomy", np.random.Generator, int], None]


def toy_class_names(num_classes: int) -> tuple[str, ...]:
    """Return class names, cycling the base set with ``_b``, ``_c`` ... suffixes."""
    names: list[str] = []
    for k in range(num_classes):
        base = BASE_CLASS_NAMES[k % len(BASE_CLASS_NAMES)]
        cycle = k // len(BASE_CLASS_NAMES)
        names.append(base if cycle == 0 else f"{base}_{chr(ord('a') + cycle)}")
    return tuple(names)


@dataclass(frozen=True)
class _Anatomy:
    side: int
    centers: tuple[tuple[float, float], tuple[float, float]]
    radii: tuple[float, float]
    tilt: float

    def lung_mask(self) -> NDArray[np.bool_]:
        mask = np.zeros((self.side, self.side), dtype=bool)
        for (row, col), sign in zip(self.centers, (1.0, -1.0), strict=True):
            rr, cc = draw.ellipse(
                row, col, self.radii[0], self.radii[1], shape=mask.shape, rotation=sign * self.tilt
            )
            mask[rr, cc] = True
        return mask


def _patient_anatomy(side: int, rng: np.random.Generator) -> _Anatomy:
    row = side * (0.50 + rng.uniform(-0.03, 0.03))
    offset = side * (0.19 + rng.uniform(-0.02, 0.02))
    center = side * 0.5
    return _Anatomy(
        side=side,
        centers=((row, center - offset), (row, center + offset)),
        radii=(side * (0.30 + rng.uniform(-0.03, 0.03)), side * (0.13 + rng.uniform(-0.015, 0.015))),
        tilt=float(rng.uniform(0.0, 0.12)),
    )


def _smooth_noise(side: int, rng: np.random.Generator, sigma: float) -> FloatImage:
    field = ndimage.gaussian_filter(rng.standard_normal((side, side)), sigma=sigma)
    spread = float(field.std()) or 1.0
    return np.asarray(field / spread, dtype=np.float64)


def _pick_lung(anatomy: _Anatomy, rng: np.random.Generator, variant: int) -> tuple[float, float]:
    if variant:
        return anatomy.centers[variant % 2]
    return anatomy.centers[int(rng.integers(0, 2))]


def _nodules(
    image: FloatImage, mask: NDArray[np.bool_], anatomy: _Anatomy, rng: np.random.Generator, variant: int
) -> None:
    side = anatomy.side
    rows, cols = np.nonzero(mask)
    yy, xx = np.mgrid[0:side, 0:side]
    for _ in range(int(rng.integers(2, 4))):
        pick = int(rng.integers(0, len(rows)))
        radius = side * (0.03 + 0.015 * variant) * rng.uniform(0.8, 1.2)
        blob = np.exp(-((yy - rows[pick]) ** 2 + (xx - cols[pick]) ** 2) / (2 * radius**2))
        image += 0.45 * blob


def _effusion(
    image: FloatImage, mask: NDArray[np.bool_], anatomy: _Anatomy, rng: np.random.Generator, variant: int
) -> None:
    side = anatomy.side
    ramp = np.clip((np.arange(side) / side - 0.55) / 0.3, 0.0, 1.0)[:, None] * np.ones((1, side))
    if variant % 2:
        ramp[:, side // 2 :] = 0.0
    elif variant:
        ramp[:, : side // 2] = 0.0
    image += (0.35 + 0.05 * rng.uniform()) * ramp * ndimage.gaussian_filter(mask.astype(float), 1.0)


def _infiltration(
    image: FloatImage, mask: NDArray[np.bool_], anatomy: _Anatomy, rng: np.random.Generator, variant: int
) -> None:
    texture = np.abs(_smooth_noise(anatomy.side, rng, sigma=0.8 + 0.4 * variant))
    image += 0.18 * texture * mask


def _cardiomegaly(
    image: FloatImage, mask: NDArray[np.bool_], anatomy: _Anatomy, rng: np.random.Generator, variant: int
) -> None:
    side = anatomy.side
    heart = np.zeros((side, side))
    center_row = side * (0.62 + 0.04 * variant)
    rr, cc = draw.ellipse(
        center_row, side * 0.5 + side * 0.03 * rng.uniform(-1, 1), side * 0.2, side * 0.16, shape=heart.shape
    )
    heart[rr, cc] = 1.0
    image += 0.35 * ndimage.gaussian_filter(heart, 1.5)


def _pneumothorax(
    image: FloatImage, mask: NDArray[np.bool_], anatomy: _Anatomy, rng: np.random.Generator, variant: int
) -> None:
    side = anatomy.side
    row, col = _pick_lung(anatomy, rng, variant)
    apex = np.zeros((side, side))
    rr, cc = draw.ellipse(
        row - anatomy.radii[0] * 0.55, col, anatomy.radii[0] * 0.4, anatomy.radii[1] * 0.9, shape=apex.shape
    )
    apex[rr, cc] = 1.0
    image -= 0.25 * apex * mask


def _atelectasis(
    image: FloatImage, mask: NDArray[np.bool_], anatomy: _Anatomy, rng: np.random.Generator, variant: int
) -> None:
    side = anatomy.side
    row, col = _pick_lung(anatomy, rng, variant)
    band_row = row + anatomy.radii[0] * rng.uniform(0.0, 0.4)
    yy, xx = np.mgrid[0:side, 0:side]
    width = np.abs(xx - col) < anatomy.radii[1] * 1.1
    band = np.exp(-((yy - band_row) ** 2) / (2 * (side * 0.025) ** 2)) * width
    image += 0.4 * band * mask


_ARTIFACTS: tuple[Artifact, ...] = (_nodules, _effusion, _infiltration, _cardiomegaly, _pneumothorax, _atelectasis)


def render_image(
    labels: tuple[int, ...], anatomy: _Anatomy, rng: np.random.Generator
) -> tuple[NDArray[np.float32], NDArray[np.uint8]]:
    """Render one image and its lung mask for the given label vector."""
    side = anatomy.side
    mask = anatomy.lung_mask()
    image = 0.55 + 0.06 * _smooth_noise(side, rng, sigma=side / 10)
    image -= 0.28 * ndimage.gaussian_filter(mask.astype(float), 1.0)
    for k, bit in enumerate(labels):
        if bit:
            _ARTIFACTS[k % len(_ARTIFACTS)](image, mask, anatomy, rng, k // len(_ARTIFACTS))
    image += 0.02 * rng.standard_normal((side, side))
    return quantize(np.clip(image, 0.0, 1.0)), mask.astype(np.uint8)


def _label_plan(config: DataConfig, seed: int) -> list[tuple[int, ...]]:
    total = config.num_patients * config.images_per_patient
    rng = np.random.default_rng([seed, 0x1ABE1])
    num_normal = int(round(config.normal_fraction * total)) if config.allow_normal else 0
    diseased = total - num_normal

    ratios = np.asarray(config.imbalance_ratios, dtype=np.float64)
    exact = ratios / ratios.sum() * diseased
    quotas = np.floor(exact).astype(int)
    remainder = diseased - int(quotas.sum())
    for k in np.argsort(-(exact - quotas), kind="stable")[:remainder]:
        quotas[k] += 1

    primaries = np.concatenate([np.full(q, k) for k, q in enumerate(quotas)] + [np.full(num_normal, -1)])
    rng.shuffle(primaries)

    relative = ratios / ratios.max()
    plan: list[tuple[int, ...]] = []
    for primary in primaries:
        bits = [0] * config.num_classes
        if primary >= 0:
            bits[int(primary)] = 1
            if config.label_mode == "multilabel" and config.co_label_probability > 0:
                draws = rng.uniform(size=config.num_classes)
                for k in range(config.num_classes):
                    if k != primary and draws[k] < config.co_label_probability * relative[k]:
                        bits[k] = 1
        plan.append(tuple(bits))
    return plan


def _render_patient(
    patient: int, labels: list[tuple[int, ...]], side: int, seed: int
) -> list[tuple[str, str, tuple[int, ...], NDArray[np.float32], NDArray[np.uint8]]]:
    rng = np.random.default_rng([seed, patient])
    anatomy = _patient_anatomy(side, rng)
    patient_id = f"p{patient:05d}"
    rendered = []
    for index, bits in enumerate(labels):
        pixels, mask = render_image(bits, anatomy, rng)
        rendered.append((f"{patient_id}_i{index:02d}", patient_id, bits, pixels, mask))
    return rendered


def build_toy_samples(config: DataConfig, *, seed: int) -> tuple[tuple[str, ...], list[ImageSample]]:
    """Render the corpus in memory.

    Returns:
        The class names and the samples in patient-index order.
    """
    plan = _label_plan(config, seed)
    per = config.images_per_patient
    shards = Parallel(n_jobs=config.n_jobs)(
        delayed(_render_patient)(p, plan[p * per : (p + 1) * per], config.side, seed)
        for p in range(config.num_patients)
    )
    samples = [
        ImageSample(id=sid, pixels=pixels, labels=bits, patient_id=pid, mask_id=f"{sid}:gt", mask=mask)
        for shard in shards
        for sid, pid, bits, pixels, mask in shard
    ]
    return toy_class_names(config.num_classes), samples


def generate_toy_corpus(config: DataConfig, *, seed: int, out_dir: Path) -> DatasetManifest:
    """Render the corpus, write PNGs and ``manifest.csv`` under `out_dir`.

    The returned manifest has no split assignment yet; see `split_by_patient`.
    """
    class_names, samples = build_toy_samples(config, seed=seed)
    entries: list[ManifestEntry] = []
    for sample in samples:
        image_rel = f"images/{sample.id}.png"
        mask_rel = f"masks/{sample.id}.png"
        write_image_png(sample.pixels, out_dir / image_rel)
        if sample.mask is not None:
            write_mask_png(sample.mask, out_dir / mask_rel)
        entries.append(
            ManifestEntry(
                id=sample.id, path=image_rel, patient_id=sample.patient_id, labels=sample.labels, mask_path=mask_rel
            )
        )
    manifest = DatasetManifest(entries=tuple(entries), class_names=class_names, root=out_dir)
    write_manifest(manifest, out_dir / "manifest.csv")
    logger.info("toy corpus: %d images of %d patients in %s", len(entries), config.num_patients, out_dir)
    return manifest
