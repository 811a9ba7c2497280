"""Pytest configuration for the cagan-active-learning repository.

Adds the in-repo package path to `sys.path` so tests can import `cagan_al`
without installation, and provides small sample and configuration factories.
"""

from __future__ import annotations

from collections.abc import Callable
from pathlib import Path
import sys
from typing import Any

import numpy as np
import pytest


_repo_root = Path(__file__).resolve().parents[1]
_sys_path_entry = str(_repo_root)
if _sys_path_entry not in sys.path:
    sys.path.insert(0, _sys_path_entry)

from cagan_al.config import RunConfig, validate_model  # noqa: E402
from cagan_al.domain.image_sample import ImageSample  # noqa: E402


SampleFactory = Callable[..., ImageSample]


def make_sample(
    sample_id: str,
    labels: tuple[int, ...],
    patient_id: str | None = None,
    *,
    side: int = 32,
    seed: int = 0,
    with_mask: bool = True,
    **extra: Any,
) -> ImageSample:
    """Return a random-texture sample with a two-blob lung mask."""
    rng = np.random.default_rng(seed)
    pixels = rng.uniform(0.1, 0.9, size=(side, side)).astype(np.float32)
    mask = None
    if with_mask:
        mask = np.zeros((side, side), dtype=np.uint8)
        quarter = side // 4
        mask[quarter : 3 * quarter, quarter // 2 : quarter + quarter // 2] = 1
        mask[quarter : 3 * quarter, side - quarter - quarter // 2 : side - quarter // 2] = 1
    return ImageSample(
        id=sample_id,
        pixels=pixels,
        labels=labels,
        patient_id=patient_id or f"patient-{sample_id}",
        mask=mask,
        mask_id=f"{sample_id}:gt" if with_mask else None,
        **extra,
    )


@pytest.fixture
def sample_factory() -> SampleFactory:
    """Factory for small random samples (see `make_sample`)."""
    return make_sample


TINY_CONFIG: dict[str, Any] = {
    "data": {
        "num_classes": 3,
        "num_patients": 24,
        "images_per_patient": 2,
        "imbalance_ratios": [3.0, 2.0, 1.0],
        "side": 32,
    },
    "segmenter": {"latent_dim": 8, "filters": 4, "epochs": 1, "batch": 8, "control_points": 8},
    "cagan": {
        "iters": 2,
        "batch": 4,
        "n_critic": 1,
        "checkpoint_every": 1000,
        "nmi_bins": 8,
        "gen_base_channels": 8,
        "residual_blocks": 1,
        "disc_base_channels": 8,
        "plain_iters": 2,
        "plain_noise_dim": 4,
    },
    "uncertainty": {"mc_samples": 3},
    "classifier": {
        "widths": [4, 4, 8, 8],
        "epochs": 1,
        "initial_epochs": 1,
        "batch": 8,
        "heteroscedastic_samples": 2,
    },
    "schedule": {
        "initial_pool_fraction": 0.25,
        "top_k_real": 2,
        "gen_per_class": 2,
        "keep_per_class": 1,
        "max_rounds": 2,
        "persist_synthetic_images": False,
    },
    "experiment": {
        "seeds": [0],
        "budgets": [0.5, 1.0],
        "growth_initial_per_class": 2,
        "growth_step_per_class": 1,
        "growth_steps": 1,
    },
}


@pytest.fixture
def tiny_config(tmp_path: Path) -> RunConfig:
    """A configuration small enough to train every network in seconds."""
    return validate_model(RunConfig, {**TINY_CONFIG, "output_root": str(tmp_path / "home")})
