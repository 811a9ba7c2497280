# SPDX-License-Identifier: LGPL-3.0-or-later
# SPDX-FileNotice: Part of the cagan-active-learning project.

"""Classifier checkpoints.

Checkpoint layout: ``checkpoint/{weights.bin, meta.json}``. ``meta.json``
records the backbone family, the class count, the label mode, the masking
rate shared with Monte-Carlo scoring and the AL round that produced the
weights. Saving over a directory that holds a later round is refused.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field, replace
import json
import logging
from pathlib import Path
from typing import Any

import torch

from ..config import ClassifierConfig, LabelMode
from ..errors import CapabilityError, DomainError
from ..ports.backbone_port import Backbone
from ..seeding import child_seed, torch_seeded
from .backbone import build_backbone

logger = logging.getLogger(__name__)

WEIGHTS_FILE = "weights.bin"
META_FILE = "meta.json"


@dataclass
class ClassifierCheckpoint:
    """A backbone with the provenance of its weights."""

    backbone: Backbone
    config: ClassifierConfig
    side: int
    num_classes: int
    label_mode: LabelMode
    masking_rate: float
    round_index: int = -1
    metrics: dict[str, Any] = field(default_factory=dict)

    def copy(self) -> ClassifierCheckpoint:
        """Return a deep copy whose weights can be trained independently."""
        return replace(self, backbone=copy.deepcopy(self.backbone), metrics=dict(self.metrics))

    def at_round(self, round_index: int) -> ClassifierCheckpoint:
        """Return this checkpoint relabelled as produced by `round_index`.

        Raises:
            DomainError: If `round_index` precedes the current round.
        """
        if round_index < self.round_index:
            raise DomainError(f"round {round_index} precedes checkpoint round {self.round_index}")
        return replace(self, round_index=round_index)


def new_classifier(
    config: ClassifierConfig,
    *,
    side: int,
    num_classes: int,
    label_mode: LabelMode,
    masking_rate: float,
    seed: int,
) -> ClassifierCheckpoint:
    """Return a freshly initialised classifier."""
    with torch_seeded(child_seed(seed, "classifier_init")):
        backbone = build_backbone(config, side=side, num_classes=num_classes, masking_rate=masking_rate)
    return ClassifierCheckpoint(
        backbone=backbone,
        config=config,
        side=side,
        num_classes=num_classes,
        label_mode=label_mode,
        masking_rate=masking_rate,
    )


def save_classifier(checkpoint: ClassifierCheckpoint, directory: Path) -> None:
    """Write ``weights.bin`` and ``meta.json``.

    Raises:
        DomainError: If `directory` already holds a checkpoint of a later round.
    """
    meta_path = directory / META_FILE
    if meta_path.is_file():
        previous = json.loads(meta_path.read_text(encoding="utf-8"))
        if previous["round_index"] > checkpoint.round_index:
            raise DomainError(
                f"{directory} holds round {previous['round_index']}; refusing to save round {checkpoint.round_index}"
            )
    directory.mkdir(parents=True, exist_ok=True)
    torch.save(checkpoint.backbone.state_dict(), directory / WEIGHTS_FILE)
    meta = {
        "config": checkpoint.config.model_dump(mode="json"),
        "side": checkpoint.side,
        "num_classes": checkpoint.num_classes,
        "label_mode": checkpoint.label_mode,
        "masking_rate": checkpoint.masking_rate,
        "round_index": checkpoint.round_index,
        "metrics": checkpoint.metrics,
    }
    meta_path.write_text(json.dumps(meta, indent=2, sort_keys=True), encoding="utf-8")


def load_classifier(directory: Path) -> ClassifierCheckpoint:
    """Load a checkpoint written by `save_classifier`.

    Raises:
        CapabilityError: If `directory` holds no classifier checkpoint.
    """
    meta_path = directory / META_FILE
    if not meta_path.is_file():
        raise CapabilityError(f"no classifier checkpoint in {directory}")
    meta = json.loads(meta_path.read_text(encoding="utf-8"))
    config = ClassifierConfig.model_validate(meta["config"])
    backbone = build_backbone(
        config, side=meta["side"], num_classes=meta["num_classes"], masking_rate=meta["masking_rate"]
    )
    backbone.load_state_dict(torch.load(directory / WEIGHTS_FILE, weights_only=True))
    backbone.eval()
    logger.debug("loaded classifier round %d from %s", meta["round_index"], directory)
    return ClassifierCheckpoint(
        backbone=backbone,
        config=config,
        side=meta["side"],
        num_classes=meta["num_classes"],
        label_mode=meta["label_mode"],
        masking_rate=meta["masking_rate"],
        round_index=meta["round_index"],
        metrics=meta.get("metrics", {}),
    )
