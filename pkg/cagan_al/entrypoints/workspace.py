# SPDX-License-Identifier: LGPL-3.0-or-later
# SPDX-FileNotice: Part of the cagan-active-learning project.

"""Output-root layout shared by the subcommands.

::

    <root>/data/manifest.csv        corpus with its patient split
    <root>/checkpoints/segmenter/
    <root>/checkpoints/cagan/
    <root>/checkpoints/plain_gan/
    <root>/checkpoints/perceptual/  classifier whose features drive the content loss
    <root>/runs/<run_name>/
    <root>/reports/<experiment>/

Every directory a command produces holds the frozen ``config.json`` it was
produced with. A second invocation either refuses or resumes.
"""

from __future__ import annotations

from collections.abc import Callable
from dataclasses import dataclass
import logging
from pathlib import Path
from typing import TypeVar

from ..active_learning.run_store import CONFIG_FILE, OnExisting
from ..cagan.plain_gan import load_plain_gan
from ..cagan.training import load_cagan
from ..data.manifest_io import read_manifest
from ..data.sample_store import SampleStore
from ..domain.manifest import DatasetManifest
from ..errors import CapabilityError, DataError, RunDirectoryError
from ..experiments.common import Generators
from ..segmenter.training import load_segmenter

logger = logging.getLogger(__name__)

T = TypeVar("T")

MANIFEST_FILE = "manifest.csv"


@dataclass(frozen=True)
class Workspace:
    """Paths under one output root."""

    root: Path

    @property
    def data_dir(self) -> Path:
        return self.root / "data"

    @property
    def manifest_path(self) -> Path:
        return self.data_dir / MANIFEST_FILE

    @property
    def segmenter_dir(self) -> Path:
        return self.root / "checkpoints" / "segmenter"

    @property
    def cagan_dir(self) -> Path:
        return self.root / "checkpoints" / "cagan"

    @property
    def plain_gan_dir(self) -> Path:
        return self.root / "checkpoints" / "plain_gan"

    @property
    def perceptual_dir(self) -> Path:
        return self.root / "checkpoints" / "perceptual"

    def run_dir(self, name: str) -> Path:
        return self.root / "runs" / name

    @property
    def reports_dir(self) -> Path:
        return self.root / "reports"

    def report_dir(self, experiment: str) -> Path:
        return self.reports_dir / experiment

    def load_manifest(self) -> DatasetManifest:
        """Read the split corpus manifest.

        Raises:
            CapabilityError: If ``gen-data`` has not run.
            DataError: If the manifest carries no split assignment.
        """
        if not self.manifest_path.is_file():
            raise CapabilityError(f"no corpus at {self.manifest_path}; run gen-data first")
        manifest = read_manifest(self.manifest_path)
        if not manifest.split_assignment:
            raise DataError(f"{self.manifest_path} has no split assignment")
        return manifest

    def load_store(self) -> SampleStore:
        return SampleStore.from_manifest(self.load_manifest())

    def load_generators(self) -> Generators:
        """Load whichever generative checkpoints exist; missing ones stay None."""
        return Generators(
            segmenter=_optional(load_segmenter, self.segmenter_dir),
            cagan=_optional(load_cagan, self.cagan_dir),
            plain_gan=_optional(load_plain_gan, self.plain_gan_dir),
        )


def _optional(loader: Callable[[Path], T], directory: Path) -> T | None:
    try:
        return loader(directory)
    except CapabilityError as exc:
        logger.debug("not loaded: %s", exc)
        return None


def claim_directory(directory: Path, config_json: str, on_existing: OnExisting) -> bool:
    """Freeze `config_json` into `directory`; return True when earlier output is resumed.

    Raises:
        RunDirectoryError: If the directory holds output and `on_existing` is
            ``refuse``, or it was produced under a different configuration.
    """
    frozen = directory / CONFIG_FILE
    if frozen.is_file():
        if on_existing == "refuse":
            raise RunDirectoryError(f"{directory} already holds results; pass --on-existing resume or remove it")
        if frozen.read_text(encoding="utf-8") != config_json:
            raise RunDirectoryError(f"{directory} was produced under a different configuration")
        logger.info("resuming in %s", directory)
        return True
    directory.mkdir(parents=True, exist_ok=True)
    frozen.write_text(config_json, encoding="utf-8")
    return False
