# SPDX-License-Identifier: LGPL-3.0-or-later
# SPDX-FileNotice: Part of the cagan-active-learning project.

"""Run-directory persistence of an active-learning run.

Layout under ``runs/<name>/``::

    config.json                 frozen, fully resolved configuration
    trail.json                  initial pool, round records, stop reason
    initial/checkpoint/         classifier after the initial-pool training
    initial/auc.json
    round_<k>/selected.csv      real ids labeled in round k
    round_<k>/synthetic_manifest.csv
    round_<k>/synthetic/        kept synthetic images (optional)
    round_<k>/scores.csv        pool scores with the selected flag
    round_<k>/auc.json          validation report of the round's classifier
    round_<k>/checkpoint/       the round's classifier
    final/                      classifier the run ended with

An existing run directory is either refused or resumed; it is never
silently overwritten.
"""

from __future__ import annotations

from collections.abc import Iterable, Sequence
import csv
import json
import logging
from pathlib import Path
from typing import Literal

from ..classifier.checkpoint import ClassifierCheckpoint, load_classifier, save_classifier
from ..classifier.evaluation import write_auc_json
from ..data.manifest_io import quantize, read_image_png, read_manifest, write_image_png, write_manifest
from ..domain.auc_report import AucReport
from ..domain.image_sample import ImageSample, Provenance
from ..domain.manifest import DatasetManifest, ManifestEntry
from ..errors import CapabilityError, RunDirectoryError
from ..uncertainty.scoring import Scored, write_scores_csv
from .records import AlRoundRecord, AlTrail

logger = logging.getLogger(__name__)

OnExisting = Literal["refuse", "resume"]

CONFIG_FILE = "config.json"
TRAIL_FILE = "trail.json"
FINAL_DIR = "final"


class RunStore:
    """Reads and writes one run directory."""

    def __init__(self, directory: Path, *, persist_synthetic_images: bool = True) -> None:
        self.directory = directory
        self.persist_synthetic_images = persist_synthetic_images

    def open(self, config_json: str, *, on_existing: OnExisting = "refuse") -> bool:
        """Prepare the directory; return True when an earlier run is resumed.

        Raises:
            RunDirectoryError: If the directory holds a run and `on_existing` is
                ``refuse``, or it holds a run of a different configuration.
        """
        config_path = self.directory / CONFIG_FILE
        if config_path.is_file():
            if on_existing == "refuse":
                raise RunDirectoryError(
                    f"{self.directory} already holds a run; pass --on-existing resume or choose another run name"
                )
            if config_path.read_text(encoding="utf-8") != config_json:
                raise RunDirectoryError(f"{self.directory} holds a run with a different configuration")
            logger.info("resuming run in %s", self.directory)
            return True
        self.directory.mkdir(parents=True, exist_ok=True)
        config_path.write_text(config_json, encoding="utf-8")
        return False

    def round_dir(self, round_index: int) -> Path:
        """Return ``round_<k>``."""
        return self.directory / f"round_{round_index}"

    def write_initial(self, checkpoint: ClassifierCheckpoint, report: AucReport) -> None:
        """Persist the classifier trained on the initial pool."""
        save_classifier(checkpoint, self.directory / "initial" / "checkpoint")
        write_auc_json(report, self.directory / "initial" / "auc.json")

    def load_initial(self) -> ClassifierCheckpoint:
        """Load the initial-pool classifier."""
        return load_classifier(self.directory / "initial" / "checkpoint")

    def write_round(
        self,
        record: AlRoundRecord,
        *,
        selected: Sequence[ImageSample],
        selected_scores: Sequence[float],
        synthetic: Sequence[ImageSample],
        pool_scores: Iterable[Scored],
        report: AucReport,
        checkpoint: ClassifierCheckpoint,
    ) -> None:
        """Persist every artifact of one completed round."""
        directory = self.round_dir(record.round_index)
        directory.mkdir(parents=True, exist_ok=True)
        class_names = report.class_names
        with (directory / "selected.csv").open("w", encoding="utf-8", newline="") as handle:
            writer = csv.writer(handle, lineterminator="\n")
            writer.writerow(["sample_id", "patient_id", "labels", "score"])
            for sample, score in zip(selected, selected_scores, strict=True):
                names = "|".join(class_names[c] for c in sample.positive_classes)
                writer.writerow([sample.id, sample.patient_id, names, repr(float(score))])
        self._write_synthetic(directory, synthetic, class_names)
        write_scores_csv(directory / "scores.csv", pool_scores, record.selected_ids)
        write_auc_json(report, directory / "auc.json")
        save_classifier(checkpoint, directory / "checkpoint")

    def _write_synthetic(self, directory: Path, synthetic: Sequence[ImageSample], class_names: tuple[str, ...]) -> None:
        entries = []
        for index, sample in enumerate(synthetic):
            path = f"synthetic/{index:06d}.png" if self.persist_synthetic_images else ""
            if path:
                write_image_png(sample.pixels, directory / path)
            entries.append(
                ManifestEntry(
                    id=sample.id,
                    path=path,
                    patient_id=sample.patient_id,
                    labels=sample.labels,
                    provenance=Provenance.SYNTHETIC,
                    base_id=sample.base_id,
                )
            )
        manifest = DatasetManifest(entries=tuple(entries), class_names=class_names)
        write_manifest(manifest, directory / "synthetic_manifest.csv")

    def load_synthetic(self, round_index: int) -> list[ImageSample]:
        """Reload the synthetic samples kept in a round (pixels on the 8-bit grid).

        Raises:
            CapabilityError: If the round's synthetic images were not persisted.
        """
        manifest = read_manifest(self.round_dir(round_index) / "synthetic_manifest.csv")
        samples = []
        for entry in manifest.entries:
            if not entry.path:
                raise CapabilityError(
                    f"round {round_index} did not persist synthetic images; cannot resume this run"
                )
            samples.append(
                ImageSample(
                    id=entry.id,
                    pixels=quantize(read_image_png(manifest.resolve(entry.path))),
                    labels=entry.labels,
                    patient_id=entry.patient_id,
                    provenance=Provenance.SYNTHETIC,
                    base_id=entry.base_id,
                )
            )
        return samples

    def load_round_checkpoint(self, round_index: int) -> ClassifierCheckpoint:
        """Load the classifier saved by a round."""
        return load_classifier(self.round_dir(round_index) / "checkpoint")

    def write_final(self, checkpoint: ClassifierCheckpoint) -> Path:
        """Persist the classifier the run ended with and return its directory."""
        directory = self.directory / FINAL_DIR
        save_classifier(checkpoint, directory)
        return directory

    def write_trail(self, trail: AlTrail) -> None:
        """Write ``trail.json``."""
        (self.directory / TRAIL_FILE).write_text(json.dumps(trail.to_json(), indent=2), encoding="utf-8")

    def load_trail(self) -> AlTrail | None:
        """Return the persisted trail, or None for a fresh directory."""
        path = self.directory / TRAIL_FILE
        if not path.is_file():
            return None
        return AlTrail.from_json(json.loads(path.read_text(encoding="utf-8")))
