# SPDX-License-Identifier: LGPL-3.0-or-later
# SPDX-FileNotice: Part of the cagan-active-learning project.

"""In-memory sample access behind a split-access guard.

During tuning (AL rounds, model selection) only the train and val splits may
be read. The test split opens once the guard enters its final phase, and each
trained model may read it at most once.
"""

from __future__ import annotations

from collections import Counter
from collections.abc import Iterable, Mapping
from enum import StrEnum
import logging

from ..domain.image_sample import ImageSample
from ..domain.manifest import DatasetManifest, Split
from ..errors import DataError, DomainError, SplitAccessError, SplitError
from .manifest_io import read_image_png, read_mask_png

logger = logging.getLogger(__name__)


class Phase(StrEnum):
    """Access phase of an experiment."""

    TUNING = "tuning"
    FINAL = "final"


_ALLOWED = {
    Phase.TUNING: frozenset({Split.TRAIN, Split.VAL}),
    Phase.FINAL: frozenset({Split.TRAIN, Split.VAL, Split.TEST}),
}


class SplitAccessGuard:
    """Whitelist of readable splits per phase plus a per-model test-read counter."""

    def __init__(self, phase: Phase = Phase.TUNING) -> None:
        self._phase = phase
        self._test_reads: Counter[str] = Counter()

    @property
    def phase(self) -> Phase:
        """Return the current phase."""
        return self._phase

    def enter_final(self) -> None:
        """Open the test split for final evaluation."""
        self._phase = Phase.FINAL

    def enter_tuning(self) -> None:
        """Close the test split again (a new model starts tuning)."""
        self._phase = Phase.TUNING

    def test_reads(self, model_tag: str) -> int:
        """Return how often `model_tag` read the test split."""
        return self._test_reads[model_tag]

    def check(self, split: Split, *, model_tag: str | None = None) -> None:
        """Raise `SplitAccessError` when `split` may not be read now."""
        if split not in _ALLOWED[self._phase]:
            raise SplitAccessError(f"split {split.value} is not readable in the {self._phase.value} phase")
        if split is Split.TEST:
            if not model_tag:
                raise SplitAccessError("test reads must name the evaluated model")
            if self._test_reads[model_tag]:
                raise SplitAccessError(f"model {model_tag} already read the test split")
            self._test_reads[model_tag] += 1


class SampleStore:
    """Id-addressed samples with split lookup through a `SplitAccessGuard`."""

    def __init__(
        self,
        samples: Iterable[ImageSample],
        assignment: Mapping[str, Split],
        class_names: tuple[str, ...],
        *,
        guard: SplitAccessGuard | None = None,
    ) -> None:
        self._samples: dict[str, ImageSample] = {}
        for sample in samples:
            if sample.id in self._samples:
                raise DataError("duplicate sample id", [sample.id])
            self._samples[sample.id] = sample
        self._assignment = dict(assignment)
        self.class_names = class_names
        self.guard = guard or SplitAccessGuard()

    @classmethod
    def from_manifest(cls, manifest: DatasetManifest, *, guard: SplitAccessGuard | None = None) -> SampleStore:
        """Load every image (and mask, when present) referenced by `manifest`."""
        return cls(load_samples(manifest), manifest.split_assignment, manifest.class_names, guard=guard)

    @property
    def num_classes(self) -> int:
        """Return C."""
        return len(self.class_names)

    def __len__(self) -> int:
        return len(self._samples)

    def __contains__(self, sample_id: object) -> bool:
        return sample_id in self._samples

    def split_of(self, sample_id: str) -> Split | None:
        """Return the split of `sample_id`."""
        return self._assignment.get(sample_id)

    def split_ids(self, split: Split) -> list[str]:
        """Return ids in `split` without reading pixels (no guard check)."""
        return [sid for sid in self._samples if self._assignment.get(sid) == split]

    def split_samples(self, split: Split, *, model_tag: str | None = None) -> list[ImageSample]:
        """Return the samples of `split` after the guard allows the read."""
        self.guard.check(split, model_tag=model_tag)
        return [self._samples[sid] for sid in self.split_ids(split)]

    def get(self, ids: Iterable[str]) -> list[ImageSample]:
        """Return samples by id; test-split ids are refused outside the final phase."""
        result = []
        for sid in ids:
            sample = self._samples.get(sid)
            if sample is None:
                raise DomainError(f"unknown sample id {sid}")
            if self._assignment.get(sid) is Split.TEST and self.guard.phase is not Phase.FINAL:
                raise SplitAccessError(f"sample {sid} belongs to the test split")
            result.append(sample)
        return result

    def patient_of(self, sample_id: str) -> str:
        """Return the patient id of a stored sample."""
        return self._samples[sample_id].patient_id

    def check_patient_disjoint(self) -> None:
        """Raise `SplitError` if one patient's samples sit in more than one split."""
        seen: dict[str, Split] = {}
        for sid, sample in self._samples.items():
            split = self._assignment.get(sid)
            if split is None:
                continue
            previous = seen.setdefault(sample.patient_id, split)
            if previous != split:
                raise SplitError(f"patient {sample.patient_id} appears in {previous.value} and {split.value}")


def load_samples(manifest: DatasetManifest) -> list[ImageSample]:
    """Read the images (and masks, when present) of every manifest entry, bypassing any guard."""
    samples = []
    for entry in manifest.entries:
        mask = read_mask_png(manifest.resolve(entry.mask_path)) if entry.mask_path else None
        samples.append(
            ImageSample(
                id=entry.id,
                pixels=read_image_png(manifest.resolve(entry.path)),
                labels=entry.labels,
                patient_id=entry.patient_id,
                provenance=entry.provenance,
                base_id=entry.base_id,
                mask_id=f"{entry.id}:gt" if mask is not None else None,
                mask=mask,
            )
        )
    logger.info("loaded %d samples from manifest", len(samples))
    return samples
