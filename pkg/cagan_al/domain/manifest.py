# SPDX-License-Identifier: LGPL-3.0-or-later
# SPDX-FileNotice: Part of the cagan-active-learning project.

"""Dataset manifest types.

A manifest lists image files with their patient and labels, plus the split
each id belongs to. Paths are stored relative to `root`.
"""

from __future__ import annotations

from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field, replace
from enum import StrEnum
from pathlib import Path

from ..errors import DataError, DomainError
from .image_sample import Provenance


class Split(StrEnum):
    """Patient-level fold."""

    TRAIN = "train"
    VAL = "val"
    TEST = "test"


@dataclass(frozen=True)
class ManifestEntry:
    """One row of a manifest."""

    id: str
    path: str
    patient_id: str
    labels: tuple[int, ...]
    mask_path: str | None = None
    provenance: Provenance = Provenance.REAL
    base_id: str | None = None

    def label_names(self, class_names: tuple[str, ...]) -> list[str]:
        """Return the class names of set bits."""
        return [class_names[i] for i, bit in enumerate(self.labels) if bit]


@dataclass(frozen=True)
class DatasetManifest:
    """Image list, class names and split assignment."""

    entries: tuple[ManifestEntry, ...]
    class_names: tuple[str, ...]
    split_assignment: Mapping[str, Split] = field(default_factory=dict)
    root: Path | None = field(default=None, compare=False)

    def __post_init__(self) -> None:
        seen: set[str] = set()
        duplicates: list[str] = []
        for entry in self.entries:
            if entry.id in seen:
                duplicates.append(entry.id)
            seen.add(entry.id)
            if len(entry.labels) != len(self.class_names):
                raise DataError("label vector width differs from class_names", [entry.id])
        if duplicates:
            raise DataError("duplicate manifest ids", duplicates)
        unknown = [i for i in self.split_assignment if i not in seen]
        if unknown:
            raise DataError("split assignment names unknown ids", unknown)

    @property
    def num_classes(self) -> int:
        """Return C."""
        return len(self.class_names)

    def __len__(self) -> int:
        return len(self.entries)

    def entry(self, sample_id: str) -> ManifestEntry:
        """Return the entry with `sample_id`."""
        for entry in self.entries:
            if entry.id == sample_id:
                return entry
        raise DomainError(f"unknown sample id {sample_id}")

    def patients(self) -> list[str]:
        """Return patient ids in first-appearance order."""
        return list(dict.fromkeys(e.patient_id for e in self.entries))

    def split_of(self, sample_id: str) -> Split | None:
        """Return the split of `sample_id`, if assigned."""
        return self.split_assignment.get(sample_id)

    def entries_in(self, split: Split) -> list[ManifestEntry]:
        """Return entries assigned to `split`, in manifest order."""
        return [e for e in self.entries if self.split_assignment.get(e.id) == split]

    def with_splits(self, assignment: Mapping[str, Split]) -> DatasetManifest:
        """Return a copy with a new split assignment."""
        return replace(self, split_assignment=dict(assignment))

    def with_root(self, root: Path) -> DatasetManifest:
        """Return a copy whose relative paths resolve against `root`."""
        return replace(self, root=root)

    def subset(self, ids: Iterable[str]) -> DatasetManifest:
        """Return a manifest restricted to `ids` (manifest order kept)."""
        keep = set(ids)
        entries = tuple(e for e in self.entries if e.id in keep)
        assignment = {k: v for k, v in self.split_assignment.items() if k in keep}
        return replace(self, entries=entries, split_assignment=assignment)

    def resolve(self, relative: str) -> Path:
        """Return the absolute path of a manifest-relative path."""
        path = Path(relative)
        if path.is_absolute() or self.root is None:
            return path
        return self.root / path
