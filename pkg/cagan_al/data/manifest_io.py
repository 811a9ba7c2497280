# SPDX-License-Identifier: LGPL-3.0-or-later
# SPDX-FileNotice: Part of the cagan-active-learning project.

"""Manifest CSV and PNG persistence.

Manifest header: ``id,path,patient_id,labels,split,mask_path``. Labels are
``|``-separated class names; an empty field is the no-finding pattern.
Synthetic manifests append ``provenance,base_id`` columns. Class order is kept
in a sibling ``<name>.classes.txt`` file, one name per line.
"""

from __future__ import annotations

import csv
import hashlib
from pathlib import Path

import numpy as np
from numpy.typing import NDArray
from PIL import Image

from ..domain.image_sample import Provenance
from ..domain.manifest import DatasetManifest, ManifestEntry, Split
from ..errors import DataError

BASE_COLUMNS = ("id", "path", "patient_id", "labels", "split", "mask_path")
LINEAGE_COLUMNS = ("provenance", "base_id")


def classes_path(manifest_path: Path) -> Path:
    """Return the class-order sidecar path of a manifest file."""
    return manifest_path.with_name(f"{manifest_path.stem}.classes.txt")


def write_manifest(manifest: DatasetManifest, path: Path) -> None:
    """Write `manifest` as CSV plus its class-order sidecar."""
    path.parent.mkdir(parents=True, exist_ok=True)
    lineage = any(e.provenance is Provenance.SYNTHETIC for e in manifest.entries)
    columns = BASE_COLUMNS + (LINEAGE_COLUMNS if lineage else ())
    with path.open("w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(columns)
        for entry in manifest.entries:
            split = manifest.split_assignment.get(entry.id)
            row = [
                entry.id,
                entry.path,
                entry.patient_id,
                "|".join(entry.label_names(manifest.class_names)),
                split.value if split else "",
                entry.mask_path or "",
            ]
            if lineage:
                row += [entry.provenance.value, entry.base_id or ""]
            writer.writerow(row)
    classes_path(path).write_text("\n".join(manifest.class_names) + "\n", encoding="utf-8")


def read_manifest(path: Path) -> DatasetManifest:
    """Read a manifest written by `write_manifest`.

    Raises:
        DataError: If the file, its sidecar or a label name is invalid.
    """
    try:
        class_names = tuple(
            line.strip() for line in classes_path(path).read_text(encoding="utf-8").splitlines() if line.strip()
        )
        with path.open(encoding="utf-8", newline="") as handle:
            rows = list(csv.DictReader(handle))
    except OSError as exc:
        raise DataError(f"cannot read manifest {path}: {exc}") from exc

    index = {name: i for i, name in enumerate(class_names)}
    entries: list[ManifestEntry] = []
    assignment: dict[str, Split] = {}
    bad: list[str] = []
    for row in rows:
        names = [n for n in (row.get("labels") or "").split("|") if n]
        if any(n not in index for n in names) or not row.get("id"):
            bad.append(row.get("id") or "?")
            continue
        bits = [0] * len(class_names)
        for name in names:
            bits[index[name]] = 1
        entries.append(
            ManifestEntry(
                id=row["id"],
                path=row["path"],
                patient_id=row["patient_id"],
                labels=tuple(bits),
                mask_path=row.get("mask_path") or None,
                provenance=Provenance(row.get("provenance") or Provenance.REAL.value),
                base_id=row.get("base_id") or None,
            )
        )
        if row.get("split"):
            assignment[row["id"]] = Split(row["split"])
    if bad:
        raise DataError(f"manifest {path} has rows with unknown labels or ids", bad)
    return DatasetManifest(
        entries=tuple(entries), class_names=class_names, split_assignment=assignment, root=path.parent
    )


def write_image_png(pixels: NDArray[np.floating], path: Path) -> None:
    """Write a [0, 1] float image as 8-bit grayscale PNG."""
    path.parent.mkdir(parents=True, exist_ok=True)
    data = np.clip(np.rint(np.asarray(pixels) * 255.0), 0, 255).astype(np.uint8)
    Image.fromarray(data).save(path, format="PNG")


def read_image_png(path: Path) -> NDArray[np.float32]:
    """Read an 8-bit grayscale PNG into float32 [0, 1]."""
    with Image.open(path) as image:
        data = np.asarray(image.convert("L"), dtype=np.float32)
    return data / np.float32(255.0)


def write_mask_png(mask: NDArray[np.integer], path: Path) -> None:
    """Write a binary mask as 1-bit PNG."""
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(np.asarray(mask).astype(bool)).save(path, format="PNG")


def read_mask_png(path: Path) -> NDArray[np.uint8]:
    """Read a 1-bit PNG into a 0/1 uint8 array."""
    with Image.open(path) as image:
        data = np.asarray(image.convert("L"))
    return (data > 0).astype(np.uint8)


def quantize(pixels: NDArray[np.floating]) -> NDArray[np.float32]:
    """Return pixels rounded to the 8-bit grid PNG storage uses."""
    return (np.clip(np.rint(np.asarray(pixels) * 255.0), 0, 255) / 255.0).astype(np.float32)


def corpus_hash(manifest_path: Path) -> str:
    """Return the sha256 over the manifest file and every file it references."""
    manifest = read_manifest(manifest_path)
    digest = hashlib.sha256()
    digest.update(manifest_path.read_bytes())
    digest.update(classes_path(manifest_path).read_bytes())
    for entry in manifest.entries:
        digest.update(manifest.resolve(entry.path).read_bytes())
        if entry.mask_path:
            digest.update(manifest.resolve(entry.mask_path).read_bytes())
    return digest.hexdigest()
