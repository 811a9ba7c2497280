# SPDX-License-Identifier: LGPL-3.0-or-later
# SPDX-FileNotice: Part of the cagan-active-learning project.

"""Patient-level train/val/test splitting."""

from __future__ import annotations

from collections import Counter
import logging

import numpy as np

from ..domain.manifest import DatasetManifest, Split
from ..errors import SplitError

logger = logging.getLogger(__name__)

_ORDER = (Split.TRAIN, Split.VAL, Split.TEST)


def split_by_patient(
    manifest: DatasetManifest,
    fractions: tuple[float, float, float] = (0.70, 0.10, 0.20),
    *,
    seed: int,
) -> DatasetManifest:
    """Assign every patient, with all of its images, to exactly one split.

    Patients are visited largest-first (ties in seeded random order) and each
    goes to the split furthest below its target image count, so achieved
    fractions track the targets to within roughly one patient.

    Raises:
        SplitError: For fewer than 3 patients or fractions not summing to 1.
    """
    if len(fractions) != 3 or abs(sum(fractions) - 1.0) > 1e-9 or min(fractions) < 0:
        raise SplitError(f"fractions must be three non-negative values summing to 1, got {fractions}")
    sizes = Counter(e.patient_id for e in manifest.entries)
    patients = list(sizes)
    if len(patients) < 3:
        raise SplitError(f"need at least 3 patients, got {len(patients)}")

    rng = np.random.default_rng(seed)
    tie_keys = rng.permutation(len(patients))
    order = sorted(range(len(patients)), key=lambda i: (-sizes[patients[i]], tie_keys[i]))

    total = sum(sizes.values())
    targets = [f * total for f in fractions]
    filled = [0, 0, 0]
    owner: dict[str, int] = {}
    for index in order:
        patient = patients[index]
        deficits = [targets[k] - filled[k] for k in range(3)]
        best = max(range(3), key=lambda k: (deficits[k], -k))
        owner[patient] = best
        filled[best] += sizes[patient]

    _fill_empty_splits(owner, sizes, filled, fractions)

    assignment = {e.id: _ORDER[owner[e.patient_id]] for e in manifest.entries}
    logger.info(
        "patient split: %s images, achieved %s",
        total,
        ", ".join(f"{s.value}={n / total:.3f}" for s, n in zip(_ORDER, filled, strict=True)),
    )
    return manifest.with_splits(assignment)


def _fill_empty_splits(
    owner: dict[str, int],
    sizes: Counter[str],
    filled: list[int],
    fractions: tuple[float, float, float],
) -> None:
    for k in range(3):
        if filled[k] or fractions[k] == 0:
            continue
        donor = max(range(3), key=lambda j: sum(1 for o in owner.values() if o == j))
        candidates = [p for p, o in owner.items() if o == donor]
        if len(candidates) < 2:
            continue
        moved = min(candidates, key=lambda p: (sizes[p], p))
        owner[moved] = k
        filled[donor] -= sizes[moved]
        filled[k] += sizes[moved]


def check_patient_disjoint(manifest: DatasetManifest) -> None:
    """Raise `SplitError` if any patient's images span more than one split."""
    seen: dict[str, Split] = {}
    for entry in manifest.entries:
        split = manifest.split_assignment.get(entry.id)
        if split is None:
            continue
        previous = seen.setdefault(entry.patient_id, split)
        if previous != split:
            raise SplitError(f"patient {entry.patient_id} appears in {previous.value} and {split.value}")
