# SPDX-License-Identifier: LGPL-3.0-or-later
# SPDX-FileNotice: Part of the cagan-active-learning project.

"""Seed handling.

All randomness of a run flows from `RunConfig.seed`. Components derive child
generators with `child_rng` so that adding a consumer does not shift the
streams of the others.
"""

from __future__ import annotations

from collections.abc import Iterator
from contextlib import contextmanager
import random
import zlib

import numpy as np
import torch


def seed_everything(seed: int) -> None:
    """Seed python, numpy and torch global generators."""
    random.seed(seed)
    np.random.seed(seed % (2**32))
    torch.manual_seed(seed)


def _tag_value(tag: str | int) -> int:
    if isinstance(tag, int):
        return tag
    return zlib.crc32(tag.encode("utf-8"))


def child_seed(seed: int, *tags: str | int) -> int:
    """Return a 63-bit integer seed derived from `seed` and `tags`."""
    sequence = np.random.SeedSequence([seed % (2**63), *(_tag_value(t) for t in tags)])
    return int(sequence.generate_state(1, dtype=np.uint64)[0]) >> 1


def child_rng(seed: int, *tags: str | int) -> np.random.Generator:
    """Return a numpy generator for the stream named by `tags`."""
    return np.random.default_rng([seed % (2**63), *(_tag_value(t) for t in tags)])


@contextmanager
def torch_seeded(seed: int) -> Iterator[None]:
    """Run a block under a fixed torch seed without touching the caller's stream."""
    with torch.random.fork_rng(devices=[]):
        torch.manual_seed(seed)
        yield
