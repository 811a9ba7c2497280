"""Unit tests for seed derivation."""

from __future__ import annotations

import numpy as np
import torch

from cagan_al.seeding import child_rng, child_seed, seed_everything, torch_seeded


def test_child_seeds_are_stable_and_distinct() -> None:
    """One (seed, tags) pair always maps to one child; other tags map elsewhere."""
    assert child_seed(3, "split") == child_seed(3, "split")
    assert child_seed(3, "split") != child_seed(3, "segmenter")
    assert child_seed(3, "round", 1) != child_seed(3, "round", 2)
    assert 0 <= child_seed(-1, "x") < 2**63


def test_child_rng_streams_are_independent() -> None:
    """Drawing from one stream leaves another unchanged."""
    expected = child_rng(0, "b").random(3)
    child_rng(0, "a").random(100)
    assert np.array_equal(child_rng(0, "b").random(3), expected)


def test_torch_seeded_restores_the_outer_stream() -> None:
    """A seeded block neither depends on nor disturbs the caller's torch state."""
    seed_everything(5)
    reference = torch.rand(3)
    seed_everything(5)
    with torch_seeded(11):
        inner = torch.rand(2)
    assert torch.equal(torch.rand(3), reference)
    with torch_seeded(11):
        assert torch.equal(torch.rand(2), inner)
