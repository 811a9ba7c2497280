"""Unit tests for histogram normalized mutual information."""

from __future__ import annotations

import numpy as np
import pytest
from scipy import stats
import torch

from cagan_al.cagan.nmi import (
    entropies_from_bins,
    normalized_mutual_information,
    quantize_bins,
    soft_nmi,
)
from cagan_al.errors import ShapeError


def _image(seed: int, side: int = 16) -> np.ndarray:
    return np.random.default_rng(seed).random((side, side))


def test_identical_images_reach_the_maximum() -> None:
    """NMI of a non-constant image with itself is exactly 2."""
    x = _image(0)
    assert normalized_mutual_information(x, x, 32) == pytest.approx(2.0, abs=1e-12)


def test_nmi_lies_between_one_and_two() -> None:
    """Any pair of non-constant images has NMI in [1, 2]."""
    for seed in range(10):
        value = normalized_mutual_information(_image(seed), _image(seed + 100), 8)
        assert 1.0 <= value <= 2.0


def test_nmi_is_symmetric() -> None:
    """Swapping the arguments does not change the value."""
    x, y = _image(1), _image(2)
    assert normalized_mutual_information(x, y, 16) == normalized_mutual_information(y, x, 16)


def test_nmi_is_invariant_to_bin_relabelling() -> None:
    """Permuting bin labels of both images leaves every entropy unchanged."""
    bins = 8
    qx, qy = quantize_bins(_image(3), bins), quantize_bins(_image(4), bins)
    perm = np.random.default_rng(5).permutation(bins)
    assert entropies_from_bins(perm[qx], perm[qy], bins) == entropies_from_bins(qx, qy, bins)


def test_constant_images_report_zero() -> None:
    """Zero joint entropy is reported as NMI 0."""
    x = np.full((4, 4), 0.3)
    assert normalized_mutual_information(x, x.copy(), 8) == 0.0


def test_quantize_bins_clips_the_top_edge() -> None:
    """Value 1.0 falls in the last bin rather than past it."""
    assert quantize_bins(np.array([0.0, 0.49, 0.5, 1.0]), 2).tolist() == [0, 0, 1, 1]


def test_shape_mismatch_is_rejected() -> None:
    """Both histogram forms require equal shapes."""
    with pytest.raises(ShapeError):
        normalized_mutual_information(np.zeros((4, 4)), np.zeros((2, 2)))
    with pytest.raises(ShapeError):
        soft_nmi(torch.zeros(1, 4), torch.zeros(1, 2))


def test_soft_nmi_prefers_identical_images() -> None:
    """The differentiable form ranks an identical pair above an unrelated one."""
    x = torch.from_numpy(_image(6)).reshape(1, 1, 16, 16)
    y = torch.from_numpy(_image(7)).reshape(1, 1, 16, 16)
    same = float(soft_nmi(x, x.clone(), 8)[0])
    other = float(soft_nmi(x, y, 8)[0])
    assert same > other > 0.0


def test_soft_nmi_is_per_sample() -> None:
    """Each batch row gets its own value."""
    x = torch.from_numpy(np.stack([_image(8), _image(9)])).unsqueeze(1)
    assert soft_nmi(x, x.clone(), 8).shape == (2,)


def _histogram_nmi(x: np.ndarray, y: np.ndarray, bins: int) -> float:
    edges = np.linspace(0.0, 1.0, bins + 1)
    joint, _, _ = np.histogram2d(x.ravel(), y.ravel(), bins=(edges, edges))
    hxy = stats.entropy(joint.ravel())
    if hxy == 0.0:
        return 0.0
    return float((stats.entropy(joint.sum(axis=1)) + stats.entropy(joint.sum(axis=0))) / hxy)


def test_nmi_matches_a_joint_histogram_oracle() -> None:
    """Entropies of an independently built joint histogram reproduce NMI to 1e-12."""
    rng = np.random.default_rng(12)
    for _ in range(100):
        bins = int(rng.choice([2, 4, 8, 16, 64]))
        x, y = rng.random((16, 16)), rng.random((16, 16))
        assert normalized_mutual_information(x, y, bins) == pytest.approx(_histogram_nmi(x, y, bins), abs=1e-12)
