"""Unit tests for Monte-Carlo scoring, entropy and informativeness ranking."""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np
import pytest

from cagan_al.classifier.checkpoint import ClassifierCheckpoint, new_classifier
from cagan_al.config import ClassifierConfig, UncertaintyConfig
from cagan_al.errors import DomainError, NumericError, ShapeError
from cagan_al.uncertainty.monte_carlo import mc_predict
from cagan_al.uncertainty.scoring import (
    ScoredSample,
    UncertaintyEstimate,
    combine_variance,
    entropy_score,
    estimates_from_passes,
    random_scores,
    rank_by_informativeness,
    reduce_variance,
    score_samples,
    write_scores_csv,
)


def _classifier(masking_rate: float = 0.5) -> ClassifierCheckpoint:
    config = ClassifierConfig(widths=(4, 4, 8, 8), epochs=1, batch=8, heteroscedastic_samples=2)
    return new_classifier(config, side=32, num_classes=2, label_mode="multilabel", masking_rate=masking_rate, seed=0)


def test_combined_variance_matches_definition() -> None:
    """Population variance of passes plus the mean predicted variance."""
    p = np.array([[0.2, 0.9], [0.4, 0.9], [0.6, 0.9]])
    s2 = np.array([[0.01, 0.0], [0.02, 0.0], [0.03, 0.0]])
    got = combine_variance(p, s2)
    assert got[0] == pytest.approx(np.var([0.2, 0.4, 0.6]) + 0.02)
    assert got[1] == pytest.approx(0.0, abs=1e-15)


def test_combined_variance_is_shift_invariant() -> None:
    """Adding a constant to every pass leaves the epistemic part unchanged."""
    rng = np.random.default_rng(0)
    p = rng.random((7, 3)) * 0.5
    s2 = rng.random((7, 3)) * 0.01
    assert np.allclose(combine_variance(p + 0.25, s2), combine_variance(p, s2), atol=1e-14)


def test_combined_variance_validates_inputs() -> None:
    """Mismatched or non-finite inputs are rejected."""
    with pytest.raises(ShapeError):
        combine_variance(np.zeros((2, 3)), np.zeros((2, 2)))
    with pytest.raises(ShapeError):
        combine_variance(np.zeros((0, 3)), np.zeros((0, 3)))
    with pytest.raises(NumericError):
        combine_variance(np.array([[np.nan]]), np.array([[0.0]]))


def test_reduction_modes() -> None:
    """Per-class variances reduce by mean or max."""
    var = np.array([0.1, 0.3])
    assert reduce_variance(var) == pytest.approx(0.2)
    assert reduce_variance(var, "max") == pytest.approx(0.3)


def test_estimates_need_two_passes() -> None:
    """A single pass carries no epistemic information."""
    with pytest.raises(DomainError):
        UncertaintyEstimate(
            sample_id="x",
            predictions=np.zeros((1, 2)),
            variances=np.zeros((1, 2)),
            var=np.zeros(2),
            score=0.0,
        )


def test_estimates_from_passes_follow_sample_order() -> None:
    """Estimate i describes column i of the (T, N, C) passes."""
    predictions = np.stack([np.array([[0.1, 0.1], [0.5, 0.5]]), np.array([[0.1, 0.1], [0.9, 0.9]])])
    estimates = estimates_from_passes(["calm", "busy"], predictions, np.zeros_like(predictions))
    assert [e.sample_id for e in estimates] == ["calm", "busy"]
    assert estimates[0].score == pytest.approx(0.0, abs=1e-15)
    assert estimates[1].score == pytest.approx(0.04)
    assert estimates[1].passes == 2


def test_entropy_of_known_distributions() -> None:
    """Uniform predictions reach the maximum; certain ones score zero."""
    assert entropy_score([0.5, 0.5], "exclusive") == pytest.approx(math.log(2.0))
    assert entropy_score([0.5, 0.5, 0.5], "multilabel") == pytest.approx(math.log(2.0))
    assert entropy_score([1.0, 0.0, 1.0], "multilabel") == pytest.approx(0.0)


def test_entropy_rejects_non_probabilities() -> None:
    """Values outside [0, 1] are not probabilities."""
    with pytest.raises(DomainError):
        entropy_score([1.2, -0.2], "exclusive")
    with pytest.raises(DomainError):
        entropy_score([], "exclusive")


def test_ranking_orders_by_descending_score() -> None:
    """The top n_inf ids come out highest score first."""
    scored = [ScoredSample("a", 0.1), ScoredSample("b", 0.7), ScoredSample("c", 0.4), ScoredSample("d", 0.9)]
    result = rank_by_informativeness(scored, 3, tie_seed=0)
    assert result.ids == ("d", "b", "c")
    assert result.scores == (0.9, 0.7, 0.4)
    assert result.cutoff == 3
    assert not result.truncated


def test_ranking_ties_do_not_depend_on_input_order() -> None:
    """Equal scores are broken by a seeded per-id key, not by position."""
    scored = [ScoredSample(f"s{i}", 0.5) for i in range(8)]
    forward = rank_by_informativeness(scored, 4, tie_seed=3)
    backward = rank_by_informativeness(list(reversed(scored)), 4, tie_seed=3)
    assert forward.ids == backward.ids


def test_ranking_rejects_bad_requests() -> None:
    """Empty inputs, non-positive counts and duplicate ids are domain errors."""
    with pytest.raises(DomainError):
        rank_by_informativeness([], 1, tie_seed=0)
    with pytest.raises(DomainError):
        rank_by_informativeness([ScoredSample("a", 1.0)], 0, tie_seed=0)
    with pytest.raises(DomainError):
        rank_by_informativeness([ScoredSample("a", 1.0), ScoredSample("a", 0.5)], 1, tie_seed=0)


def test_random_scores_are_seeded(sample_factory) -> None:
    """The random baseline repeats under one seed."""
    samples = [sample_factory(f"x{i}", (1, 0)) for i in range(5)]
    assert random_scores(samples, 4) == random_scores(samples, 4)
    assert random_scores(samples, 4) != random_scores(samples, 5)


def test_scores_csv_marks_selection(tmp_path: Path) -> None:
    """Each scored id is written once with its selected flag."""
    path = tmp_path / "round" / "scores.csv"
    write_scores_csv(path, [ScoredSample("a", 0.5), ScoredSample("b", 0.25)], ["b"])
    assert path.read_text(encoding="utf-8").splitlines() == ["sample_id,score,selected", "a,0.5,0", "b,0.25,1"]


def test_mc_predict_is_deterministic_per_seed(sample_factory) -> None:
    """The same seed reproduces every masking draw; passes differ from each other."""
    checkpoint = _classifier()
    samples = [sample_factory(f"x{i}", (1, 0), seed=i) for i in range(3)]
    probs_a, vars_a = mc_predict(checkpoint, samples, 4, seed=7)
    probs_b, vars_b = mc_predict(checkpoint, samples, 4, seed=7)
    assert probs_a.shape == vars_a.shape == (4, 3, 2)
    assert np.array_equal(probs_a, probs_b)
    assert np.array_equal(vars_a, vars_b)
    assert not np.allclose(probs_a[0], probs_a[1])
    assert (vars_a >= 0.0).all()


def test_mc_predict_switches_masking_back_off(sample_factory) -> None:
    """Deterministic prediction after scoring is unaffected by the passes."""
    checkpoint = _classifier()
    samples = [sample_factory("x", (1, 0))]
    mc_predict(checkpoint, samples, 2, seed=0)
    assert not checkpoint.backbone.mask.mc_active


def test_mc_predict_needs_two_passes(sample_factory) -> None:
    """Fewer than two passes cannot estimate a variance."""
    with pytest.raises(DomainError):
        mc_predict(_classifier(), [sample_factory("x", (1, 0))], 1, seed=0)


def test_mc_predict_rejects_other_image_sides(sample_factory) -> None:
    """Images must have the side the classifier was built for."""
    with pytest.raises(ShapeError):
        mc_predict(_classifier(), [sample_factory("x", (1, 0), side=48)], 2, seed=0)


def test_score_samples_without_masking_has_no_epistemic_spread(sample_factory) -> None:
    """With masking rate 0 every pass agrees, so only the aleatoric part remains."""
    checkpoint = _classifier(masking_rate=0.0)
    samples = [sample_factory(f"x{i}", (0, 1), seed=i) for i in range(2)]
    estimates = score_samples(checkpoint, samples, UncertaintyConfig(mc_samples=3), seed=1)
    for estimate in estimates:
        assert np.allclose(estimate.predictions[0], estimate.predictions[1])
        expected = float(np.mean(estimate.variances.mean(axis=0)))
        assert estimate.score == pytest.approx(expected, abs=1e-12)
