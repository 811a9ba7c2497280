"""Unit tests for the task classifier: AUC, evaluation, training and checkpoints."""

from __future__ import annotations

import itertools
from pathlib import Path

import numpy as np
import pytest
import torch

from cagan_al.classifier.checkpoint import ClassifierCheckpoint, load_classifier, new_classifier, save_classifier
from cagan_al.classifier.evaluation import (
    auc,
    auc_report,
    evaluate,
    predict_proba,
    read_auc_json,
    write_auc_json,
    write_auc_table,
)
from cagan_al.classifier.perceptual import ClassifierFeatureExtractor
from cagan_al.classifier.training import finetune, heteroscedastic_loss, inverse_frequency_weights
from cagan_al.config import ClassifierConfig, LabelMode
from cagan_al.data.sample_store import SampleStore
from cagan_al.domain.auc_report import AucReport
from cagan_al.domain.manifest import Split
from cagan_al.errors import CapabilityError, DomainError, ShapeError, SplitAccessError, TrainingError

_CONFIG = ClassifierConfig(widths=(4, 4, 8, 8), epochs=2, batch=4, heteroscedastic_samples=2)


def _classifier(label_mode: LabelMode = "multilabel", seed: int = 0) -> ClassifierCheckpoint:
    return new_classifier(_CONFIG, side=32, num_classes=2, label_mode=label_mode, masking_rate=0.2, seed=seed)


def _pairwise(scores: list[float], labels: list[int]) -> float:
    pos = [s for s, y in zip(scores, labels, strict=True) if y]
    neg = [s for s, y in zip(scores, labels, strict=True) if not y]
    wins = sum(1.0 if p > n else 0.5 if p == n else 0.0 for p, n in itertools.product(pos, neg))
    return wins / (len(pos) * len(neg))


def test_auc_matches_pairwise_counting() -> None:
    """Rank AUC equals the fraction of correctly ordered positive/negative pairs, ties counting half."""
    rng = np.random.default_rng(0)
    for _ in range(200):
        size = int(rng.integers(2, 60))
        scores = rng.integers(0, 10, size).astype(float).tolist()
        labels = [int(v) for v in rng.random(size) < 0.4]
        if 0 < sum(labels) < size:
            assert auc(scores, labels) == pytest.approx(_pairwise(scores, labels), abs=1e-12)
        else:
            assert auc(scores, labels) is None


def test_auc_ignores_strictly_increasing_transforms() -> None:
    """Only the order of the scores matters, ties included."""
    rng = np.random.default_rng(2)
    for _ in range(50):
        scores = rng.integers(0, 20, 40) / 20.0
        labels = rng.permutation(np.repeat([1, 0], 20)).tolist()
        base = auc(scores, labels)
        assert base is not None
        for transformed in (np.exp(scores), 3.0 * scores - 7.0, scores**3, np.log1p(scores)):
            assert auc(transformed, labels) == pytest.approx(base, abs=1e-12)


def test_auc_of_shuffled_labels_is_near_chance() -> None:
    """Labels unrelated to the scores give an AUC of about one half."""
    rng = np.random.default_rng(3)
    scores = rng.random(1000)
    labels = rng.permutation(np.repeat([1, 0], 500)).tolist()
    value = auc(scores, labels)
    assert value is not None
    assert abs(value - 0.5) <= 0.05


def test_auc_extremes_and_undefined_cases() -> None:
    """Perfect ordering gives 1, reversed 0, and a single class None."""
    assert auc([0.1, 0.2, 0.8, 0.9], [0, 0, 1, 1]) == 1.0
    assert auc([0.9, 0.8, 0.2, 0.1], [0, 0, 1, 1]) == 0.0
    assert auc([0.5, 0.6], [1, 1]) is None
    with pytest.raises(ShapeError):
        auc([0.1, 0.2], [1])


def test_auc_report_marks_thin_classes_undefined() -> None:
    """Classes with fewer than two positives or negatives are left out of the macro average."""
    probabilities = np.array([[0.9, 0.1], [0.8, 0.2], [0.1, 0.7], [0.2, 0.3]])
    labels = np.array([[1, 0], [1, 0], [0, 1], [0, 0]], dtype=np.float32)
    report = auc_report(probabilities, labels, ("a", "b"), split="val")
    assert report.per_class == (1.0, None)
    assert report.undefined_classes == ("b",)
    assert report.macro == 1.0
    assert report.cell(1) == "undef"
    assert (report.positives, report.negatives) == ((2, 1), (2, 3))


def test_auc_report_json_round_trip(tmp_path: Path) -> None:
    """A written report reads back equal."""
    report = AucReport(("a", "b"), (0.75, None), (3, 1), (5, 7), split="test", model_tag="m")
    path = tmp_path / "auc.json"
    write_auc_json(report, path)
    assert read_auc_json(path) == report


def test_auc_report_rejects_out_of_range_values() -> None:
    """AUC values lie in [0, 1]."""
    with pytest.raises(DomainError):
        AucReport(("a",), (1.5,), (2,), (2,), split="val")


def test_auc_table_has_a_macro_row(tmp_path: Path) -> None:
    """One column per report, one row per class plus the macro row."""
    first = AucReport(("a", "b"), (0.5, 1.0), (2, 2), (2, 2), split="val")
    second = AucReport(("a", "b"), (None, 0.25), (1, 2), (3, 2), split="val")
    path = tmp_path / "table.csv"
    write_auc_table({"round0": first, "round1": second}, path)
    lines = path.read_text(encoding="utf-8").splitlines()
    assert lines == ["class,round0,round1", "a,0.5,undef", "b,1.0,0.25", "macro,0.75,0.25"]


def test_predict_proba_shapes_and_ranges(sample_factory) -> None:
    """Multilabel rows are independent sigmoids; exclusive rows sum to one."""
    samples = [sample_factory(f"x{i}", (1, 0), seed=i) for i in range(3)]
    multilabel = predict_proba(_classifier(), samples)
    assert multilabel.shape == (3, 2)
    assert ((multilabel > 0) & (multilabel < 1)).all()
    exclusive = predict_proba(_classifier("exclusive"), samples)
    assert np.allclose(exclusive.sum(axis=1), 1.0)
    assert predict_proba(_classifier(), []).shape == (0, 2)


def test_evaluate_goes_through_the_split_guard(sample_factory) -> None:
    """Evaluation on test is refused while tuning and allowed once per model after."""
    samples = [sample_factory(f"t{i}", (i % 2, 1 - i % 2), seed=i) for i in range(6)]
    store = SampleStore(samples, {s.id: Split.TEST for s in samples}, ("a", "b"))
    checkpoint = _classifier()
    with pytest.raises(SplitAccessError):
        evaluate(checkpoint, store, Split.TEST, model_tag="m")
    store.guard.enter_final()
    report = evaluate(checkpoint, store, Split.TEST, model_tag="m")
    assert report.split == "test"
    assert report.positives == (3, 3)
    with pytest.raises(SplitAccessError):
        evaluate(checkpoint, store, Split.TEST, model_tag="m")


def test_inverse_frequency_weights(sample_factory) -> None:
    """Rare classes weigh more; weights average to one over present classes."""
    samples = [sample_factory("a", (1, 0, 0)), sample_factory("b", (1, 0, 0)), sample_factory("c", (0, 1, 0))]
    weights = inverse_frequency_weights(samples)
    assert weights[2] == 0.0
    assert weights[1] == pytest.approx(2 * weights[0])
    assert weights[:2].mean() == pytest.approx(1.0)


def test_heteroscedastic_loss_without_variance_is_plain_nll() -> None:
    """Without a variance head the loss is ordinary cross-entropy."""
    logits = torch.zeros(2, 2)
    labels = torch.tensor([[1.0, 0.0], [0.0, 1.0]])
    assert float(heteroscedastic_loss(logits, None, labels, "multilabel")) == pytest.approx(np.log(2.0))
    with pytest.raises(ShapeError):
        heteroscedastic_loss(logits, torch.zeros(2, 3), labels, "multilabel")


def test_finetune_leaves_the_input_untouched(sample_factory) -> None:
    """Fine-tuning trains a copy and records the round it belongs to."""
    samples = [sample_factory(f"x{i}", (i % 2, 1 - i % 2), seed=i) for i in range(8)]
    start = _classifier()
    before = {k: v.clone() for k, v in start.backbone.state_dict().items()}
    tuned = finetune(start, samples, epochs=2, seed=0, round_index=1)
    assert tuned.round_index == 1
    assert start.round_index == -1
    assert all(torch.equal(before[k], v) for k, v in start.backbone.state_dict().items())
    assert any(not torch.equal(before[k], v) for k, v in tuned.backbone.state_dict().items())
    assert len(tuned.metrics["loss_trace"]) == 2


def test_finetune_is_deterministic(sample_factory) -> None:
    """One seed yields identical weights."""
    samples = [sample_factory(f"x{i}", (i % 2, 1 - i % 2), seed=i) for i in range(8)]
    first = finetune(_classifier(), samples, epochs=1, seed=3)
    second = finetune(_classifier(), samples, epochs=1, seed=3)
    for key, value in first.backbone.state_dict().items():
        assert torch.equal(value, second.backbone.state_dict()[key])


def test_finetune_head_freeze_keeps_convolutions(sample_factory) -> None:
    """Freezing to the head leaves every convolution weight unchanged."""
    samples = [sample_factory(f"x{i}", (i % 2, 1 - i % 2), seed=i) for i in range(4)]
    start = _classifier()
    tuned = finetune(start, samples, epochs=1, seed=0, freeze="head")
    for key, value in start.backbone.state_dict().items():
        if key.startswith("blocks."):
            assert torch.equal(value, tuned.backbone.state_dict()[key])


def test_finetune_rejects_single_class_exclusive_pool(sample_factory) -> None:
    """An exclusive classifier cannot learn from one class."""
    samples = [sample_factory(f"x{i}", (1, 0)) for i in range(3)]
    with pytest.raises(TrainingError):
        finetune(_classifier("exclusive"), samples, epochs=1, seed=0)
    with pytest.raises(DomainError):
        finetune(_classifier(), [], epochs=1, seed=0)


def test_checkpoint_round_trip(tmp_path: Path, sample_factory) -> None:
    """Saved weights reload to identical predictions and metadata."""
    checkpoint = _classifier().at_round(2)
    checkpoint.metrics = {"note": "x"}
    save_classifier(checkpoint, tmp_path / "ckpt")
    loaded = load_classifier(tmp_path / "ckpt")
    assert loaded.round_index == 2
    assert loaded.metrics == {"note": "x"}
    samples = [sample_factory("x", (1, 0))]
    assert np.array_equal(predict_proba(loaded, samples), predict_proba(checkpoint, samples))


def test_checkpoint_refuses_to_overwrite_a_later_round(tmp_path: Path) -> None:
    """Saving an older round over a newer one is refused."""
    save_classifier(_classifier().at_round(3), tmp_path / "ckpt")
    with pytest.raises(DomainError):
        save_classifier(_classifier().at_round(1), tmp_path / "ckpt")


def test_missing_checkpoint_is_a_capability_error(tmp_path: Path) -> None:
    """Loading from an empty directory reports the missing capability."""
    with pytest.raises(CapabilityError):
        load_classifier(tmp_path)


def test_round_relabel_cannot_go_backwards() -> None:
    """A checkpoint's round never decreases."""
    with pytest.raises(DomainError):
        _classifier().at_round(2).at_round(1)


def test_feature_extractor_is_frozen() -> None:
    """Perceptual features pass gradients to images but not to the copied weights."""
    extractor = ClassifierFeatureExtractor(_classifier(), block=2)
    images = torch.rand(2, 1, 32, 32, requires_grad=True)
    features = extractor(images)
    assert features.shape == (2, 4, 16, 16)
    features.sum().backward()
    assert images.grad is not None
