"""Unit tests for run-directory persistence."""

from __future__ import annotations

from pathlib import Path

import pytest

from cagan_al.active_learning.records import AlRoundRecord, AlTrail
from cagan_al.active_learning.run_store import CONFIG_FILE, RunStore
from cagan_al.classifier.checkpoint import ClassifierCheckpoint, load_classifier, new_classifier
from cagan_al.config import ClassifierConfig
from cagan_al.domain.auc_report import AucReport
from cagan_al.domain.image_sample import Provenance
from cagan_al.errors import CapabilityError, DomainError, RunDirectoryError
from cagan_al.uncertainty.scoring import ScoredSample


def _classifier() -> ClassifierCheckpoint:
    config = ClassifierConfig(widths=(4, 4, 8, 8))
    return new_classifier(config, side=32, num_classes=2, label_mode="multilabel", masking_rate=0.2, seed=0)


def _report() -> AucReport:
    return AucReport(("a", "b"), (0.6, None), (2, 1), (2, 3), split="val")


def _record(round_index: int = 1, synthetic: tuple[str, ...] = ()) -> AlRoundRecord:
    return AlRoundRecord(
        round_index=round_index,
        selected_ids=("s1", "s2"),
        synthetic_per_class={0: synthetic},
        auc_before=0.5,
        auc_after=0.6,
        labels_consumed=7,
        wall_time=0.1,
    )


def test_open_refuses_an_existing_run(tmp_path: Path) -> None:
    """A directory holding config.json is never silently reused."""
    store = RunStore(tmp_path / "run")
    assert store.open('{"seed": 0}') is False
    assert (tmp_path / "run" / CONFIG_FILE).read_text(encoding="utf-8") == '{"seed": 0}'
    with pytest.raises(RunDirectoryError):
        RunStore(tmp_path / "run").open('{"seed": 0}')


def test_open_resumes_only_the_same_configuration(tmp_path: Path) -> None:
    """Resume requires a byte-identical frozen configuration."""
    RunStore(tmp_path / "run").open('{"seed": 0}')
    assert RunStore(tmp_path / "run").open('{"seed": 0}', on_existing="resume") is True
    with pytest.raises(RunDirectoryError):
        RunStore(tmp_path / "run").open('{"seed": 1}', on_existing="resume")


def test_round_artifacts_are_written(tmp_path: Path, sample_factory) -> None:
    """A round writes its selection, synthetic manifest, scores, report and checkpoint."""
    store = RunStore(tmp_path / "run")
    picked = [sample_factory("s1", (1, 0)), sample_factory("s2", (0, 1))]
    twin = sample_factory("s1~x", (0, 1), with_mask=False, provenance=Provenance.SYNTHETIC, base_id="s1")
    store.write_round(
        _record(synthetic=("s1~x",)),
        selected=picked,
        selected_scores=[0.9, 0.4],
        synthetic=[twin],
        pool_scores=[ScoredSample("s1", 0.9), ScoredSample("s2", 0.4), ScoredSample("s3", 0.1)],
        report=_report(),
        checkpoint=_classifier().at_round(1),
    )
    directory = tmp_path / "run" / "round_1"
    assert (directory / "selected.csv").read_text(encoding="utf-8").splitlines()[1:] == [
        "s1,patient-s1,a,0.9",
        "s2,patient-s2,b,0.4",
    ]
    assert (directory / "scores.csv").read_text(encoding="utf-8").count(",1\n") == 2
    assert (directory / "auc.json").is_file()
    assert store.load_round_checkpoint(1).round_index == 1

    reloaded = store.load_synthetic(1)
    assert [s.id for s in reloaded] == ["s1~x"]
    assert reloaded[0].base_id == "s1"
    assert reloaded[0].provenance is Provenance.SYNTHETIC


def test_unpersisted_synthetic_images_cannot_be_resumed(tmp_path: Path, sample_factory) -> None:
    """Without synthetic PNGs only the manifest exists, which is not enough to resume."""
    store = RunStore(tmp_path / "run", persist_synthetic_images=False)
    twin = sample_factory("s1~x", (0, 1), with_mask=False, provenance=Provenance.SYNTHETIC, base_id="s1")
    store.write_round(
        _record(synthetic=("s1~x",)),
        selected=[sample_factory("s1", (1, 0)), sample_factory("s2", (0, 1))],
        selected_scores=[0.9, 0.4],
        synthetic=[twin],
        pool_scores=[],
        report=_report(),
        checkpoint=_classifier().at_round(1),
    )
    assert not (tmp_path / "run" / "round_1" / "synthetic").exists()
    with pytest.raises(CapabilityError):
        store.load_synthetic(1)


def test_trail_round_trip(tmp_path: Path) -> None:
    """The trail reloads with its records and stop reason."""
    store = RunStore(tmp_path)
    assert store.load_trail() is None
    trail = AlTrail(initial_ids=("a", "b"), initial_auc=None, records=[_record()], stop_reason="max_rounds")
    store.write_trail(trail)
    loaded = store.load_trail()
    assert loaded is not None
    assert loaded.records == trail.records
    assert loaded.stop_reason == "max_rounds"
    assert loaded.auc_history()[1] == pytest.approx(0.6)


def test_final_classifier_directory(tmp_path: Path) -> None:
    """The classifier a run ends with is saved under final/."""
    store = RunStore(tmp_path / "run")
    directory = store.write_final(_classifier().at_round(3))
    assert directory == tmp_path / "run" / "final"
    assert load_classifier(directory).round_index == 3


def test_initial_checkpoint_round_trip(tmp_path: Path) -> None:
    """The initial-pool classifier and its report are kept apart from the rounds."""
    store = RunStore(tmp_path / "run")
    store.write_initial(_classifier().at_round(0), _report())
    assert store.load_initial().round_index == 0
    assert (tmp_path / "run" / "initial" / "auc.json").is_file()


def test_round_records_validate_themselves() -> None:
    """Rounds start at 1 and never select an id twice."""
    with pytest.raises(DomainError):
        _record(round_index=0)
    with pytest.raises(DomainError):
        AlRoundRecord(1, ("a", "a"), {}, None, None, 2, 0.0)
