"""End-to-end runs of the command line on the tiny configuration."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any

import pytest
import torch

from cagan_al.classifier.checkpoint import load_classifier
from cagan_al.config import RunConfig, to_flat_text
from cagan_al.entrypoints.cli import main
from cagan_al.ports.console_port import StreamConsole

pytestmark = pytest.mark.slow

STAGES = ("gen-data", "train-seg", "train-cagan", "run-al")


def _run(home: Path, config_file: Path, *args: str) -> int:
    return main([*args, "--config", str(config_file), "--set", f"output_root={home}"], StreamConsole())


def _rounds(home: Path) -> list[dict[str, Any]]:
    trail = json.loads((home / "runs" / "default" / "trail.json").read_text(encoding="utf-8"))
    for record in trail["rounds"]:
        record.pop("wall_time")
    rounds: list[dict[str, Any]] = trail["rounds"]
    return rounds


@pytest.fixture
def config_file(tiny_config: RunConfig, tmp_path: Path) -> Path:
    """The tiny configuration as a config file."""
    path = tmp_path / "tiny.toml"
    path.write_text(to_flat_text(tiny_config), encoding="utf-8")
    return path


def test_pipeline_is_deterministic(config_file: Path, tmp_path: Path) -> None:
    """Two homes with one seed select the same samples and end with identical weights."""
    homes = [tmp_path / "first", tmp_path / "second"]
    for home in homes:
        for stage in STAGES:
            assert _run(home, config_file, stage) == 0, stage

    first, second = (_rounds(home) for home in homes)
    assert first
    assert first == second
    weights = [load_classifier(home / "runs" / "default" / "final").backbone.state_dict() for home in homes]
    for key, value in weights[0].items():
        assert torch.equal(value, weights[1][key])


def test_stages_resume_and_test_is_read_once(config_file: Path, tmp_path: Path) -> None:
    """Completed stages resume without redoing work and a checkpoint reads test once."""
    home = tmp_path / "home"
    for stage in STAGES:
        assert _run(home, config_file, stage) == 0, stage
    before = _rounds(home)
    for stage in STAGES:
        assert _run(home, config_file, stage, "--on-existing", "resume") == 0, stage
    assert _rounds(home) == before

    final = str(home / "runs" / "default" / "final")
    assert _run(home, config_file, "eval", final, "--split", "test") == 0
    assert _run(home, config_file, "eval", final, "--split", "test") == 1
    assert _run(home, config_file, "eval", final, "--split", "test", "--on-existing", "resume") == 0
    assert (home / "runs" / "default" / "final" / "test_auc.json").is_file()


def test_sweep_and_report(config_file: Path, tmp_path: Path) -> None:
    """The sweep writes its summary with the headline comparison and report lists it."""
    home = tmp_path / "home"
    for stage in STAGES[:3]:
        assert _run(home, config_file, stage) == 0, stage
    methods = 'experiment.methods=["cagan", "fsl_random"]'
    assert _run(home, config_file, "sweep", "--set", methods) == 0
    summary = json.loads((home / "reports" / "sweep" / "summary.json").read_text(encoding="utf-8"))
    assert summary["kind"] == "label_budget_sweep"
    assert set(summary["summary"]["headline"]["methods"]) == {"cagan"}
    assert _run(home, config_file, "report") == 0
