"""Unit tests for the command-line entrypoint."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import pytest

from cagan_al.config import RunConfig, to_flat_text
from cagan_al.entrypoints.cli import build_parser, main


@dataclass
class RecordingConsole:
    """Console fake keeping every message."""

    messages: list[str] = field(default_factory=list)
    errors: list[str] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    def message(self, text: str) -> None:
        self.messages.append(text)

    def error(self, text: str) -> None:
        self.errors.append(text)

    def warn(self, text: str) -> None:
        self.warnings.append(text)

    def log(self, text: str) -> None:
        self.messages.append(text)


@pytest.fixture
def config_file(tiny_config: RunConfig, tmp_path: Path) -> Path:
    """The tiny configuration written as a config file."""
    path = tmp_path / "tiny.toml"
    path.write_text(to_flat_text(tiny_config), encoding="utf-8")
    return path


def _hash(console: RecordingConsole) -> str:
    (line,) = [m for m in console.messages if m.startswith("hash ")]
    return line.removeprefix("hash ")


def test_selftest_command_succeeds() -> None:
    """The selftest subcommand exits 0 and says so."""
    console = RecordingConsole()
    assert main(["selftest"], console) == 0
    assert console.messages[-1] == "selftest passed"


def test_usage_errors_exit_1() -> None:
    """Unknown flags and missing subcommands are usage errors."""
    assert main(["selftest", "--bogus"], RecordingConsole()) == 1
    assert main([], RecordingConsole()) == 1


def test_configuration_errors_exit_1() -> None:
    """An unknown configuration key is reported, not raised."""
    console = RecordingConsole()
    assert main(["selftest", "--set", "data.bogus=1"], console) == 1
    assert "data.bogus" in console.errors[0]


def test_every_subcommand_is_registered() -> None:
    """The parser knows every pipeline stage and experiment."""
    parser = build_parser()
    for command in ("gen-data", "train-seg", "train-cagan", "run-al", "eval", "sweep", "mix-matrix", "growth-curve"):
        assert parser.parse_args([command] + (["ckpt"] if command == "eval" else [])).command == command


def test_gen_data_is_reproducible(config_file: Path, tmp_path: Path) -> None:
    """Two output roots with one seed hold corpora with the same hash."""
    first, second = RecordingConsole(), RecordingConsole()
    assert main(["gen-data", "--config", str(config_file)], first) == 0
    other_root = f"output_root={tmp_path / 'other'}"
    assert main(["gen-data", "--config", str(config_file), "--set", other_root], second) == 0
    assert _hash(first) == _hash(second)
    assert (tmp_path / "home" / "data" / "manifest.csv").is_file()


def test_existing_output_is_refused_unless_resumed(config_file: Path) -> None:
    """A second gen-data refuses to overwrite and resumes only on request."""
    assert main(["gen-data", "--config", str(config_file)], RecordingConsole()) == 0
    console = RecordingConsole()
    assert main(["gen-data", "--config", str(config_file)], console) == 1
    assert "already holds" in console.errors[0]
    resumed = RecordingConsole()
    assert main(["gen-data", "--config", str(config_file), "--on-existing", "resume"], resumed) == 0


def test_resume_with_another_seed_is_refused(config_file: Path) -> None:
    """Resuming output produced under another configuration fails."""
    assert main(["gen-data", "--config", str(config_file)], RecordingConsole()) == 0
    console = RecordingConsole()
    args = ["gen-data", "--config", str(config_file), "--seed", "7", "--on-existing", "resume"]
    assert main(args, console) == 1
    assert "different configuration" in console.errors[0]


def test_run_al_without_generators_fails_cleanly(config_file: Path) -> None:
    """The cagan strategy needs train-seg and train-cagan first."""
    assert main(["gen-data", "--config", str(config_file)], RecordingConsole()) == 0
    console = RecordingConsole()
    assert main(["run-al", "--config", str(config_file)], console) == 1
    assert "train-" in console.errors[0]


def test_eval_of_missing_checkpoint_fails(config_file: Path, tmp_path: Path) -> None:
    """Evaluating a directory without a classifier is a capability error."""
    console = RecordingConsole()
    assert main(["eval", str(tmp_path / "nothing"), "--config", str(config_file)], console) == 1
    assert console.errors


def test_report_without_experiments_warns(config_file: Path) -> None:
    """An empty reports directory is not an error."""
    console = RecordingConsole()
    assert main(["report", "--config", str(config_file)], console) == 0
    assert console.warnings
