"""Unit tests for the code version lookup."""

from __future__ import annotations

from importlib import metadata
from pathlib import Path

import cagan_al.version as version


def test_project_version_reads_matching_project() -> None:
    """_project_version returns the version of this project's pyproject."""
    assert version._project_version({"project": {"name": "cagan-active-learning", "version": "1.2.3"}}) == "1.2.3"
    assert version._project_version({"project": {"version": "1.2.3"}}) == "1.2.3"


def test_project_version_rejects_other_shapes() -> None:
    """_project_version ignores foreign projects and malformed tables."""
    assert version._project_version({}) is None
    assert version._project_version({"project": []}) is None
    assert version._project_version({"project": {"version": 123}}) is None
    assert version._project_version({"project": {"version": ""}}) is None
    assert version._project_version({"project": {"name": "other", "version": "9.9"}}) is None


def test_get_version_prefers_checkout(monkeypatch) -> None:
    """A checkout version wins over installed metadata."""
    monkeypatch.setattr(version, "_checkout_version", lambda: "2.0.0")
    monkeypatch.setattr(version, "_installed_version", lambda: "1.0.0")
    assert version.get_version() == "2.0.0"


def test_get_version_uses_installed_metadata(monkeypatch, tmp_path: Path) -> None:
    """Without a readable checkout the installed distribution version is used."""
    monkeypatch.setattr(version, "_checkout_pyproject", lambda: tmp_path / "missing.toml")
    monkeypatch.setattr(version.metadata, "version", lambda name: "1.4.0")
    assert version.get_version() == "1.4.0"


def test_get_version_falls_back_when_nothing_is_known(monkeypatch, tmp_path: Path) -> None:
    """get_version falls back to 0.0.0 when neither source is available."""

    def not_installed(name: str) -> str:
        raise metadata.PackageNotFoundError(name)

    monkeypatch.setattr(version, "_checkout_pyproject", lambda: tmp_path / "missing.toml")
    monkeypatch.setattr(version.metadata, "version", not_installed)
    assert version.get_version() == "0.0.0"


def test_get_version_reads_checkout_pyproject() -> None:
    """get_version reports the version declared in the checkout's pyproject.toml."""
    assert version.get_version() == "0.1.0"
