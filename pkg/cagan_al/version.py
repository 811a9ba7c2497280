# SPDX-License-Identifier: LGPL-3.0-or-later
# SPDX-FileNotice: Part of the cagan-active-learning project.

"""Code version stamped into experiment summaries and ``cagan-al --version``.

A source checkout wins over installed metadata: an editable checkout may have
moved past the version recorded at install time, and summaries must name the
code that produced them.
"""

from __future__ import annotations

from importlib import metadata
from pathlib import Path
import tomllib
from typing import Any

DISTRIBUTION = "cagan-active-learning"
UNKNOWN_VERSION = "0.0.0"


def _checkout_pyproject() -> Path:
    return Path(__file__).resolve().parents[1] / "pyproject.toml"


def _project_version(pyproject: dict[str, Any]) -> str | None:
    project = pyproject.get("project")
    if not isinstance(project, dict) or project.get("name") not in (None, DISTRIBUTION):
        return None
    version = project.get("version")
    return version if isinstance(version, str) and version else None


def _checkout_version() -> str | None:
    try:
        pyproject = tomllib.loads(_checkout_pyproject().read_text(encoding="utf-8"))
    except (OSError, tomllib.TOMLDecodeError):
        return None
    return _project_version(pyproject)


def _installed_version() -> str | None:
    try:
        return metadata.version(DISTRIBUTION)
    except metadata.PackageNotFoundError:
        return None


def get_version() -> str:
    """Return the checkout version, else the installed one, else ``0.0.0``."""
    return _checkout_version() or _installed_version() or UNKNOWN_VERSION


__version__ = get_version()
