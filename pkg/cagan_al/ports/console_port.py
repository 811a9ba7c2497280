# SPDX-License-Identifier: LGPL-3.0-or-later
# SPDX-FileNotice: Part of the cagan-active-learning project.

"""Console port for user-facing output.

Entrypoints talk to the user through `ConsolePort` so commands can be tested
with a recording fake. Diagnostics go through `logging`; the port only carries
what a user asked for (hashes, report paths, selftest lines).
"""

from __future__ import annotations

from dataclasses import dataclass, field
import logging
import sys
from typing import Protocol, TextIO


class ConsolePort(Protocol):
    """Port interface for the messages a command prints."""

    def message(self, text: str) -> None:
        """Write a normal message."""

    def error(self, text: str) -> None:
        """Write an error message."""

    def warn(self, text: str) -> None:
        """Write a warning message."""

    def log(self, text: str) -> None:
        """Write an informational message."""


@dataclass
class StreamConsole:
    """Runtime adapter writing messages to stdout and warnings to stderr."""

    out: TextIO = field(default_factory=lambda: sys.stdout)
    err: TextIO = field(default_factory=lambda: sys.stderr)
    verbose: bool = False

    def message(self, text: str) -> None:
        """Write a normal message to stdout."""
        self.out.write(text if text.endswith("\n") else text + "\n")
        self.out.flush()

    def error(self, text: str) -> None:
        """Write an error message to stderr."""
        self.err.write(f"error: {text}\n")
        self.err.flush()

    def warn(self, text: str) -> None:
        """Write a warning message to stderr."""
        self.err.write(f"warning: {text}\n")
        self.err.flush()

    def log(self, text: str) -> None:
        """Write an informational message to stderr when verbose."""
        if self.verbose:
            self.err.write(text if text.endswith("\n") else text + "\n")


def configure_logging(level: str = "WARNING") -> None:
    """Configure the root logger once for command-line use."""
    numeric = logging.getLevelName(level.upper())
    if not isinstance(numeric, int):
        numeric = logging.WARNING
    logging.basicConfig(
        level=numeric,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
        force=True,
    )
