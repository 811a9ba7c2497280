# SPDX-License-Identifier: LGPL-3.0-or-later
# SPDX-FileNotice: Part of the cagan-active-learning project.

"""Argument parser with the project's usage and error conventions."""

from __future__ import annotations

import argparse
import shutil
import sys
import textwrap
from typing import Any, Never

USAGE_EXIT_CODE = 1


class CustomArgumentParser(argparse.ArgumentParser):
    """`ArgumentParser` that wraps help to the terminal and exits 1 on usage errors.

    The epilog is printed verbatim so configuration key listings keep their
    alignment.
    """

    def __init__(self, *args: Any, **kwargs: Any) -> None:
        kwargs.setdefault("formatter_class", _HelpFormatter)
        kwargs.setdefault("allow_abbrev", False)
        super().__init__(*args, **kwargs)

    def error(self, message: str) -> Never:
        sys.stderr.write(self.format_usage())
        sys.stderr.write(f"Error: {message}\n")
        sys.exit(USAGE_EXIT_CODE)


class _HelpFormatter(argparse.RawDescriptionHelpFormatter):
    def __init__(self, prog: str) -> None:
        width = shutil.get_terminal_size().columns or 80
        super().__init__(prog, width=min(width, 120), max_help_position=32)

    def _fill_text(self, text: str, width: int, indent: str) -> str:
        # Paragraphs are refilled; indented lines (key listings) are kept as written.
        lines: list[str] = []
        for line in text.splitlines():
            if line.startswith(" ") or not line:
                lines.append(indent + line)
            else:
                lines.extend(textwrap.wrap(line, width, initial_indent=indent, subsequent_indent=indent))
        return "\n".join(lines)
