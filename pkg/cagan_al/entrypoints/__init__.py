# SPDX-License-Identifier: LGPL-3.0-or-later
# SPDX-FileNotice: Part of the cagan-active-learning project.

"""Command-line entrypoints (argument parsing, subcommand dispatch, selftest)."""
