# SPDX-License-Identifier: LGPL-3.0-or-later
# SPDX-FileNotice: Part of the cagan-active-learning project.

"""Exception hierarchy shared by every module.

All errors raised on purpose derive from `CaganAlError`; the CLI maps them to
exit code 1 and anything else to exit code 2.
"""

from __future__ import annotations

from collections.abc import Iterable
from pathlib import Path


class CaganAlError(Exception):
    """Base class for all domain and configuration failures."""


class ConfigurationError(CaganAlError):
    """A configuration value is invalid.

    Attributes:
        field: Dotted name of the offending configuration field.
    """

    def __init__(self, field: str, message: str) -> None:
        super().__init__(f"{field}: {message}")
        self.field = field


class DomainError(CaganAlError):
    """An operation was called outside its domain (empty input, bad range)."""


class ShapeError(CaganAlError):
    """Array or tensor shapes are incompatible."""


class DataError(CaganAlError):
    """Input data is incomplete.

    Attributes:
        ids: Sample ids that triggered the failure.
    """

    def __init__(self, message: str, ids: Iterable[str] = ()) -> None:
        self.ids = list(ids)
        shown = ", ".join(self.ids[:20])
        suffix = f" ({len(self.ids)} ids: {shown}{' ...' if len(self.ids) > 20 else ''})" if self.ids else ""
        super().__init__(f"{message}{suffix}")


class SplitError(CaganAlError):
    """A patient-level split cannot be produced."""


class NumericError(CaganAlError):
    """A loss input or output is not finite.

    Attributes:
        head: Name of the network head or tensor that carried the bad values.
    """

    def __init__(self, head: str, message: str = "non-finite values") -> None:
        super().__init__(f"{head}: {message}")
        self.head = head


class CapabilityError(CaganAlError):
    """A required model or checkpoint capability is missing."""


class TrainingError(CaganAlError):
    """Training cannot start or cannot be carried out on the given data."""


class TrainingDivergedError(TrainingError):
    """A training loss became non-finite.

    Attributes:
        checkpoint_path: Directory holding the last good checkpoint, if any.
        iteration: Iteration at which the divergence was detected.
    """

    def __init__(self, iteration: int, checkpoint_path: Path | None) -> None:
        where = f"; last good checkpoint at {checkpoint_path}" if checkpoint_path else ""
        super().__init__(f"training diverged at iteration {iteration}{where}")
        self.iteration = iteration
        self.checkpoint_path = checkpoint_path


class ScheduleError(CaganAlError):
    """The active-learning schedule cannot proceed."""


class LeakageError(CaganAlError):
    """Samples of one patient were found in more than one fold."""


class SplitAccessError(CaganAlError):
    """A split was read in a phase that does not allow it."""


class RunDirectoryError(CaganAlError):
    """A run directory already holds results and may not be reused."""
