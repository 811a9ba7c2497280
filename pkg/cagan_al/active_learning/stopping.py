# SPDX-License-Identifier: LGPL-3.0-or-later
# SPDX-FileNotice: Part of the cagan-active-learning project.

"""Validation-driven stopping and admission rules."""

from __future__ import annotations

from collections.abc import Sequence
import math


def stopping_check(history: Sequence[float], epsilon: float, window: int) -> bool:
    """Return True iff the last `window` successive AUC changes are all within `epsilon`.

    A history with fewer than ``window + 1`` entries is insufficient evidence
    and returns False. Undefined (NaN) values never count as stable.
    """
    if window < 1 or len(history) < window + 1:
        return False
    tail = list(history[-(window + 1) :])
    return all(
        math.isfinite(a) and math.isfinite(b) and abs(b - a) <= epsilon
        for a, b in zip(tail, tail[1:], strict=False)
    )


def admits(before: float | None, after: float | None, threshold: float | None) -> bool:
    """Return whether a round's validation gain passes the optional admission threshold."""
    if threshold is None:
        return True
    if before is None or after is None:
        return False
    return after - before >= threshold
