"""Unit tests for the closed-form selftest suite."""

from __future__ import annotations

from cagan_al.entrypoints.selftest import CHECKS, CheckResult, run_selftest


def test_every_check_passes() -> None:
    """The shipped implementation satisfies every closed-form check."""
    results = list(run_selftest())
    assert len(results) == len(CHECKS)
    failed = [r.line() for r in results if not r.passed]
    assert failed == []


def test_check_result_line() -> None:
    """Lines start with PASS or FAIL followed by the check name."""
    assert CheckResult("nmi", True, "ok").line() == "PASS  nmi: ok"
    assert CheckResult("auc", False, "off by 0.1").line() == "FAIL  auc: off by 0.1"


def test_raising_check_counts_as_failure(monkeypatch) -> None:
    """An exception inside a check becomes a failed result instead of aborting the suite."""

    def broken() -> CheckResult:
        raise ValueError("boom")

    monkeypatch.setattr("cagan_al.entrypoints.selftest.CHECKS", (broken,))
    (result,) = list(run_selftest())
    assert not result.passed
    assert result.name == "broken"
    assert "ValueError: boom" in result.detail
