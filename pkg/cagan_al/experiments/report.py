# SPDX-License-Identifier: LGPL-3.0-or-later
# SPDX-FileNotice: Part of the cagan-active-learning project.

"""Experiment reports: per-condition results, seed aggregates and their files.

A report directory ``reports/<experiment>/`` holds ``summary.json`` (config
hash, code version, per-condition median and IQR, experiment-specific
summary), ``table.csv`` (class rows by condition columns, seed medians) and
``curve.csv`` (one row per condition and seed).
"""

from __future__ import annotations

from collections import defaultdict
from collections.abc import Iterator, Mapping, Sequence
import csv
from dataclasses import dataclass, field
import json
import logging
from pathlib import Path
from typing import Any

import numpy as np

from ..domain.auc_report import UNDEFINED, AucReport
from ..errors import DomainError

logger = logging.getLogger(__name__)

SUMMARY_FILE = "summary.json"
TABLE_FILE = "table.csv"
CURVE_FILE = "curve.csv"
CURVE_COLUMNS = ("x_count", "mode", "seed", "macro_auc", "x_share_train", "x_share_initial")
SKIPPED = "skipped"


@dataclass(frozen=True)
class ConditionResult:
    """Outcome of one (method, axis point, seed) job.

    Attributes:
        method: Strategy or baseline name.
        x: Axis value (label budget fraction or cumulative synthetic count).
        seed: Seed of the job.
        report: Test AUC report, None when skipped.
        skip_reason: Why the condition was not run.
        x_count: Axis value as a count (labels consumed or synthetic images).
        x_share_train: `x_count` over the train split size.
        x_share_initial: `x_count` over the initial real pool size.
    """

    method: str
    x: float
    seed: int
    report: AucReport | None = None
    skip_reason: str = ""
    x_count: int = 0
    x_share_train: float = 0.0
    x_share_initial: float = 0.0

    def __post_init__(self) -> None:
        if (self.report is None) == (not self.skip_reason):
            raise DomainError(f"condition {self.method}@{self.x}: exactly one of report and skip_reason is required")

    @property
    def macro(self) -> float | None:
        """Return the test macro-AUC, or None when skipped or undefined."""
        return None if self.report is None else self.report.macro

    @property
    def condition(self) -> str:
        """Return the ``method@x`` column name."""
        return f"{self.method}@{self.x:g}"


@dataclass(frozen=True)
class SeedAggregate:
    """Median and interquartile range of a condition's macro-AUC over seeds."""

    method: str
    x: float
    seeds: int
    median: float | None
    q1: float | None
    q3: float | None
    skip_reason: str = ""

    def to_json(self) -> dict[str, Any]:
        return {
            "method": self.method,
            "x": self.x,
            "seeds": self.seeds,
            "median": self.median,
            "q1": self.q1,
            "q3": self.q3,
            "skip_reason": self.skip_reason,
        }


def median_iqr(values: Sequence[float | None]) -> tuple[float | None, float | None, float | None]:
    """Return (median, first quartile, third quartile) of the defined values."""
    defined = [v for v in values if v is not None and not np.isnan(v)]
    if not defined:
        return None, None, None
    q1, median, q3 = np.percentile(np.asarray(defined, dtype=np.float64), [25.0, 50.0, 75.0])
    return float(median), float(q1), float(q3)


def median_report(reports: Sequence[AucReport], *, model_tag: str = "") -> AucReport:
    """Return a report whose per-class AUCs are medians over `reports`."""
    if not reports:
        raise DomainError("median_report needs at least one report")
    first = reports[0]
    per_class: list[float | None] = []
    for index in range(len(first.class_names)):
        median, _, _ = median_iqr([r.per_class[index] for r in reports])
        per_class.append(median)
    return AucReport(
        class_names=first.class_names,
        per_class=tuple(per_class),
        positives=first.positives,
        negatives=first.negatives,
        split=first.split,
        model_tag=model_tag,
    )


@dataclass
class ExperimentReport:
    """All conditions of one experiment plus provenance.

    Results are kept sorted by method, axis value and seed. `tables` holds extra
    CSV files (name to rows) written next to the standard ones.
    """

    kind: str
    class_names: tuple[str, ...]
    results: list[ConditionResult]
    config_hash: str
    version: str
    summary: dict[str, Any] = field(default_factory=dict)
    axis_in_columns: bool = True
    tables: dict[str, list[list[str]]] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.results:
            raise DomainError(f"experiment {self.kind} has no conditions")
        self.results.sort(key=lambda r: (r.method, r.x, r.seed))

    @property
    def seeds(self) -> tuple[int, ...]:
        return tuple(sorted({r.seed for r in self.results}))

    @property
    def axis(self) -> tuple[float, ...]:
        """Return the sorted distinct axis values."""
        return tuple(sorted({r.x for r in self.results}))

    @property
    def methods(self) -> tuple[str, ...]:
        return tuple(dict.fromkeys(r.method for r in self.results))

    def conditions(self) -> Iterator[tuple[str, float, list[ConditionResult]]]:
        """Yield ``(method, x, results over seeds)`` in sorted order."""
        grouped: dict[tuple[str, float], list[ConditionResult]] = defaultdict(list)
        for result in self.results:
            grouped[(result.method, result.x)].append(result)
        for (method, x), results in grouped.items():
            yield method, x, results

    def aggregate(self) -> list[SeedAggregate]:
        """Return the seed median and IQR of every condition."""
        aggregates = []
        for method, x, results in self.conditions():
            skipped = [r.skip_reason for r in results if r.skip_reason]
            median, q1, q3 = median_iqr([r.macro for r in results])
            aggregates.append(
                SeedAggregate(
                    method=method,
                    x=x,
                    seeds=len(results),
                    median=median,
                    q1=q1,
                    q3=q3,
                    skip_reason=skipped[0] if len(skipped) == len(results) else "",
                )
            )
        return aggregates

    def median_macro(self, method: str, x: float) -> float | None:
        """Return the seed median of one condition, or None when absent."""
        for aggregate in self.aggregate():
            if aggregate.method == method and abs(aggregate.x - x) < 1e-9:
                return aggregate.median
        return None

    def table_columns(self) -> dict[str, AucReport | str]:
        """Return per-condition median reports; fully skipped conditions map to their reason."""
        columns: dict[str, AucReport | str] = {}
        for method, _, results in self.conditions():
            reports = [r.report for r in results if r.report is not None]
            name = results[0].condition if self.axis_in_columns else method
            if reports:
                columns[name] = median_report(reports, model_tag=name)
            else:
                columns[name] = results[0].skip_reason or SKIPPED
        return columns

    def to_json(self) -> dict[str, Any]:
        return {
            "kind": self.kind,
            "config_hash": self.config_hash,
            "version": self.version,
            "class_names": list(self.class_names),
            "seeds": list(self.seeds),
            "axis": list(self.axis),
            "conditions": [a.to_json() for a in self.aggregate()],
            "summary": self.summary,
        }

    def write(self, directory: Path) -> None:
        """Write ``summary.json``, ``table.csv`` and ``curve.csv`` under `directory`."""
        directory.mkdir(parents=True, exist_ok=True)
        (directory / SUMMARY_FILE).write_text(json.dumps(self.to_json(), indent=2, sort_keys=True), encoding="utf-8")
        write_condition_table(directory / TABLE_FILE, self.class_names, self.table_columns())
        write_curve(directory / CURVE_FILE, self.results)
        for name, rows in self.tables.items():
            with (directory / name).open("w", encoding="utf-8", newline="") as handle:
                csv.writer(handle, lineterminator="\n").writerows(rows)
        logger.info("wrote %s report to %s", self.kind, directory)


def _cell(column: AucReport | str, index: int | None) -> str:
    if isinstance(column, str):
        return f"{SKIPPED}: {column}" if column != SKIPPED else SKIPPED
    return column.macro_cell() if index is None else column.cell(index)


def write_condition_table(path: Path, class_names: tuple[str, ...], columns: Mapping[str, AucReport | str]) -> None:
    """Write class rows plus a macro row; a skipped column repeats its reason in every cell."""
    path.parent.mkdir(parents=True, exist_ok=True)
    names = list(columns)
    with path.open("w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["class", *names])
        for index, class_name in enumerate(class_names):
            writer.writerow([class_name, *(_cell(columns[n], index) for n in names)])
        writer.writerow(["macro", *(_cell(columns[n], None) for n in names)])


def write_curve(path: Path, results: Sequence[ConditionResult]) -> None:
    """Write one curve row per run condition, sorted by mode, count and seed."""
    rows = sorted((r for r in results if r.report is not None), key=lambda r: (r.method, r.x_count, r.seed))
    with path.open("w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(CURVE_COLUMNS)
        for r in rows:
            macro = r.macro
            writer.writerow(
                [
                    r.x_count,
                    r.method,
                    r.seed,
                    UNDEFINED if macro is None else repr(macro),
                    f"{r.x_share_train:.6f}",
                    f"{r.x_share_initial:.6f}",
                ]
            )


def read_summary(directory: Path) -> dict[str, Any]:
    """Read the ``summary.json`` of a report directory."""
    path = directory / SUMMARY_FILE
    if not path.is_file():
        raise DomainError(f"{directory} holds no experiment summary")
    data: dict[str, Any] = json.loads(path.read_text(encoding="utf-8"))
    return data


def iter_report_dirs(reports_root: Path) -> Iterator[Path]:
    """Yield report directories under `reports_root` in name order."""
    if not reports_root.is_dir():
        return
    for child in sorted(reports_root.iterdir()):
        if (child / SUMMARY_FILE).is_file():
            yield child
