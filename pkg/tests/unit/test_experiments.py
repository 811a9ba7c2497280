"""Unit tests for experiment reports, the twin-corpus helpers and the budget sweep."""

from __future__ import annotations

from collections import Counter
import json
from pathlib import Path

import pytest

from cagan_al.config import RunConfig
from cagan_al.data.sample_store import SampleStore
from cagan_al.data.toy_corpus import build_toy_samples
from cagan_al.domain.auc_report import AucReport
from cagan_al.domain.image_sample import ImageSample, Provenance
from cagan_al.domain.manifest import Split
from cagan_al.errors import CapabilityError, ConfigurationError, DomainError, LeakageError
from cagan_al.experiments.common import Generators
from cagan_al.experiments.growth import initial_real_pool, synthetic_growth_curve, trend_spearman
from cagan_al.experiments.mix import check_lineage, mix_samples, twin_assignment
from cagan_al.experiments.report import (
    CURVE_FILE,
    TABLE_FILE,
    ConditionResult,
    ExperimentReport,
    iter_report_dirs,
    median_iqr,
    median_report,
    read_summary,
)
from cagan_al.experiments.sweep import FSL_METHOD, label_budget_sweep, sweep_condition


def _report(*per_class: float | None) -> AucReport:
    width = len(per_class)
    return AucReport(("x", "y")[:width], per_class, (2,) * width, (2,) * width, split="test")


def _experiment() -> ExperimentReport:
    results = [
        ConditionResult("a", 0.5, 1, report=_report(0.75, None), x_count=10, x_share_train=0.5, x_share_initial=1.0),
        ConditionResult("a", 0.5, 0, report=_report(0.5, 1.0), x_count=10, x_share_train=0.5, x_share_initial=1.0),
        ConditionResult("b", 0.5, 0, skip_reason="budget too small"),
    ]
    return ExperimentReport(kind="demo", class_names=("x", "y"), results=results, config_hash="abc", version="1")


def _toy_store(config: RunConfig) -> SampleStore:
    names, samples = build_toy_samples(config.data, seed=0)
    patients = sorted({s.patient_id for s in samples})
    fold = {p: Split.TRAIN if i < 14 else Split.VAL if i < 18 else Split.TEST for i, p in enumerate(patients)}
    return SampleStore(samples, {s.id: fold[s.patient_id] for s in samples}, tuple(names))


def test_condition_needs_report_or_reason() -> None:
    """A condition either ran or was skipped, never both."""
    with pytest.raises(DomainError):
        ConditionResult("a", 0.5, 0)
    with pytest.raises(DomainError):
        ConditionResult("a", 0.5, 0, report=_report(0.5), skip_reason="why")
    assert ConditionResult("a", 0.25, 0, skip_reason="why").condition == "a@0.25"


def test_median_iqr_ignores_undefined_values() -> None:
    """Undefined seeds drop out of the median and quartiles."""
    assert median_iqr([1.0, 2.0, 3.0, None]) == pytest.approx((2.0, 1.5, 2.5))
    assert median_iqr([None, float("nan")]) == (None, None, None)


def test_median_report_is_taken_per_class() -> None:
    """Each class takes the median of its defined values."""
    merged = median_report([_report(0.5, 1.0), _report(0.75, None)], model_tag="m")
    assert merged.per_class == (0.625, 1.0)
    assert merged.model_tag == "m"
    with pytest.raises(DomainError):
        median_report([])


def test_report_sorts_and_aggregates_over_seeds() -> None:
    """Results are ordered by method, axis and seed; fully skipped conditions keep their reason."""
    report = _experiment()
    assert [(r.method, r.seed) for r in report.results] == [("a", 0), ("a", 1), ("b", 0)]
    assert report.seeds == (0, 1)
    assert report.methods == ("a", "b")
    assert report.median_macro("a", 0.5) == pytest.approx(0.75)
    assert report.median_macro("b", 0.5) is None
    (skipped,) = [a for a in report.aggregate() if a.method == "b"]
    assert skipped.skip_reason == "budget too small"


def test_empty_report_is_refused() -> None:
    """An experiment without conditions has nothing to report."""
    with pytest.raises(DomainError):
        ExperimentReport(kind="demo", class_names=("x",), results=[], config_hash="", version="")


def test_report_files(tmp_path: Path) -> None:
    """Summary, condition table and curve are written and can be found again."""
    report = _experiment()
    report.summary = {"note": 1}
    report.tables = {"extra.csv": [["k", "v"], ["a", "1"]]}
    report.write(tmp_path / "reports" / "demo")

    directory = tmp_path / "reports" / "demo"
    assert (directory / TABLE_FILE).read_text(encoding="utf-8").splitlines() == [
        "class,a@0.5,b@0.5",
        "x,0.625,skipped: budget too small",
        "y,1.0,skipped: budget too small",
        "macro,0.8125,skipped: budget too small",
    ]
    curve = (directory / CURVE_FILE).read_text(encoding="utf-8").splitlines()
    assert curve[1:] == ["10,a,0,0.75,0.500000,1.000000", "10,a,1,0.75,0.500000,1.000000"]
    assert (directory / "extra.csv").read_text(encoding="utf-8") == "k,v\na,1\n"

    summary = read_summary(directory)
    assert summary["kind"] == "demo"
    assert summary["config_hash"] == "abc"
    assert summary["summary"] == {"note": 1}
    assert list(iter_report_dirs(tmp_path / "reports")) == [directory]
    assert list(iter_report_dirs(tmp_path / "missing")) == []
    with pytest.raises(DomainError):
        read_summary(tmp_path)


def _twins(sample_factory) -> tuple[list[ImageSample], list[ImageSample], dict[str, Split]]:
    real = [sample_factory(f"r{i}", (1, 0), patient_id=f"p{i}") for i in range(4)]
    twins = [
        sample_factory(f"r{i}~t", (1, 0), patient_id=f"p{i}", provenance=Provenance.SYNTHETIC, base_id=f"r{i}")
        for i in range(3)
    ]
    assignment = {"r0": Split.TRAIN, "r1": Split.TRAIN, "r2": Split.VAL, "r3": Split.TEST}
    return real, twins, assignment


def test_twins_follow_their_base_fold(sample_factory) -> None:
    """Derived twin folds pass the lineage check."""
    real, twins, assignment = _twins(sample_factory)
    derived = twin_assignment(twins, assignment)
    assert derived == {"r0~t": Split.TRAIN, "r1~t": Split.TRAIN, "r2~t": Split.VAL}
    check_lineage(real, twins, assignment, derived)


def test_lineage_check_catches_leaks(sample_factory) -> None:
    """A twin in another fold, with another patient or without a base is a leak."""
    real, twins, assignment = _twins(sample_factory)
    with pytest.raises(LeakageError):
        check_lineage(real, twins, assignment, {"r0~t": Split.TEST})
    stranger = sample_factory("q~t", (1, 0), patient_id="p9", provenance=Provenance.SYNTHETIC, base_id="r0")
    with pytest.raises(LeakageError):
        check_lineage(real, [stranger], assignment, {})
    orphan = sample_factory("z~t", (1, 0), patient_id="p0", provenance=Provenance.SYNTHETIC, base_id="zz")
    with pytest.raises(LeakageError):
        check_lineage(real, [orphan], assignment, {})


def test_mix_swaps_reals_for_twins(sample_factory) -> None:
    """Fraction 1 replaces every real that has a twin; fraction 0 replaces none."""
    real, twins, _ = _twins(sample_factory)
    assert [s.id for s in mix_samples(real, twins, 1.0, seed=0)] == ["r0~t", "r1~t", "r2~t", "r3"]
    assert [s.id for s in mix_samples(real, twins, 0.0, seed=0)] == ["r0", "r1", "r2", "r3"]
    half = [s.id for s in mix_samples(real, twins, 0.5, seed=4)]
    assert half == [s.id for s in mix_samples(real, twins, 0.5, seed=4)]


def test_trend_spearman() -> None:
    """Monotone curves give rho 1; short, undefined or flat curves give None."""
    assert trend_spearman([0.5, 0.6, 0.7, 0.8, 0.9]) == pytest.approx(1.0)
    assert trend_spearman([0.9, 0.8, 0.7, 0.6]) == pytest.approx(-1.0)
    assert trend_spearman([0.5, 0.6, 0.7]) is None
    assert trend_spearman([0.5, None, 0.7, 0.8]) is None
    assert trend_spearman([0.5, 0.5, 0.5, 0.5]) is None


def test_initial_real_pool_takes_per_class_quotas(tiny_config: RunConfig) -> None:
    """The growth pool holds per_class train images of each primary class, seeded."""
    store = _toy_store(tiny_config)
    pool = initial_real_pool(store, 2, seed=0)
    assert pool == initial_real_pool(store, 2, seed=0)
    train = set(store.split_ids(Split.TRAIN))
    assert set(pool) <= train
    primaries = Counter(s.primary_class for s in store.get(pool))
    assert primaries[0] == primaries[1] == 2
    assert primaries[2] <= 2


def test_growth_curve_needs_generators(tiny_config: RunConfig) -> None:
    """Without a CAGAN the growth curve refuses to start."""
    with pytest.raises(CapabilityError):
        synthetic_growth_curve(_toy_store(tiny_config), tiny_config, Generators())


def test_sweep_skips_budgets_below_the_initial_pool(tiny_config: RunConfig) -> None:
    """An AL method cannot run with fewer labels than its initial pool."""
    result = sweep_condition(
        _toy_store(tiny_config), tiny_config, Generators(), method="standard_da", budget=0.1, seed=0
    )
    assert result.report is None
    assert "initial_pool_fraction" in result.skip_reason


def test_sweep_validates_methods_and_checkpoints(tiny_config: RunConfig) -> None:
    """Unknown methods and missing generator checkpoints fail before any training."""
    store = _toy_store(tiny_config)
    with pytest.raises(ConfigurationError):
        label_budget_sweep(store, tiny_config, Generators(), methods=["nope"])
    with pytest.raises(ConfigurationError):
        label_budget_sweep(store, tiny_config, Generators(), methods=[FSL_METHOD], budgets=[1.5])
    with pytest.raises(CapabilityError):
        label_budget_sweep(store, tiny_config, Generators(), methods=["cagan"])


def test_fsl_sweep_reads_test_once_per_model(tiny_config: RunConfig, tmp_path: Path) -> None:
    """Each (budget, seed) model reads the test split once and the headline uses full-data FSL."""
    store = _toy_store(tiny_config)
    report = label_budget_sweep(store, tiny_config, Generators(), methods=[FSL_METHOD])
    assert [(r.method, r.x) for r in report.results] == [(FSL_METHOD, 0.5), (FSL_METHOD, 1.0)]
    assert store.guard.test_reads("sweep/fsl_random@0.5/seed0") == 1
    assert store.guard.test_reads("sweep/fsl_random@1/seed0") == 1
    full = report.results[1]
    assert full.x_count == len(store.split_ids(Split.TRAIN))
    headline = report.summary["headline"]
    assert headline["fsl_full_median"] == report.median_macro(FSL_METHOD, 1.0)
    report.write(tmp_path)
    assert json.loads((tmp_path / "summary.json").read_text(encoding="utf-8"))["kind"] == "label_budget_sweep"
