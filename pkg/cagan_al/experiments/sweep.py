# SPDX-License-Identifier: LGPL-3.0-or-later
# SPDX-FileNotice: Part of the cagan-active-learning project.

"""Label-budget sweep: active learning against randomly sampled full supervision.

Every (method, budget, seed) condition trains one model and reads the test
split exactly once. AL methods run the loop under ``schedule.label_budget``;
``fsl_random`` trains on a random budget share of the train split.
"""

from __future__ import annotations

from collections.abc import Sequence
import logging
from typing import Any, cast, get_args

from ..active_learning.controller import initial_pool_ids
from ..active_learning.pipeline import run_al
from ..active_learning.strategies import build_strategy
from ..config import RunConfig, StrategyName
from ..data.sample_store import SampleStore
from ..domain.manifest import Split
from ..errors import ConfigurationError
from .common import (
    Generators,
    final_test_report,
    fit_fsl,
    fresh_classifier,
    provenance,
    resolve_seeds,
    run_jobs,
    sorted_train_samples,
)
from .report import ConditionResult, ExperimentReport

logger = logging.getLogger(__name__)

FSL_METHOD = "fsl_random"
FULL_BUDGET = 1.0

# Full-scale macro-AUCs reported for AL at 35 % labels and FSL at 100 %; context only.
REFERENCE_AL_MACRO_AUC = 0.7859
REFERENCE_FSL_MACRO_AUC = 0.7345


def _check_methods(methods: Sequence[str]) -> list[StrategyName]:
    known = set(get_args(StrategyName))
    unknown = [m for m in methods if m != FSL_METHOD and m not in known]
    if unknown:
        raise ConfigurationError("experiment.methods", f"unknown methods {unknown}")
    return [cast(StrategyName, m) for m in methods if m in known]


def _check_budgets(budgets: Sequence[float]) -> list[float]:
    if not budgets or any(not 0.0 < b <= 1.0 for b in budgets):
        raise ConfigurationError("experiment.budgets", "budgets must be a non-empty list within (0, 1]")
    return sorted(set(budgets))


def sweep_condition(
    store: SampleStore,
    config: RunConfig,
    generators: Generators,
    *,
    method: str,
    budget: float,
    seed: int,
) -> ConditionResult:
    """Train and test one condition of the sweep."""
    train_ids = store.split_ids(Split.TRAIN)
    schedule = config.schedule
    initial = max(1, round(schedule.initial_pool_fraction * len(train_ids)))
    tag = f"sweep/{method}@{budget:g}/seed{seed}"
    if method == FSL_METHOD:
        ids = initial_pool_ids(train_ids, budget, seed)
        model = fit_fsl(sorted_train_samples(store, ids), config, num_classes=store.num_classes, seed=seed)
        consumed = len(ids)
    else:
        if budget < schedule.initial_pool_fraction:
            reason = f"budget {budget:g} below initial_pool_fraction {schedule.initial_pool_fraction:g}"
            logger.info("skipping %s: %s", tag, reason)
            return ConditionResult(method=method, x=budget, seed=seed, skip_reason=reason)
        run_config = config.model_copy(
            update={"schedule": schedule.model_copy(update={"label_budget": budget, "strategy": method})}
        )
        model, trail = run_al(
            store,
            generators.segmenter,
            generators.cagan,
            fresh_classifier(config, store.num_classes, seed),
            run_config,
            seed=seed,
            plain_gan=generators.plain_gan,
        )
        consumed = trail.records[-1].labels_consumed if trail.records else len(trail.initial_ids)
    report = final_test_report(model, store, tag)
    logger.info("%s: %d labels, test macro-AUC %s", tag, consumed, report.macro)
    return ConditionResult(
        method=method,
        x=budget,
        seed=seed,
        report=report,
        x_count=consumed,
        x_share_train=consumed / len(train_ids),
        x_share_initial=consumed / initial,
    )


def _headline(report: ExperimentReport, al_methods: Sequence[str], headline_budget: float) -> dict[str, Any]:
    fsl_full = report.median_macro(FSL_METHOD, FULL_BUDGET)
    rows = {}
    for method in al_methods:
        al = report.median_macro(method, headline_budget)
        rows[method] = {
            "al_median": al,
            "gap_to_fsl_full": None if al is None or fsl_full is None else al - fsl_full,
        }
    return {
        "al_budget": headline_budget,
        "fsl_budget": FULL_BUDGET,
        "fsl_full_median": fsl_full,
        "methods": rows,
        "reference_al_macro_auc": REFERENCE_AL_MACRO_AUC,
        "reference_fsl_macro_auc": REFERENCE_FSL_MACRO_AUC,
    }


def label_budget_sweep(
    store: SampleStore,
    config: RunConfig,
    generators: Generators,
    *,
    budgets: Sequence[float] | None = None,
    methods: Sequence[str] | None = None,
    seeds: Sequence[int] | None = None,
) -> ExperimentReport:
    """Run every (method, budget, seed) condition and report test macro-AUC.

    The summary holds the headline comparison: each AL method at
    ``experiment.headline_budget`` against ``fsl_random`` at the full budget.

    Raises:
        ConfigurationError: For unknown methods, budgets outside (0, 1] or no seeds.
        CapabilityError: If an AL method needs a checkpoint that was not supplied.
    """
    experiment = config.experiment
    chosen_methods = list(experiment.methods if methods is None else methods)
    al_methods = _check_methods(chosen_methods)
    chosen_budgets = _check_budgets(experiment.budgets if budgets is None else budgets)
    chosen_seeds = resolve_seeds(config, seeds)
    store.check_patient_disjoint()
    for method in al_methods:
        build_strategy(
            method,
            config,
            num_classes=store.num_classes,
            segmenter=generators.segmenter,
            cagan=generators.cagan,
            plain_gan=generators.plain_gan,
        )

    jobs = [
        {"store": store, "config": config, "generators": generators, "method": m, "budget": b, "seed": s}
        for m in chosen_methods
        for b in chosen_budgets
        for s in chosen_seeds
    ]
    results = run_jobs(sweep_condition, jobs, experiment.n_jobs)
    report = ExperimentReport(
        kind="label_budget_sweep", class_names=store.class_names, results=results, **provenance(config)
    )
    skipped = sorted({f"{r.condition}: {r.skip_reason}" for r in results if r.skip_reason})
    report.summary = {"headline": _headline(report, al_methods, experiment.headline_budget), "skipped": skipped}
    return report
