# SPDX-License-Identifier: LGPL-3.0-or-later
# SPDX-FileNotice: Part of the cagan-active-learning project.

"""``cagan-al`` command line.

Exit codes: 0 on success, 1 for configuration, domain and usage errors, 2 for
anything unexpected (traceback logged at DEBUG).
"""

from __future__ import annotations

import argparse
from collections.abc import Callable, Sequence
from dataclasses import dataclass
import json
import logging
from pathlib import Path
from typing import cast

from ..active_learning.pipeline import run_al
from ..active_learning.run_store import OnExisting, RunStore
from ..cagan.losses import LossWeights
from ..cagan.plain_gan import save_plain_gan, train_plain_gan
from ..cagan.training import class_head_accuracy, load_cagan, save_cagan, train_cagan
from ..classifier.checkpoint import ClassifierCheckpoint, load_classifier, save_classifier
from ..classifier.evaluation import evaluate, read_auc_json, write_auc_json
from ..classifier.perceptual import ClassifierFeatureExtractor
from ..config import RunConfig, config_to_json, describe_config_keys, load_config
from ..data.manifest_io import corpus_hash, read_manifest, write_manifest
from ..data.sample_store import SampleStore, load_samples
from ..data.splitting import split_by_patient
from ..data.toy_corpus import generate_toy_corpus
from ..domain.auc_report import AucReport
from ..domain.manifest import Split
from ..errors import CaganAlError, CapabilityError, RunDirectoryError
from ..experiments.common import fit_fsl, fresh_classifier
from ..experiments.growth import synthetic_growth_curve
from ..experiments.mix import build_twin_corpus, real_syn_mix_matrix
from ..experiments.report import SUMMARY_FILE, ExperimentReport, iter_report_dirs, read_summary
from ..experiments.sweep import label_budget_sweep
from ..ports.console_port import ConsolePort, StreamConsole, configure_logging
from ..seeding import child_seed, seed_everything
from ..segmenter.training import load_segmenter, save_segmenter, train_segmenter
from ..version import get_version
from .argparser import CustomArgumentParser
from .selftest import run_selftest
from .workspace import Workspace, claim_directory

logger = logging.getLogger(__name__)

PROG = "cagan-al"
LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR")


@dataclass(frozen=True)
class CommandContext:
    """Everything a subcommand needs."""

    args: argparse.Namespace
    config: RunConfig
    workspace: Workspace
    console: ConsolePort

    @property
    def on_existing(self) -> OnExisting:
        return cast(OnExisting, self.args.on_existing)

    @property
    def config_json(self) -> str:
        return config_to_json(self.config)

    def claim(self, directory: Path) -> bool:
        return claim_directory(directory, self.config_json, self.on_existing)


Command = Callable[[CommandContext], int]


def _print_report(console: ConsolePort, report: AucReport) -> None:
    for index, name in enumerate(report.class_names):
        console.message(f"  {name:<16} {report.cell(index)}")
    console.message(f"  {'macro':<16} {report.macro_cell()}")


def gen_data(ctx: CommandContext) -> int:
    """Render the toy corpus, split it by patient and print its hash."""
    workspace, config = ctx.workspace, ctx.config
    resumed = ctx.claim(workspace.data_dir)
    path = workspace.manifest_path
    if resumed and path.is_file() and read_manifest(path).split_assignment:
        logger.info("corpus already present in %s", workspace.data_dir)
    else:
        manifest = generate_toy_corpus(config.data, seed=config.seed, out_dir=workspace.data_dir)
        split = split_by_patient(manifest, config.data.split_fractions, seed=child_seed(config.seed, "split"))
        write_manifest(split, path)
    ctx.console.message(f"corpus {path}")
    ctx.console.message(f"hash {corpus_hash(path)}")
    return 0


def train_seg(ctx: CommandContext) -> int:
    """Train the segmenter on the train split, reporting validation Dice."""
    workspace, config = ctx.workspace, ctx.config
    directory = workspace.segmenter_dir
    if ctx.claim(directory):
        try:
            checkpoint = load_segmenter(directory)
        except CapabilityError:
            checkpoint = None
        if checkpoint is not None:
            ctx.console.message(f"segmenter already trained in {directory}")
            return 0
    store = workspace.load_store()
    checkpoint = train_segmenter(
        store.split_samples(Split.TRAIN),
        config.segmenter,
        seed=child_seed(config.seed, "segmenter"),
        val_samples=store.split_samples(Split.VAL),
    )
    save_segmenter(checkpoint, directory)
    ctx.console.message(f"segmenter {directory}")
    ctx.console.message(f"validation dice {checkpoint.metrics.get('val_dice')}")
    return 0


def _perceptual_classifier(ctx: CommandContext, store: SampleStore) -> ClassifierCheckpoint:
    directory = ctx.workspace.perceptual_dir
    try:
        return load_classifier(directory)
    except CapabilityError:
        pass
    checkpoint = fit_fsl(
        store.split_samples(Split.TRAIN),
        ctx.config,
        num_classes=store.num_classes,
        seed=child_seed(ctx.config.seed, "perceptual"),
    )
    save_classifier(checkpoint, directory)
    logger.info("perceptual classifier saved to %s", directory)
    return checkpoint


def train_cagan_command(ctx: CommandContext) -> int:
    """Pretrain the class-aware GAN (and optionally the plain baseline) on the train split."""
    workspace, config = ctx.workspace, ctx.config
    store = workspace.load_store()
    segmenter = load_segmenter(workspace.segmenter_dir)
    train = store.split_samples(Split.TRAIN)
    weights = LossWeights.from_config(config.cagan)

    directory = workspace.cagan_dir
    resume = None
    if ctx.claim(directory):
        try:
            resume = load_cagan(directory)
        except CapabilityError:
            resume = None
    extractor = None
    if weights.w_perc > 0:
        extractor = ClassifierFeatureExtractor(
            _perceptual_classifier(ctx, store), block=config.classifier.perceptual_block
        )
    checkpoint = train_cagan(
        train,
        segmenter,
        config.cagan,
        weights,
        seed=child_seed(config.seed, "cagan"),
        label_mode=config.data.label_mode,
        perceptual=extractor,
        resume=resume,
        checkpoint_dir=directory,
    )
    save_cagan(checkpoint, directory)
    ctx.console.message(f"cagan {directory}")
    accuracy = class_head_accuracy(checkpoint, store.split_samples(Split.VAL))
    ctx.console.message(f"class-head accuracy on val {accuracy:.4f}")

    if ctx.args.plain_gan:
        plain_dir = workspace.plain_gan_dir
        if ctx.claim(plain_dir) and (plain_dir / "meta.json").is_file():
            ctx.console.message(f"plain GAN already trained in {plain_dir}")
        else:
            plain = train_plain_gan(train, config.cagan, weights, seed=child_seed(config.seed, "plain_gan"))
            save_plain_gan(plain, plain_dir)
            ctx.console.message(f"plain gan {plain_dir}")
    return 0


def run_al_command(ctx: CommandContext) -> int:
    """Run the active-learning loop into ``runs/<run_name>``."""
    workspace, config = ctx.workspace, ctx.config
    store = workspace.load_store()
    generators = workspace.load_generators()
    run_store = RunStore(
        workspace.run_dir(config.run_name), persist_synthetic_images=config.schedule.persist_synthetic_images
    )
    resumed = run_store.open(ctx.config_json, on_existing=ctx.on_existing)
    final, trail = run_al(
        store,
        generators.segmenter,
        generators.cagan,
        fresh_classifier(config, store.num_classes, config.seed),
        config,
        plain_gan=generators.plain_gan,
        run_store=run_store,
        resume=resumed,
    )
    final_dir = run_store.write_final(final)
    labels = trail.records[-1].labels_consumed if trail.records else len(trail.initial_ids)
    ctx.console.message(f"run {run_store.directory}")
    ctx.console.message(f"rounds {len(trail.records)}, labels {labels}, stop: {trail.stop_reason}")
    ctx.console.message(f"validation macro-AUC {trail.auc_history()[-1]:.4f}")
    ctx.console.message(f"final classifier {final_dir}")
    return 0


def eval_command(ctx: CommandContext) -> int:
    """Evaluate a stored classifier on one split; each checkpoint reads test once."""
    split = Split(ctx.args.split)
    directory: Path = ctx.args.checkpoint
    checkpoint = load_classifier(directory)
    result_path = directory / f"{split.value}_auc.json"
    if result_path.is_file():
        if ctx.on_existing == "refuse":
            raise RunDirectoryError(
                f"{directory} was already evaluated on {split.value}; pass --on-existing resume to show it"
            )
        report = read_auc_json(result_path)
    else:
        store = ctx.workspace.load_store()
        tag = str(directory.resolve())
        if split is Split.TEST:
            store.guard.enter_final()
        report = evaluate(checkpoint, store, split, model_tag=tag)
        write_auc_json(report, result_path)
    ctx.console.message(f"{split.value} AUC of {directory}")
    _print_report(ctx.console, report)
    return 0


def _experiment(name: str, build: Callable[[CommandContext], ExperimentReport]) -> Command:
    def command(ctx: CommandContext) -> int:
        directory = ctx.workspace.report_dir(name)
        if ctx.claim(directory) and (directory / SUMMARY_FILE).is_file():
            ctx.console.message(f"{name} already reported in {directory}")
            return 0
        report = build(ctx)
        report.write(directory)
        ctx.console.message(f"{name} {directory}")
        ctx.console.message(json.dumps(report.summary, indent=2, sort_keys=True))
        return 0

    command.__doc__ = f"Run the {name} experiment."
    return command


def _sweep(ctx: CommandContext) -> ExperimentReport:
    workspace = ctx.workspace
    return label_budget_sweep(workspace.load_store(), ctx.config, workspace.load_generators())


def _mix_matrix(ctx: CommandContext) -> ExperimentReport:
    workspace, config = ctx.workspace, ctx.config
    manifest = workspace.load_manifest()
    generators = workspace.load_generators()
    real = load_samples(manifest)
    twins = build_twin_corpus(real, generators.cagan, generators.segmenter, config, seed=config.seed)
    return real_syn_mix_matrix(real, twins, manifest.split_assignment, manifest.class_names, config)


def _growth(ctx: CommandContext) -> ExperimentReport:
    workspace = ctx.workspace
    return synthetic_growth_curve(workspace.load_store(), ctx.config, workspace.load_generators())


def report_command(ctx: CommandContext) -> int:
    """Print the summary of every emitted experiment."""
    found = False
    for directory in iter_report_dirs(ctx.workspace.reports_dir):
        found = True
        summary = read_summary(directory)
        ctx.console.message(f"{directory.name}: {summary['kind']} (config {summary['config_hash'][:12]})")
        for condition in summary["conditions"]:
            median = condition["median"]
            if condition["skip_reason"]:
                cell = f"skipped: {condition['skip_reason']}"
            elif median is None:
                cell = "undef"
            else:
                cell = f"{median:.4f} [{condition['q1']:.4f}, {condition['q3']:.4f}]"
            ctx.console.message(f"  {condition['method']}@{condition['x']:g}  {cell}  ({condition['seeds']} seeds)")
        ctx.console.message(json.dumps(summary["summary"], indent=2, sort_keys=True))
    if not found:
        ctx.console.warn(f"no reports under {ctx.workspace.reports_dir}")
    return 0


def selftest_command(ctx: CommandContext) -> int:
    """Run the closed-form check suite."""
    failed = 0
    for result in run_selftest():
        ctx.console.message(result.line())
        failed += not result.passed
    ctx.console.message("selftest passed" if not failed else f"selftest: {failed} check(s) failed")
    return 0 if not failed else 1


COMMANDS: dict[str, tuple[Command, str]] = {
    "gen-data": (gen_data, "render the toy corpus and split it by patient"),
    "train-seg": (train_seg, "train the lung segmenter"),
    "train-cagan": (train_cagan_command, "pretrain the class-aware GAN"),
    "run-al": (run_al_command, "run active learning into runs/<run_name>"),
    "eval": (eval_command, "evaluate a stored classifier on a split"),
    "sweep": (_experiment("sweep", _sweep), "label-budget sweep: AL strategies against random FSL"),
    "mix-matrix": (_experiment("mix-matrix", _mix_matrix), "Real/Syn/Mix train-test matrix"),
    "growth-curve": (_experiment("growth-curve", _growth), "synthetic-only augmentation curve"),
    "report": (report_command, "print the summaries of all emitted experiments"),
    "selftest": (selftest_command, "run the closed-form check suite"),
}


def _common_options() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, metavar="FILE", help="flat section.key = value configuration file")
    common.add_argument(
        "--set",
        dest="overrides",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="override one configuration key (repeatable)",
    )
    common.add_argument("--seed", type=int, help="override the configuration seed")
    common.add_argument("--log-level", default="WARNING", type=str.upper, choices=LOG_LEVELS, help="logging level")
    common.add_argument(
        "--on-existing",
        default="refuse",
        choices=("refuse", "resume"),
        help="what to do when the output directory already holds results",
    )
    return common


def build_parser() -> CustomArgumentParser:
    """Return the parser of every subcommand."""
    epilog = "\n".join(["configuration keys (--set section.key=value):", *describe_config_keys()])
    parser = CustomArgumentParser(
        prog=PROG,
        description="Class-aware GAN augmentation for active learning on imbalanced image classification.",
        epilog=epilog,
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {get_version()}")
    common = _common_options()
    subparsers = parser.add_subparsers(dest="command", metavar="COMMAND", required=True)
    for name, (_, summary) in COMMANDS.items():
        sub = subparsers.add_parser(name, parents=[common], help=summary, description=summary, epilog=epilog)
        if name == "train-cagan":
            sub.add_argument("--plain-gan", action="store_true", help="also train the plain GAN baseline")
        elif name == "eval":
            sub.add_argument("checkpoint", type=Path, help="classifier checkpoint directory")
            sub.add_argument("--split", default=Split.VAL.value, choices=[s.value for s in Split], help="split")
    return parser


def main(argv: Sequence[str] | None = None, console: ConsolePort | None = None) -> int:
    """Run one subcommand and return its exit code."""
    console = console or StreamConsole()
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 1
    configure_logging(args.log_level)
    overrides = list(args.overrides)
    if args.seed is not None:
        overrides.append(f"seed={args.seed}")
    try:
        config = load_config(args.config, overrides)
        seed_everything(config.seed)
        context = CommandContext(args, config, Workspace(config.resolve_output_root()), console)
        command, _ = COMMANDS[args.command]
        return command(context)
    except CaganAlError as exc:
        console.error(str(exc))
        return 1
    except Exception as exc:  # pylint: disable=broad-exception-caught
        logger.debug("unexpected failure in %s", args.command, exc_info=True)
        console.error(f"internal error: {type(exc).__name__}: {exc}")
        return 2
