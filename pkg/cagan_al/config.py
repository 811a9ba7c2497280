# SPDX-License-Identifier: LGPL-3.0-or-later
# SPDX-FileNotice: Part of the cagan-active-learning project.

"""Run configuration.

`RunConfig` groups one validated, frozen section per pipeline stage. Config
files are flat ``section.key = value`` lines; because dotted keys are valid
TOML they are parsed with `tomllib`. Command-line overrides use the same
``section.key=value`` form.

Every field carries a description that `describe_config_keys` surfaces in
``--help`` next to its default.
"""

from __future__ import annotations

from collections.abc import Iterator, Mapping, Sequence
import hashlib
import json
import os
from pathlib import Path
import tomllib
from typing import Any, Literal, TypeVar

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .errors import ConfigurationError


LabelMode = Literal["multilabel", "exclusive"]
StrategyName = Literal["cagan", "standard_da", "plain_gan", "no_bnn_entropy", "random_select"]

M = TypeVar("M", bound=BaseModel)

HOME_ENV_VAR = "CAGAN_AL_HOME"
DEFAULT_HOME = "cagan_al_home"


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class DataConfig(_Section):
    """Toy corpus generation and patient-level split settings."""

    num_classes: int = Field(6, description="Number of finding classes C.")
    num_patients: int = Field(480, description="Number of synthetic patients.")
    images_per_patient: int = Field(6, description="Images rendered per patient.")
    imbalance_ratios: list[float] = Field(
        default_factory=lambda: [10.0, 6.0, 4.0, 3.0, 2.0, 1.0],
        description="Relative class frequencies (one per class).",
    )
    side: int = Field(64, description="Square image side S in pixels (multiple of 16).")
    label_mode: LabelMode = Field("multilabel", description="multilabel (independent bits) or exclusive.")
    allow_normal: bool = Field(False, description="Allow all-zero 'no finding' label vectors.")
    normal_fraction: float = Field(0.0, description="Share of no-finding images when allow_normal is on.")
    co_label_probability: float = Field(
        0.0, description="Probability of each extra co-occurring class in multilabel mode."
    )
    split_fractions: tuple[float, float, float] = Field(
        (0.70, 0.10, 0.20),
        description="train/val/test fractions.",
    )
    n_jobs: int = Field(1, description="Parallel workers for corpus shards.")

    @model_validator(mode="after")
    def _check(self) -> DataConfig:
        if self.num_classes < 2 and not self.allow_normal:
            raise ValueError("num_classes must be >= 2 unless allow_normal is on")
        if self.num_classes < 1:
            raise ValueError("num_classes must be >= 1")
        if len(self.imbalance_ratios) != self.num_classes:
            raise ValueError("imbalance_ratios needs one entry per class")
        if any(r <= 0 for r in self.imbalance_ratios):
            raise ValueError("imbalance_ratios must be strictly positive")
        if self.side < 32 or self.side % 16:
            raise ValueError("side must be >= 32 and a multiple of 16")
        if self.num_patients < 1 or self.images_per_patient < 1:
            raise ValueError("num_patients and images_per_patient must be >= 1")
        if not 0.0 <= self.normal_fraction < 1.0 or not 0.0 <= self.co_label_probability <= 1.0:
            raise ValueError("normal_fraction and co_label_probability must be probabilities")
        if abs(sum(self.split_fractions) - 1.0) > 1e-9:
            raise ValueError("split_fractions must sum to 1")
        return self


class SegmenterConfig(_Section):
    """Lung segmenter and mask perturbation settings."""

    latent_dim: int = Field(256, description="Bottleneck width Z.")
    filters: int = Field(64, description="Filters per convolution.")
    lr: float = Field(1e-3, description="Adam learning rate.")
    epochs: int = Field(20, description="Training epochs.")
    batch: int = Field(32, description="Mini-batch size.")
    threshold: float = Field(0.5, description="Mask probability threshold.")
    control_points: int = Field(12, description="B-spline control points per contour.")
    perturb_magnitude: float = Field(0.1, description="Radial displacement as a share of local radius.")
    max_perturbations: int = Field(200, description="Cap on perturbed masks.")
    dice_gate: float = Field(0.90, description="Validation Dice below which a warning is logged.")

    @model_validator(mode="after")
    def _check(self) -> SegmenterConfig:
        if self.latent_dim < 1 or self.filters < 1 or self.batch < 1 or self.epochs < 0:
            raise ValueError("latent_dim, filters, batch must be positive and epochs non-negative")
        if not 0.0 <= self.perturb_magnitude <= 1.0:
            raise ValueError("perturb_magnitude must be in [0, 1]")
        if self.control_points < 4:
            raise ValueError("control_points must be >= 4")
        return self


class CaganConfig(_Section):
    """Class-aware GAN architecture, optimiser and loss weights."""

    lr: float = Field(1e-3, description="Adam learning rate.")
    beta1: float = Field(0.93, description="Adam beta1.")
    beta2: float = Field(0.999, description="Adam beta2.")
    iters: int = Field(100_000, description="Generator update cap.")
    batch: int = Field(16, description="Mini-batch size.")
    n_critic: int = Field(5, description="Critic steps per generator step.")
    checkpoint_every: int = Field(500, description="Iterations between persisted checkpoints.")
    lambda_cls: float = Field(1.0, description="Classification loss weight.")
    lambda_content: float = Field(10.0, description="Content loss weight.")
    lambda_gp: float = Field(10.0, description="Gradient penalty weight.")
    w_perc: float = Field(1.0, description="Perceptual sub-weight of the content loss.")
    w_mse: float = Field(1.0, description="MSE sub-weight of the content loss.")
    w_nmi: float = Field(1.0, description="Inverse-NMI sub-weight of the content loss.")
    nmi_eps: float = Field(1e-4, description="NMI guard epsilon.")
    nmi_bins: int = Field(64, description="Intensity bins for NMI histograms.")
    gen_base_channels: int = Field(64, description="Generator width after the first downsampling.")
    residual_blocks: int = Field(3, description="Generator residual blocks.")
    disc_base_channels: int = Field(64, description="First critic width.")
    disc_norm: Literal["instance", "batch", "none"] = Field("instance", description="Critic normalisation.")
    plain_noise_dim: int = Field(16, description="Noise code width of the plain GAN baseline.")
    plain_iters: int = Field(2000, description="Generator updates for the plain GAN baseline.")

    @model_validator(mode="after")
    def _check(self) -> CaganConfig:
        weights = (self.lambda_cls, self.lambda_content, self.lambda_gp, self.w_perc, self.w_mse, self.w_nmi)
        if any(w < 0 for w in weights):
            raise ValueError("loss weights must be non-negative")
        if self.nmi_eps <= 0:
            raise ValueError("nmi_eps must be > 0")
        if self.n_critic < 1 or self.batch < 1 or self.iters < 0 or self.nmi_bins < 2:
            raise ValueError("n_critic, batch >= 1, iters >= 0 and nmi_bins >= 2 required")
        return self


class UncertaintyConfig(_Section):
    """Monte-Carlo informativeness scoring."""

    mc_samples: int = Field(20, description="Stochastic forward passes T.")
    masking_rate: float = Field(0.2, description="Stochastic masking rate at inference.")
    reduction: Literal["mean", "max"] = Field("mean", description="Per-class variance reduction.")
    epistemic_only: bool = Field(False, description="Allow scoring without a variance head.")
    aleatoric_space: Literal["probability", "logit"] = Field(
        "probability", description="Space the predicted variance is expressed in before combining."
    )

    @model_validator(mode="after")
    def _check(self) -> UncertaintyConfig:
        if self.mc_samples < 2:
            raise ValueError("mc_samples must be >= 2")
        if not 0.0 <= self.masking_rate < 1.0:
            raise ValueError("masking_rate must be in [0, 1)")
        return self


class ClassifierConfig(_Section):
    """Task classifier backbone and fine-tuning."""

    backbone: Literal["toy_cnn", "pluggable"] = Field("toy_cnn", description="Backbone family.")
    backbone_factory: str | None = Field(None, description="module:callable for the pluggable backbone.")
    widths: tuple[int, int, int, int] = Field((16, 32, 64, 64), description="Channels of the 4 conv blocks.")
    lr: float = Field(1e-3, description="Adam learning rate.")
    epochs: int = Field(5, description="Fine-tuning epochs per round.")
    initial_epochs: int = Field(15, description="Epochs for the initial pool / FSL training.")
    batch: int = Field(32, description="Mini-batch size.")
    weighted_loss: bool = Field(False, description="Inverse-frequency class weights.")
    freeze_after_round0: Literal["none", "head", "last_block"] = Field(
        "last_block", description="Trainable depth once the initial round is done."
    )
    heteroscedastic_samples: int = Field(10, description="Logit-noise draws of the variance-head likelihood.")
    perceptual_block: int = Field(2, description="Conv block whose output feeds the perceptual term.")

    @model_validator(mode="after")
    def _check(self) -> ClassifierConfig:
        if self.backbone == "pluggable" and not self.backbone_factory:
            raise ValueError("backbone_factory is required for the pluggable backbone")
        if self.epochs < 0 or self.initial_epochs < 0 or self.batch < 1:
            raise ValueError("epochs must be non-negative and batch positive")
        if not 1 <= self.perceptual_block <= 4:
            raise ValueError("perceptual_block must be in 1..4")
        return self


class ScheduleConfig(_Section):
    """Active-learning loop schedule (AlScheduleConfig)."""

    strategy: StrategyName = Field("cagan", description="Augmentation/selection strategy.")
    initial_pool_fraction: float = Field(0.03, description="Initial labeled share.")
    top_k_real: int = Field(32, description="Real samples picked per round.")
    gen_per_class: int = Field(250, description="Candidates per class.")
    keep_per_class: int = Field(150, description="Synthetic kept per class.")
    stop_window: int = Field(3, description="Consecutive rounds W.")
    stop_epsilon: float = Field(0.1, description="AUC change tolerance.")
    epsilon_units: Literal["auc_points", "absolute"] = Field(
        "auc_points", description="auc_points reads stop_epsilon as percentage points (0.1 -> 0.001)."
    )
    gain_threshold: float | None = Field(None, description="Admission rule: minimum validation gain.")
    max_rounds: int = Field(30, description="Hard cap on rounds.")
    synthetic_mode: Literal["accumulate", "replace"] = Field("accumulate", description="Synthetic pool policy.")
    synthetic_cap: int = Field(20_000, description="Ceiling of the accumulated synthetic pool.")
    label_budget: float | None = Field(None, description="Optional cap on consumed labels (train share).")
    persist_synthetic_images: bool = Field(True, description="Write kept synthetic images as PNG.")

    @model_validator(mode="after")
    def _check(self) -> ScheduleConfig:
        if self.keep_per_class > self.gen_per_class:
            raise ValueError("keep_per_class must not exceed gen_per_class")
        if not 0.0 < self.initial_pool_fraction <= 1.0:
            raise ValueError("initial_pool_fraction must be in (0, 1]")
        if self.label_budget is not None and not 0.0 < self.label_budget <= 1.0:
            raise ValueError("label_budget must be in (0, 1]")
        if self.stop_window < 1 or self.top_k_real < 1 or self.max_rounds < 0:
            raise ValueError("stop_window and top_k_real must be >= 1, max_rounds >= 0")
        return self

    @property
    def epsilon_absolute(self) -> float:
        """Return the stopping tolerance in absolute AUC units."""
        if self.epsilon_units == "auc_points":
            return self.stop_epsilon / 100.0
        return self.stop_epsilon


class ExperimentConfig(_Section):
    """Experiment harness settings."""

    seeds: list[int] = Field(default_factory=lambda: [0, 1, 2, 3, 4], description="Seeds per condition.")
    budgets: list[float] = Field(
        default_factory=lambda: [0.05, 0.10, 0.15, 0.25, 0.30, 0.35, 0.50, 0.75, 1.0],
        description="Label budgets of the sweep.",
    )
    methods: list[str] = Field(
        default_factory=lambda: ["cagan", "plain_gan", "standard_da", "no_bnn_entropy", "fsl_random"],
        description="Sweep methods (AL strategies plus fsl_random).",
    )
    headline_budget: float = Field(0.35, description="AL budget compared to full-data FSL.")
    growth_initial_per_class: int = Field(10, description="Real images per class in the growth curve.")
    growth_step_per_class: int = Field(5, description="Synthetic images added per class per step.")
    growth_steps: int = Field(10, description="Steps of the growth curve.")
    mix_fraction: float = Field(0.5, description="Synthetic share of a Mix fold.")
    n_jobs: int = Field(1, description="Parallel condition jobs.")

    @model_validator(mode="after")
    def _check(self) -> ExperimentConfig:
        if not self.seeds:
            raise ValueError("at least one seed is required")
        if any(not 0.0 < b <= 1.0 for b in self.budgets):
            raise ValueError("budgets must lie in (0, 1]")
        if self.growth_step_per_class < 1:
            raise ValueError("growth_step_per_class must be >= 1")
        return self


class RunConfig(_Section):
    """Fully resolved configuration of one CLI invocation."""

    seed: int = Field(0, description="Single seed all randomness flows from.")
    output_root: str | None = Field(None, description=f"Output root (default ${HOME_ENV_VAR} or ./{DEFAULT_HOME}).")
    run_name: str = Field("default", description="Name of the run directory under runs/.")
    data: DataConfig = Field(default_factory=DataConfig)
    segmenter: SegmenterConfig = Field(default_factory=SegmenterConfig)
    cagan: CaganConfig = Field(default_factory=CaganConfig)
    uncertainty: UncertaintyConfig = Field(default_factory=UncertaintyConfig)
    classifier: ClassifierConfig = Field(default_factory=ClassifierConfig)
    schedule: ScheduleConfig = Field(default_factory=ScheduleConfig)
    experiment: ExperimentConfig = Field(default_factory=ExperimentConfig)

    def resolve_output_root(self) -> Path:
        """Return the output root, honouring `CAGAN_AL_HOME`."""
        if self.output_root:
            return Path(self.output_root)
        return Path(os.environ.get(HOME_ENV_VAR, DEFAULT_HOME))


SECTIONS: tuple[str, ...] = ("data", "segmenter", "cagan", "uncertainty", "classifier", "schedule", "experiment")


def _field_path(error: Mapping[str, Any]) -> str:
    loc = [str(part) for part in error.get("loc", ()) if not isinstance(part, int)]
    return ".".join(loc) or "config"


def validate_model(model_cls: type[M], data: Mapping[str, Any], *, prefix: str = "") -> M:
    """Validate `data` into `model_cls`, converting pydantic errors.

    Raises:
        ConfigurationError: Naming the first offending field.
    """
    try:
        return model_cls.model_validate(dict(data))
    except ValidationError as exc:
        first = exc.errors()[0]
        field = _field_path(first)
        if prefix:
            field = f"{prefix}.{field}" if field != "config" else prefix
        raise ConfigurationError(field, str(first.get("msg", "invalid value"))) from exc


def parse_value(text: str) -> Any:
    """Parse one override value as a TOML literal, falling back to a bare string."""
    try:
        return tomllib.loads(f"v = {text}")["v"]
    except tomllib.TOMLDecodeError:
        return text


def _set_dotted(target: dict[str, Any], key: str, value: Any) -> None:
    parts = key.split(".")
    node = target
    for part in parts[:-1]:
        child = node.setdefault(part, {})
        if not isinstance(child, dict):
            raise ConfigurationError(key, "cannot set a key below a scalar value")
        node = child
    node[parts[-1]] = value


def parse_overrides(overrides: Sequence[str]) -> dict[str, Any]:
    """Turn ``section.key=value`` strings into a nested mapping."""
    result: dict[str, Any] = {}
    for item in overrides:
        if "=" not in item:
            raise ConfigurationError(item, "override must look like section.key=value")
        key, raw = item.split("=", 1)
        key = key.strip()
        if not key:
            raise ConfigurationError(item, "override key is empty")
        _set_dotted(result, key, parse_value(raw.strip()))
    return result


def _deep_merge(base: dict[str, Any], extra: Mapping[str, Any]) -> dict[str, Any]:
    merged = dict(base)
    for key, value in extra.items():
        current = merged.get(key)
        if isinstance(current, dict) and isinstance(value, Mapping):
            merged[key] = _deep_merge(current, value)
        else:
            merged[key] = value
    return merged


def load_config(path: Path | None = None, overrides: Sequence[str] = ()) -> RunConfig:
    """Load a flat ``section.key = value`` file and apply overrides.

    Raises:
        ConfigurationError: For unreadable files, unknown keys or invalid values.
    """
    data: dict[str, Any] = {}
    if path is not None:
        try:
            data = tomllib.loads(path.read_text(encoding="utf-8"))
        except OSError as exc:
            raise ConfigurationError(str(path), f"cannot read config file: {exc}") from exc
        except tomllib.TOMLDecodeError as exc:
            raise ConfigurationError(str(path), f"invalid config file: {exc}") from exc
    data = _deep_merge(data, parse_overrides(overrides))
    return validate_model(RunConfig, data)


def config_to_json(config: BaseModel) -> str:
    """Return the canonical JSON form used for freezing and hashing."""
    return json.dumps(config.model_dump(mode="json"), sort_keys=True, indent=2)


def config_hash(config: BaseModel) -> str:
    """Return the sha256 of the canonical JSON form."""
    return hashlib.sha256(config_to_json(config).encode("utf-8")).hexdigest()


def _format_literal(value: Any) -> str:
    if value is None:
        return '""'
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, str):
        return json.dumps(value)
    if isinstance(value, list | tuple):
        return "[" + ", ".join(_format_literal(v) for v in value) + "]"
    return repr(value)


def iter_flat_items(config: RunConfig) -> Iterator[tuple[str, Any]]:
    """Yield ``(section.key, value)`` pairs of a resolved configuration."""
    dumped = config.model_dump(mode="json")
    for key, value in dumped.items():
        if key in SECTIONS:
            for sub_key, sub_value in value.items():
                yield f"{key}.{sub_key}", sub_value
        else:
            yield key, value


def to_flat_text(config: RunConfig) -> str:
    """Render a configuration as flat ``section.key = value`` lines.

    `None` values are omitted so the text parses back to the same config.
    """
    return "".join(
        f"{key} = {_format_literal(value)}\n" for key, value in iter_flat_items(config) if value is not None
    )


def describe_config_keys() -> list[str]:
    """Return one help line per configuration key with its default."""
    defaults = RunConfig()
    lines: list[str] = []
    models: list[tuple[str, BaseModel]] = [("", defaults)]
    models.extend((name, getattr(defaults, name)) for name in SECTIONS)
    for prefix, model in models:
        for name, info in type(model).model_fields.items():
            if name in SECTIONS:
                continue
            key = f"{prefix}.{name}" if prefix else name
            default = _format_literal(getattr(model, name))
            lines.append(f"  {key} = {default}  {info.description or ''}")
    return lines
