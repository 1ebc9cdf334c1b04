"""
Run configuration schema for adversarial data-selection training.

This module defines the configuration sections of a training run: the attack
threat model, the selection policy, the training loop, the dataset source and
the output layout. Every field has a default so an empty document is a valid
run configuration.
"""

from enum import Enum
from typing import Any, Dict, List, Literal, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

DEFAULT_EPSILON = 8 / 255
DEFAULT_ALPHA = 0.01
DEFAULT_STEPS = 20


class TrainingMode(str, Enum):
    """Batch composition modes."""

    STANDARD = "standard"  # clean rows only
    ROBUST = "robust"  # adversarial rows only
    DS_ROBUST = "ds_robust"  # adversarial + clean, loss-ranked selection
    RANDOM_ROBUST = "random_robust"  # adversarial + clean, random selection


class SelectionKind(str, Enum):
    """How rows of a composed batch are chosen for the update."""

    ALL = "all"
    TOP_LOSS = "top_loss"
    RANDOM = "random"


class PupSchedule(str, Enum):
    """How the selected fraction evolves across epochs."""

    FIXED = "fixed"
    ADAPTIVE = "adaptive"


class AccuracySource(str, Enum):
    """Which accuracy the adaptive schedule consumes."""

    STANDARD = "standard"
    ROBUST = "robust"
    TRAIN = "train"


class AttackConfig(BaseModel):
    """
    L-infinity PGD threat model.

    Defaults follow the usual CIFAR-scale setting: eps 8/255, step 0.01, 20 steps.
    """

    epsilon: float = Field(DEFAULT_EPSILON, ge=0.0, description="L-infinity budget in input units")
    alpha: float = Field(DEFAULT_ALPHA, gt=0.0, description="Step size per iteration")
    steps: int = Field(DEFAULT_STEPS, ge=1, description="Number of iterations")
    random_start: bool = Field(False, description="Start from a uniform point of the eps-ball")
    clip_min: float = Field(0.0, description="Lower bound of the valid input range")
    clip_max: float = Field(1.0, description="Upper bound of the valid input range")

    model_config = ConfigDict(extra="forbid", frozen=True)

    @model_validator(mode="after")
    def _check_clip_range(self) -> "AttackConfig":
        if not self.clip_min < self.clip_max:
            raise ValueError(f"clip_min ({self.clip_min}) must be below clip_max ({self.clip_max})")
        return self


def _check_grid_values(values: List[float]) -> List[float]:
    if any(v < 0 for v in values):
        raise ValueError("grid values must be non-negative")
    if any(b <= a for a, b in zip(values, values[1:])):
        raise ValueError("grid values must be strictly increasing")
    return values


class EpsilonGrid(BaseModel):
    """Strictly increasing candidate budgets for the minimum-eps search."""

    values: List[float] = Field(..., description="Candidate eps values, strictly increasing")

    model_config = ConfigDict(extra="forbid", frozen=True)

    @field_validator("values")
    @classmethod
    def _check_values(cls, values: List[float]) -> List[float]:
        return _check_grid_values(values)

    @classmethod
    def linspace(cls, stop: float, count: int, start: float = 0.0) -> "EpsilonGrid":
        """Evenly spaced grid from start to stop inclusive."""
        if count < 1:
            raise ValueError("count must be positive")
        if count == 1:
            return cls(values=[float(start)])
        step = (stop - start) / (count - 1)
        values = [float(start + i * step) for i in range(count - 1)]
        return cls(values=values + [float(stop)])


class SelectionPolicy(BaseModel):
    """Which rows of a composed batch take part in the parameter update."""

    kind: SelectionKind = Field(SelectionKind.TOP_LOSS, description="Selection rule")
    schedule: PupSchedule = Field(PupSchedule.FIXED, description="Fixed or accuracy-adaptive fraction")
    pup: float = Field(0.5, gt=0.0, le=1.0, description="Selected fraction for the fixed schedule")
    pup0: float = Field(1.0, gt=0.0, le=1.0, description="Initial fraction for the adaptive schedule")
    floor: float = Field(0.0, ge=0.0, lt=1.0, description="Lower bound of the adaptive fraction")
    accuracy_source: AccuracySource = Field(
        AccuracySource.STANDARD, description="Accuracy consumed by the adaptive schedule"
    )
    seed: int = Field(0, ge=0, description="Seed of the random selection stream")
    literal_error_signal: bool = Field(
        False, description="Rank by the label-independent summed formula (audit only)"
    )

    model_config = ConfigDict(extra="forbid", frozen=True)

    def initial_pup(self) -> float:
        """Fraction used in the first epoch."""
        return self.pup0 if self.schedule == PupSchedule.ADAPTIVE else self.pup


class TrainConfig(BaseModel):
    """Training loop configuration."""

    mode: TrainingMode = Field(TrainingMode.DS_ROBUST, description="Batch composition mode")
    batch_clean_size: int = Field(128, ge=1, description="Clean samples per mixed batch (b')")
    epochs: int = Field(10, ge=1, description="Number of epochs (T)")
    learning_rate: float = Field(0.05, gt=0.0, description="SGD step size (mu)")
    hidden_dims: List[int] = Field(default_factory=lambda: [64, 64], description="Hidden layer widths")
    attack: AttackConfig = Field(default_factory=AttackConfig, description="Training attack")
    eval_attack: AttackConfig = Field(default_factory=AttackConfig, description="Evaluation attack")
    policy: SelectionPolicy = Field(default_factory=SelectionPolicy, description="Selection policy")
    seed: int = Field(0, ge=0, description="Run seed (synchronised from RunConfig.seed)")
    early_stop_patience: Optional[int] = Field(
        None, ge=1, description="Epochs without robust-accuracy gain before stopping"
    )
    checkpoint_every: Optional[int] = Field(None, ge=1, description="Checkpoint interval in epochs")
    probe_size: int = Field(0, ge=0, description="Samples in the minimum-eps probe set")
    probe_every: int = Field(1, ge=1, description="Probe interval in epochs")
    probe_grid: List[float] = Field(
        default_factory=lambda: [round(0.01 * i, 10) for i in range(0, 31)],
        description="Candidate eps values of the minimum-eps probe",
    )

    model_config = ConfigDict(extra="forbid", frozen=True)

    @field_validator("hidden_dims")
    @classmethod
    def _check_hidden(cls, dims: List[int]) -> List[int]:
        if any(d < 1 for d in dims):
            raise ValueError("hidden layer widths must be positive")
        return dims

    @field_validator("probe_grid")
    @classmethod
    def _check_grid(cls, values: List[float]) -> List[float]:
        return _check_grid_values(values)

    def rows_per_step(self) -> int:
        """Rows of every composed batch (b = 2b')."""
        return 2 * self.batch_clean_size

    def indices_per_batch(self) -> int:
        """Dataset indices drawn per batch for this mode."""
        if self.mode in (TrainingMode.DS_ROBUST, TrainingMode.RANDOM_ROBUST):
            return self.batch_clean_size
        return 2 * self.batch_clean_size

    def selection_kind(self) -> SelectionKind:
        """
        Selection rule actually applied in this mode.

        The standard and robust baselines update on every row of the batch;
        random_robust always selects at random. Only ds_robust follows
        ``policy.kind``.
        """
        if self.mode in (TrainingMode.STANDARD, TrainingMode.ROBUST):
            return SelectionKind.ALL
        if self.mode == TrainingMode.RANDOM_ROBUST:
            return SelectionKind.RANDOM
        return self.policy.kind


class DatasetSource(BaseModel):
    """Where the run's data comes from and how it is split."""

    kind: Literal["synthetic", "idx", "csv", "cache"] = Field("synthetic", description="Source type")
    images_path: Optional[str] = Field(None, description="IDX images file")
    labels_path: Optional[str] = Field(None, description="IDX labels file")
    csv_path: Optional[str] = Field(None, description="CSV file with a header row")
    label_column: str = Field("label", description="CSV label column")
    cache_path: Optional[str] = Field(None, description="Dataset cache (.npz)")
    samples_per_class: int = Field(500, ge=1, description="Synthetic samples per class")
    dims: int = Field(20, ge=1, description="Synthetic feature dimension")
    class_means: Optional[List[List[float]]] = Field(
        None, description="Synthetic class means; default is two opposite corners"
    )
    sigma: float = Field(0.1, ge=0.0, description="Synthetic isotropic standard deviation")
    split_fractions: Tuple[float, float, float] = Field(
        (0.7, 0.1, 0.2), description="Train / validation / test fractions"
    )

    model_config = ConfigDict(extra="forbid", frozen=True)

    @model_validator(mode="after")
    def _check_source(self) -> "DatasetSource":
        required: Dict[str, List[str]] = {
            "idx": ["images_path", "labels_path"],
            "csv": ["csv_path"],
            "cache": ["cache_path"],
            "synthetic": [],
        }
        missing = [name for name in required[self.kind] if getattr(self, name) is None]
        if missing:
            raise ValueError(f"dataset kind '{self.kind}' requires {', '.join(missing)}")
        if any(f < 0 for f in self.split_fractions) or abs(sum(self.split_fractions) - 1.0) > 1e-9:
            raise ValueError("split fractions must be non-negative and sum to 1")
        if self.class_means is not None and any(len(m) != self.dims for m in self.class_means):
            raise ValueError(f"every class mean must have {self.dims} entries")
        return self

    def input_paths(self) -> List[str]:
        """Files this source reads."""
        names = {
            "idx": [self.images_path, self.labels_path],
            "csv": [self.csv_path],
            "cache": [self.cache_path],
            "synthetic": [],
        }[self.kind]
        return [p for p in names if p is not None]


class OutputConfig(BaseModel):
    """Layout of a run directory."""

    directory: str = Field("runs/default", description="Run output directory")
    metrics_file: str = Field("metrics.jsonl", description="Line-delimited metrics stream")
    checkpoint_file: str = Field("model.ckpt", description="Final checkpoint")
    manifest_file: str = Field("manifest.json", description="Run manifest")
    record_wall_time: bool = Field(False, description="Write wall time into metrics lines")

    model_config = ConfigDict(extra="forbid", frozen=True)


class RunConfig(BaseModel):
    """Complete, validated run configuration."""

    seed: int = Field(0, ge=0, description="Run seed for initialization, shuffling, attacks and splits")
    train: TrainConfig = Field(default_factory=TrainConfig)
    dataset: DatasetSource = Field(default_factory=DatasetSource)
    output: OutputConfig = Field(default_factory=OutputConfig)

    model_config = ConfigDict(extra="forbid", frozen=True)

    @model_validator(mode="before")
    @classmethod
    def _sync_seed(cls, data: Any) -> Any:
        # the run seed is the single source of truth for train.seed
        if not isinstance(data, dict):
            return data
        seed = data.get("seed", 0)
        train = data.get("train")
        if isinstance(train, TrainConfig):
            train = train.model_copy(update={"seed": seed})
        else:
            train = {**(train or {}), "seed": seed}
        return {**data, "train": train}


# Mapping between section names and their schema models
CONFIG_SECTION_SCHEMAS = {
    "attack": AttackConfig,
    "eval_attack": AttackConfig,
    "policy": SelectionPolicy,
    "train": TrainConfig,
    "dataset": DatasetSource,
    "output": OutputConfig,
    "run": RunConfig,
}
