"""
Record schemas for adversarial data-selection training.

This module defines the records a run emits: one EpochMetrics per epoch
(wrapped in a schema-versioned MetricsRecord line), the run manifest, and
the gradient-check report.
"""

from typing import Any, Dict, List, Optional

from pydantic import BaseModel, ConfigDict, Field

METRICS_SCHEMA_VERSION = 1
MANIFEST_SCHEMA_VERSION = 1


class EpochMetrics(BaseModel):
    """
    Per-epoch training record.

    Selected counts are sums over the epoch's batches; the per-batch means
    are exported alongside so either reading of "averaged amount" can be plotted.
    """

    epoch: int = Field(..., ge=1, description="1-based epoch index")
    standard_accuracy: float = Field(..., ge=0.0, le=1.0, description="Clean accuracy on the eval set")
    robust_accuracy: float = Field(..., ge=0.0, le=1.0, description="PGD accuracy on the eval set")
    train_accuracy: float = Field(..., ge=0.0, le=1.0, description="Clean accuracy on the training set")
    train_loss: float = Field(..., ge=0.0, description="Mean clean loss on the training set")
    effective_pup: float = Field(..., gt=0.0, le=1.0, description="Selected fraction used this epoch")
    selected_clean_count: int = Field(..., ge=0, description="Selected clean rows, summed over batches")
    selected_adversarial_count: int = Field(..., ge=0, description="Selected adversarial rows, summed")
    mean_selected_clean: float = Field(..., ge=0.0, description="Selected clean rows per batch")
    mean_selected_adversarial: float = Field(..., ge=0.0, description="Selected adversarial rows per batch")
    backward_pass_count: int = Field(..., ge=0, description="Rows that contributed to updates")
    rows_processed: int = Field(..., ge=0, description="Rows of all composed batches")
    batch_count: int = Field(..., ge=0, description="Number of parameter updates")
    mean_min_eps: Optional[float] = Field(None, description="Mean minimum eps over flipped probes")
    min_eps_flipped: Optional[int] = Field(None, description="Probes flipped by some grid eps")
    wall_time: Optional[float] = Field(None, description="Epoch wall time in seconds")

    model_config = ConfigDict(extra="forbid")

    @property
    def adversarial_share(self) -> float:
        """Fraction of selected rows that were adversarial."""
        total = self.selected_clean_count + self.selected_adversarial_count
        return self.selected_adversarial_count / total if total else 0.0


class MetricsRecord(BaseModel):
    """One line of the metrics stream."""

    schema_version: int = Field(METRICS_SCHEMA_VERSION, description="Stream schema version")
    run_label: str = Field("", description="Free-form label of the producing run")
    metrics: EpochMetrics

    model_config = ConfigDict(extra="forbid")


class RunManifest(BaseModel):
    """Everything needed to reproduce a command invocation."""

    schema_version: int = Field(MANIFEST_SCHEMA_VERSION)
    package_version: str
    command: str = Field(..., description="CLI sub-command")
    seed: int
    resolved_config: Dict[str, Any] = Field(..., description="Config after overrides and defaults")
    label_mapping: Optional[List[str]] = Field(None, description="Class id -> original label")
    dataset_sizes: Dict[str, int] = Field(default_factory=dict, description="Rows per split")
    outputs: Dict[str, str] = Field(default_factory=dict, description="Files written by the command")
    created_at: str = Field(..., description="ISO timestamp of creation")


class GradcheckEntry(BaseModel):
    """Worst coordinate of one parameter tensor (or of the input gradient)."""

    layer: int = Field(..., description="Layer index; -1 for the input gradient")
    parameter: str = Field(..., description="'weight', 'bias' or 'input'")
    worst_index: List[int] = Field(..., description="Index of the worst coordinate")
    analytic: float
    numeric: float
    relative_error: float
    checked: int = Field(..., ge=0, description="Coordinates compared")
    excluded: int = Field(..., ge=0, description="Coordinates skipped because a ReLU switched")


class GradcheckReport(BaseModel):
    """Result of comparing analytic gradients against central differences."""

    layer_dims: List[int]
    step: float
    tolerance: float
    entries: List[GradcheckEntry]

    @property
    def max_relative_error(self) -> float:
        """Worst relative error over all entries."""
        return max((e.relative_error for e in self.entries), default=0.0)

    @property
    def passed(self) -> bool:
        """Whether every checked coordinate is within tolerance."""
        return self.max_relative_error < self.tolerance


class EvalReport(BaseModel):
    """Structured output of the eval command."""

    checkpoint: str
    split: str
    rows: int = Field(..., ge=0)
    standard_accuracy: float = Field(..., ge=0.0, le=1.0)
    robust_accuracy: float = Field(..., ge=0.0, le=1.0)
    attack: Dict[str, Any] = Field(..., description="Attack settings used for the robust accuracy")


class AttackSummary(BaseModel):
    """Flip statistics of one attack budget."""

    epsilon: float = Field(..., ge=0.0)
    rows: int = Field(..., ge=0)
    flip_rate: float = Field(..., ge=0.0, le=1.0, description="Share of rows misclassified after the attack")
    robust_accuracy: float = Field(..., ge=0.0, le=1.0)
    violations: int = Field(..., ge=0, description="Rows outside the eps-ball or the clip range")


class PupSweepRow(BaseModel):
    """Final accuracies of one run of a selected-fraction sweep."""

    pup: float = Field(..., gt=0.0, le=1.0)
    standard_accuracy: float = Field(..., ge=0.0, le=1.0)
    robust_accuracy: float = Field(..., ge=0.0, le=1.0)
    backward_pass_count: int = Field(..., ge=0, description="Backward contributions over all epochs")
    epochs_run: int = Field(..., ge=0)
