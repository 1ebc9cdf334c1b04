"""
Selection-composition and minimum-eps diagnostics.
"""

from dataclasses import dataclass, field
from typing import TYPE_CHECKING, List, Optional, Sequence, Tuple, Union

import numpy as np
from loguru import logger

from adv_data_selection.data.dataset import Dataset
from adv_data_selection.engine.attacks import min_adversarial_eps
from adv_data_selection.engine.numerics import Model
from adv_data_selection.engine.selection import ORIGIN_ADVERSARIAL, SelectionResult
from adv_data_selection.errors import InputError
from adv_data_selection.schema.run_config import AttackConfig, EpsilonGrid

if TYPE_CHECKING:
    from adv_data_selection.engine.training import BatchComposition


def selection_composition(selection: SelectionResult, batch: "BatchComposition") -> Tuple[int, int]:
    """
    Split the selected rows by origin.

    Returns:
        (clean_count, adversarial_count), summing to the selection size
    """
    if selection.batch_size != batch.size:
        raise InputError(f"selection over {selection.batch_size} rows, batch has {batch.size}")
    picked = batch.origins[selection.selected_indices]
    adversarial = int(np.count_nonzero(picked == ORIGIN_ADVERSARIAL))
    return selection.size - adversarial, adversarial


@dataclass
class MinEpsReport:
    """Minimum flipping eps of every probe sample."""

    values: List[Optional[float]] = field(default_factory=list)

    @property
    def flipped(self) -> int:
        """Probes flipped by some grid value."""
        return sum(v is not None for v in self.values)

    @property
    def mean(self) -> Optional[float]:
        """Mean over flipped probes; None when nothing flipped."""
        found = [v for v in self.values if v is not None]
        return float(np.mean(found)) if found else None


def min_eps_probe(
    model: Model,
    probe: Dataset,
    grid: Union[EpsilonGrid, Sequence[float]],
    cfg: AttackConfig,
) -> MinEpsReport:
    """
    Minimum adversarial eps of each probe sample.

    Args:
        model: Classifier
        probe: Fixed probe subset
        grid: Candidate budgets
        cfg: Attack template (alpha, steps, clip range)

    Raises:
        InputError: If the grid is empty
    """
    values = list(grid.values if isinstance(grid, EpsilonGrid) else grid)
    if not values:
        raise InputError("epsilon grid is empty")
    report = MinEpsReport(
        values=[
            min_adversarial_eps(model, probe.features[i], int(probe.labels[i]), values, cfg)
            for i in range(len(probe))
        ]
    )
    logger.debug(f"Probe: {report.flipped}/{len(probe)} flipped, mean eps {report.mean}")
    return report


def choose_probe(dataset: Dataset, size: int, seed: int) -> Dataset:
    """Fixed random subset of ``size`` rows (all rows when the set is smaller)."""
    if size >= len(dataset):
        return dataset.subset(np.arange(len(dataset)), split="probe")
    rng = np.random.default_rng([seed, 4])
    return dataset.subset(np.sort(rng.choice(len(dataset), size=size, replace=False)), split="probe")
