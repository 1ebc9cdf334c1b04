"""
Seeded Gaussian blobs for desk-scale experiments.
"""

from typing import Optional, Sequence

import numpy as np
from loguru import logger

from adv_data_selection.data.dataset import Dataset
from adv_data_selection.errors import InputError


def default_class_means(dims: int) -> np.ndarray:
    """Two classes centred at 0.25 and 0.75 in every coordinate."""
    return np.stack([np.full(dims, 0.25), np.full(dims, 0.75)])


def synth_gaussians(
    seed: int,
    samples_per_class: int,
    dims: int,
    class_means: Optional[Sequence[Sequence[float]]] = None,
    sigma: float = 0.1,
) -> Dataset:
    """
    Isotropic Gaussian blobs clamped to [0, 1].

    Rows are grouped by class (class 0 first); splitting and per-epoch shuffling
    take care of the order.

    Args:
        seed: Generator seed; equal seeds give identical datasets
        samples_per_class: Rows drawn around each mean
        dims: Feature dimension N
        class_means: C x N means; defaults to ``default_class_means(dims)``
        sigma: Standard deviation of every coordinate

    Returns:
        Dataset with C = len(class_means) classes
    """
    if samples_per_class < 1 or dims < 1:
        raise InputError("samples_per_class and dims must be positive")
    if sigma < 0:
        raise InputError(f"sigma must be non-negative, got {sigma}")
    means = default_class_means(dims) if class_means is None else np.asarray(class_means, dtype=np.float64)
    if means.ndim != 2 or means.shape[1] != dims:
        raise InputError(f"class means must be C x {dims}, got {means.shape}")
    rng = np.random.default_rng(seed)
    blocks = [
        np.clip(mean + sigma * rng.standard_normal((samples_per_class, dims)), 0.0, 1.0)
        for mean in means
    ]
    labels = np.repeat(np.arange(means.shape[0]), samples_per_class)
    logger.debug(f"Drew {labels.size} synthetic rows in {means.shape[0]} classes (sigma={sigma})")
    return Dataset(features=np.concatenate(blocks), labels=labels, class_count=int(means.shape[0]))
