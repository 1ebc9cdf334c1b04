"""
Labeled dataset with features normalized to [0, 1].
"""

from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np

from adv_data_selection.errors import InputError


@dataclass(frozen=True)
class Dataset:
    """
    Immutable collection of (feature row, class id) pairs.

    Attributes:
        features: M x N float64 matrix with values in [0, 1]
        labels: M class ids in 0..class_count-1
        class_count: Number of classes C
        label_names: Optional original label of each class id
        split: Optional split tag ('train', 'validation', 'test')
    """

    features: np.ndarray
    labels: np.ndarray
    class_count: int
    label_names: Optional[List[str]] = None
    split: Optional[str] = None

    def __post_init__(self) -> None:
        features = np.asarray(self.features, dtype=np.float64)
        labels = np.asarray(self.labels, dtype=np.int64)
        if features.ndim != 2:
            raise InputError(f"features must be a 2-D matrix, got {features.ndim}-D")
        if labels.shape != (features.shape[0],):
            raise InputError(f"{features.shape[0]} rows but labels of shape {labels.shape}")
        if self.class_count < 1:
            raise InputError("class_count must be positive")
        if features.size and (not np.all(np.isfinite(features)) or features.min() < 0.0 or features.max() > 1.0):
            raise InputError("features must be finite and lie in [0, 1]")
        if labels.size and (labels.min() < 0 or labels.max() >= self.class_count):
            raise InputError(f"labels must lie in 0..{self.class_count - 1}")
        if self.label_names is not None and len(self.label_names) != self.class_count:
            raise InputError(f"{len(self.label_names)} label names for {self.class_count} classes")
        features.setflags(write=False)
        labels.setflags(write=False)
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "labels", labels)

    def __len__(self) -> int:
        return int(self.labels.shape[0])

    @property
    def input_dim(self) -> int:
        return int(self.features.shape[1])

    def subset(self, indices: Sequence[int], split: Optional[str] = None) -> "Dataset":
        """Rows at ``indices``, in that order."""
        idx = np.asarray(indices, dtype=np.int64)
        return Dataset(
            features=self.features[idx],
            labels=self.labels[idx],
            class_count=self.class_count,
            label_names=self.label_names,
            split=split if split is not None else self.split,
        )

    def class_histogram(self) -> np.ndarray:
        """Row count per class id."""
        return np.bincount(self.labels, minlength=self.class_count)

    def classes_present(self) -> int:
        return int(np.count_nonzero(self.class_histogram()))
