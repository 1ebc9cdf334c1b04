"""
Resolution of a configured dataset source into train / validation / test sets.
"""

from dataclasses import dataclass
from typing import Dict, List, Optional

from loguru import logger

from adv_data_selection.data.cache import load_dataset
from adv_data_selection.data.dataset import Dataset
from adv_data_selection.data.loaders import load_csv, load_idx
from adv_data_selection.data.splits import split
from adv_data_selection.data.synthetic import synth_gaussians
from adv_data_selection.schema.run_config import DatasetSource


@dataclass(frozen=True)
class SplitData:
    """The three splits of one source."""

    train: Dataset
    validation: Dataset
    test: Dataset

    @property
    def label_names(self) -> Optional[List[str]]:
        return self.train.label_names

    def sizes(self) -> Dict[str, int]:
        return {"train": len(self.train), "validation": len(self.validation), "test": len(self.test)}

    def eval_set(self) -> Dataset:
        """Validation when non-empty, else test, else train."""
        if len(self.validation):
            return self.validation
        if len(self.test):
            return self.test
        logger.warning("No validation or test rows; evaluating on the training set")
        return self.train


def load_full(source: DatasetSource, seed: int) -> Dataset:
    """The unsplit dataset named by ``source``."""
    if source.kind == "idx":
        return load_idx(source.images_path, source.labels_path)
    if source.kind == "csv":
        return load_csv(source.csv_path, source.label_column)
    if source.kind == "cache":
        return load_dataset(source.cache_path)
    return synth_gaussians(seed, source.samples_per_class, source.dims, source.class_means, source.sigma)


def load_source(source: DatasetSource, seed: int) -> SplitData:
    """Load ``source`` and split it with ``seed``."""
    train, validation, test = split(load_full(source, seed), source.split_fractions, seed)
    logger.info(f"Dataset {source.kind}: {len(train)} train, {len(validation)} validation, {len(test)} test")
    return SplitData(train=train, validation=validation, test=test)
