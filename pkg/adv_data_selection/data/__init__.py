"""
Dataset ingestion, normalization and splitting.
"""

from adv_data_selection.data.cache import load_dataset, save_dataset
from adv_data_selection.data.dataset import Dataset
from adv_data_selection.data.loaders import load_csv, load_idx
from adv_data_selection.data.sources import SplitData, load_full, load_source
from adv_data_selection.data.splits import split
from adv_data_selection.data.synthetic import synth_gaussians

__all__ = [
    "Dataset",
    "SplitData",
    "load_csv",
    "load_dataset",
    "load_full",
    "load_idx",
    "load_source",
    "save_dataset",
    "split",
    "synth_gaussians",
]
