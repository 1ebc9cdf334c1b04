"""
Dataset cache in numpy's .npz format.

Arrays: ``features`` (float64 M x N), ``labels`` (int64 M), ``class_count``
(int64 scalar), optional ``label_names`` (unicode) and ``split`` (unicode
scalar). Loading never unpickles.
"""

from pathlib import Path
from typing import Dict, Union

import numpy as np
from loguru import logger

from adv_data_selection.data.dataset import Dataset
from adv_data_selection.errors import DataFormatError

PathLike = Union[str, Path]


def save_dataset(path: PathLike, dataset: Dataset) -> Path:
    """Write ``dataset`` to ``path`` and return the path."""
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    arrays: Dict[str, np.ndarray] = {
        "features": dataset.features,
        "labels": dataset.labels,
        "class_count": np.array(dataset.class_count, dtype=np.int64),
    }
    if dataset.label_names is not None:
        arrays["label_names"] = np.array(dataset.label_names, dtype=np.str_)
    if dataset.split is not None:
        arrays["split"] = np.array(dataset.split, dtype=np.str_)
    with target.open("wb") as handle:
        np.savez(handle, **arrays)
    logger.info(f"Cached {len(dataset)} rows to {target}")
    return target


def load_dataset(path: PathLike) -> Dataset:
    """
    Read a dataset cache.

    Raises:
        DataFormatError: If the file lacks a required array
    """
    with np.load(Path(path), allow_pickle=False) as archive:
        missing = {"features", "labels", "class_count"} - set(archive.files)
        if missing:
            raise DataFormatError(f"{path}: cache lacks {sorted(missing)}")
        label_names = [str(n) for n in archive["label_names"]] if "label_names" in archive.files else None
        split = str(archive["split"]) if "split" in archive.files else None
        return Dataset(
            features=archive["features"],
            labels=archive["labels"],
            class_count=int(archive["class_count"]),
            label_names=label_names,
            split=split,
        )
