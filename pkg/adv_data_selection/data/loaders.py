"""
Dataset loaders for IDX image files and labeled CSV tables.

IDX layout (big endian):

    images: u32 magic 0x00000803 | u32 count | u32 rows | u32 cols | u8 pixels (row-major)
    labels: u32 magic 0x00000801 | u32 count | u8 labels
"""

import struct
from pathlib import Path
from typing import Tuple, Union

import numpy as np
import pandas as pd
from loguru import logger

from adv_data_selection.data.dataset import Dataset
from adv_data_selection.errors import (
    IdxCountMismatchError,
    IdxMagicError,
    IdxTruncatedError,
    MissingColumnError,
    NonNumericCellError,
)

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801

PathLike = Union[str, Path]


def _read_idx(path: PathLike, expected_magic: int, header_fields: int) -> Tuple[Tuple[int, ...], np.ndarray]:
    payload = Path(path).read_bytes()
    header_size = 4 * (1 + header_fields)
    if len(payload) < 4:
        raise IdxTruncatedError(f"{path}: file too short for an IDX magic number")
    (magic,) = struct.unpack(">I", payload[:4])
    if magic != expected_magic:
        raise IdxMagicError(f"{path}: magic 0x{magic:08x}, expected 0x{expected_magic:08x}")
    if len(payload) < header_size:
        raise IdxTruncatedError(f"{path}: header needs {header_size} bytes, file has {len(payload)}")
    dims = struct.unpack(f">{header_fields}I", payload[4:header_size])
    expected = int(np.prod(dims, dtype=np.int64))
    body = np.frombuffer(payload, dtype=np.uint8, offset=header_size)
    if body.size < expected:
        raise IdxTruncatedError(f"{path}: payload has {body.size} bytes, header announces {expected}")
    if body.size > expected:
        logger.warning(f"{path}: ignoring {body.size - expected} trailing bytes")
    return dims, body[:expected]


def load_idx(images_path: PathLike, labels_path: PathLike) -> Dataset:
    """
    Load an IDX image/label pair.

    Pixels are divided by 255 and every image is flattened row-major.

    Args:
        images_path: IDX3 unsigned-byte image file
        labels_path: IDX1 unsigned-byte label file

    Returns:
        Dataset with N = rows * cols features and C = max label + 1 classes

    Raises:
        IdxMagicError: If either file has the wrong magic number
        IdxTruncatedError: If a payload is shorter than announced
        IdxCountMismatchError: If the files hold different item counts
    """
    (count, rows, cols), pixels = _read_idx(images_path, IDX_IMAGES_MAGIC, 3)
    (label_count,), labels = _read_idx(labels_path, IDX_LABELS_MAGIC, 1)
    if count != label_count:
        raise IdxCountMismatchError(f"{count} images but {label_count} labels")
    features = pixels.reshape(count, rows * cols).astype(np.float64) / 255.0
    class_count = int(labels.max()) + 1 if labels.size else 1
    logger.info(f"Loaded {count} IDX images of {rows}x{cols} with {class_count} classes")
    return Dataset(features=features, labels=labels.astype(np.int64), class_count=class_count)


def load_csv(path: PathLike, label_column: str = "label") -> Dataset:
    """
    Load a CSV table with a header row.

    Every non-label column is min-max scaled into [0, 1]; a constant column
    becomes 0. Labels are mapped to dense ids in order of first appearance and
    the original labels are kept as ``label_names``.

    Raises:
        MissingColumnError: If the label column is absent
        NonNumericCellError: If a feature cell is not a number
    """
    frame = pd.read_csv(path, dtype=str, keep_default_na=False)
    if label_column not in frame.columns:
        raise MissingColumnError(f"{path}: no column '{label_column}' in {list(frame.columns)}")
    feature_columns = [c for c in frame.columns if c != label_column]
    numeric = frame[feature_columns].apply(pd.to_numeric, errors="coerce")
    bad = numeric.isna() | ~np.isfinite(numeric.to_numpy(dtype=np.float64, na_value=np.nan))
    if bad.to_numpy().any():
        row, col = np.argwhere(bad.to_numpy())[0]
        raise NonNumericCellError(
            f"{path}: row {row + 1}, column '{feature_columns[col]}' holds {frame.iloc[row][feature_columns[col]]!r}"
        )
    values = numeric.to_numpy(dtype=np.float64)
    if values.shape[0] == 0:
        raise NonNumericCellError(f"{path}: no data rows")
    low, high = values.min(axis=0), values.max(axis=0)
    span = high - low
    scaled = np.divide(values - low, span, out=np.zeros_like(values), where=span > 0)
    codes, names = pd.factorize(frame[label_column], sort=False)
    logger.info(f"Loaded {len(frame)} CSV rows, {len(feature_columns)} features, {len(names)} classes")
    return Dataset(
        features=np.clip(scaled, 0.0, 1.0),
        labels=codes.astype(np.int64),
        class_count=max(len(names), 1),
        label_names=[str(n) for n in names],
    )
