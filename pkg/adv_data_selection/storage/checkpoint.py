"""
Checkpoint container for model parameters.

Layout:

    8 bytes   magic b"ADSCKPT1"
    4 bytes   big-endian uint32 header length H
    H bytes   UTF-8 JSON header, sorted keys, no whitespace:
              format_version, layer_dims, hidden_activation, dtype ("<f8"),
              arrays (list of {"name", "shape"} in payload order)
    payload   little-endian float64 arrays in header order, C order

Equal models always produce equal bytes.
"""

import json
import struct
from pathlib import Path
from typing import Any, Dict, List, Tuple, Union

import numpy as np
from loguru import logger

from adv_data_selection.engine.numerics import Model
from adv_data_selection.errors import AdvSelectionError, CheckpointError

MAGIC = b"ADSCKPT1"
FORMAT_VERSION = 1
DTYPE = "<f8"

PathLike = Union[str, Path]


def _named_arrays(model: Model) -> List[Tuple[str, np.ndarray]]:
    arrays = []
    for i, (w, b) in enumerate(zip(model.weights, model.biases)):
        arrays.append((f"weights.{i}", w))
        arrays.append((f"biases.{i}", b))
    return arrays


def checkpoint_bytes(model: Model) -> bytes:
    """Serialize ``model`` into the container format."""
    arrays = _named_arrays(model)
    header = {
        "format_version": FORMAT_VERSION,
        "layer_dims": list(model.layer_dims),
        "hidden_activation": model.hidden_activation,
        "dtype": DTYPE,
        "arrays": [{"name": name, "shape": list(a.shape)} for name, a in arrays],
    }
    header_bytes = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    payload = b"".join(np.ascontiguousarray(a, dtype=DTYPE).tobytes() for _, a in arrays)
    return MAGIC + struct.pack(">I", len(header_bytes)) + header_bytes + payload


def model_from_bytes(blob: bytes) -> Model:
    """
    Parse a container.

    Raises:
        CheckpointError: On bad magic, a truncated payload or an unsupported version
    """
    if blob[: len(MAGIC)] != MAGIC:
        raise CheckpointError("not a checkpoint: bad magic")
    offset = len(MAGIC) + 4
    if len(blob) < offset:
        raise CheckpointError("truncated checkpoint header")
    (header_len,) = struct.unpack(">I", blob[len(MAGIC) : offset])
    if len(blob) < offset + header_len:
        raise CheckpointError("truncated checkpoint header")
    try:
        header: Dict[str, Any] = json.loads(blob[offset : offset + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise CheckpointError(f"unreadable checkpoint header: {e}")
    if header.get("format_version") != FORMAT_VERSION:
        raise CheckpointError(f"unsupported checkpoint version {header.get('format_version')}")
    if header.get("dtype") != DTYPE:
        raise CheckpointError(f"unsupported dtype {header.get('dtype')}")

    cursor = offset + header_len
    tensors: Dict[str, np.ndarray] = {}
    for entry in header["arrays"]:
        shape = tuple(int(d) for d in entry["shape"])
        count = int(np.prod(shape, dtype=np.int64))
        end = cursor + 8 * count
        if end > len(blob):
            raise CheckpointError(f"truncated payload in {entry['name']}")
        tensors[entry["name"]] = np.frombuffer(blob[cursor:end], dtype=DTYPE).reshape(shape).astype(np.float64)
        cursor = end
    if cursor != len(blob):
        raise CheckpointError(f"{len(blob) - cursor} unexpected trailing bytes")

    layers = len(header["layer_dims"]) - 1
    try:
        return Model(
            layer_dims=header["layer_dims"],
            weights=[tensors[f"weights.{i}"] for i in range(layers)],
            biases=[tensors[f"biases.{i}"] for i in range(layers)],
            hidden_activation=header["hidden_activation"],
        )
    except (KeyError, AdvSelectionError) as e:
        raise CheckpointError(f"inconsistent checkpoint: {e}")


def save_checkpoint(path: PathLike, model: Model) -> Path:
    """Write ``model`` to ``path``, creating parent directories."""
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    target.write_bytes(checkpoint_bytes(model))
    logger.info(f"Checkpoint written to {target}")
    return target


def load_checkpoint(path: PathLike) -> Model:
    """Read a model from ``path``."""
    source = Path(path)
    if not source.is_file():
        raise CheckpointError(f"checkpoint not found: {source}")
    return model_from_bytes(source.read_bytes())
