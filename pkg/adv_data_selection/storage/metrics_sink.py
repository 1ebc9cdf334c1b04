"""
Line-delimited metrics stream and curve export.

Each line is one MetricsRecord serialized as JSON. The writer flushes after
every record so a running job can be tailed.
"""

from pathlib import Path
from typing import IO, List, Optional, Union

import pandas as pd
from loguru import logger
from pydantic import ValidationError

from adv_data_selection.errors import DataFormatError
from adv_data_selection.schema.records import METRICS_SCHEMA_VERSION, EpochMetrics, MetricsRecord

PathLike = Union[str, Path]

CURVE_COLUMNS = [
    "epoch",
    "standard_accuracy",
    "robust_accuracy",
    "train_accuracy",
    "train_loss",
    "effective_pup",
    "selected_clean_count",
    "selected_adversarial_count",
    "mean_selected_clean",
    "mean_selected_adversarial",
    "adversarial_share",
    "backward_pass_count",
    "mean_min_eps",
    "min_eps_flipped",
]


class MetricsWriter:
    """
    Appends MetricsRecord lines to a file.

    Args:
        path: Stream file
        run_label: Label stored in every record
        record_wall_time: Keep the epoch wall time in the written records
        append: Continue an existing stream instead of truncating it
    """

    def __init__(
        self,
        path: PathLike,
        run_label: str = "",
        record_wall_time: bool = False,
        append: bool = False,
    ):
        self.path = Path(path)
        self.run_label = run_label
        self.record_wall_time = record_wall_time
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._handle: Optional[IO[str]] = self.path.open("a" if append else "w", encoding="utf-8")
        self.records_written = 0

    def write(self, metrics: EpochMetrics) -> None:
        """Append one record and flush."""
        if self._handle is None:
            raise ValueError("metrics writer is closed")
        if not self.record_wall_time:
            metrics = metrics.model_copy(update={"wall_time": None})
        record = MetricsRecord(run_label=self.run_label, metrics=metrics)
        self._handle.write(record.model_dump_json() + "\n")
        self._handle.flush()
        self.records_written += 1

    def close(self) -> None:
        if self._handle is not None:
            self._handle.close()
            self._handle = None

    def __enter__(self) -> "MetricsWriter":
        return self

    def __exit__(self, *exc_info: object) -> None:
        self.close()


def read_metrics(path: PathLike) -> List[MetricsRecord]:
    """
    Parse a metrics stream.

    Raises:
        DataFormatError: If a line is not a valid record of the current schema
    """
    records = []
    with Path(path).open(encoding="utf-8") as handle:
        for number, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                record = MetricsRecord.model_validate_json(line)
            except ValidationError as e:
                raise DataFormatError(f"{path}:{number}: invalid metrics record: {e}")
            if record.schema_version != METRICS_SCHEMA_VERSION:
                raise DataFormatError(f"{path}:{number}: unsupported schema version {record.schema_version}")
            records.append(record)
    return records


def curves_frame(records: List[MetricsRecord]) -> pd.DataFrame:
    """One row per epoch with the fixed ``CURVE_COLUMNS``."""
    rows = []
    for record in records:
        row = record.metrics.model_dump()
        row["adversarial_share"] = record.metrics.adversarial_share
        rows.append({column: row[column] for column in CURVE_COLUMNS})
    return pd.DataFrame(rows, columns=CURVE_COLUMNS)


def export_curves(metrics_path: PathLike, out_path: PathLike) -> pd.DataFrame:
    """Write the per-epoch curves of a metrics stream as CSV."""
    frame = curves_frame(read_metrics(metrics_path))
    target = Path(out_path)
    target.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(target, index=False)
    logger.info(f"Exported {len(frame)} epochs of curves to {target}")
    return frame
