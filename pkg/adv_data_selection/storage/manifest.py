"""
Run manifest: the resolved configuration and outputs of one command.
"""

from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

from loguru import logger

from adv_data_selection import __version__
from adv_data_selection.schema.records import RunManifest


def build_manifest(
    command: str,
    seed: int,
    resolved_config: Dict[str, Any],
    label_mapping: Optional[List[str]] = None,
    dataset_sizes: Optional[Dict[str, int]] = None,
    outputs: Optional[Dict[str, str]] = None,
) -> RunManifest:
    return RunManifest(
        package_version=__version__,
        command=command,
        seed=seed,
        resolved_config=resolved_config,
        label_mapping=label_mapping,
        dataset_sizes=dataset_sizes or {},
        outputs=outputs or {},
        created_at=datetime.now(timezone.utc).isoformat(),
    )


def write_manifest(path: Union[str, Path], manifest: RunManifest) -> Path:
    """Write ``manifest`` as indented JSON."""
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    target.write_text(manifest.model_dump_json(indent=2) + "\n", encoding="utf-8")
    logger.info(f"Manifest written to {target}")
    return target


def read_manifest(path: Union[str, Path]) -> RunManifest:
    return RunManifest.model_validate_json(Path(path).read_text(encoding="utf-8"))
