"""Experiment files (JSON) and per-block plot data (CSV)."""

import hashlib
import json
import logging
from pathlib import Path

import pandas as pd
from pydantic import ValidationError

from src.errors import ConfigError, DataFormatError
from src.likelihood import SCHEMA_VERSION, ExperimentRecord

log = logging.getLogger(__name__)

PLOT_COLUMNS = ["block_index", "setting", "n_plus", "n_total", "cumulative_plus"]


def read_record(path: Path) -> ExperimentRecord:
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise DataFormatError(f"cannot read {path}: {exc}") from exc
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as exc:
        raise DataFormatError(f"{path} is not valid JSON: {exc}") from exc
    if not isinstance(payload, dict):
        raise DataFormatError(f"{path}: expected a JSON object")
    version = payload.get("schema_version")
    if version != SCHEMA_VERSION:
        raise DataFormatError(f"{path}: unsupported schema_version {version!r}, expected {SCHEMA_VERSION}")
    try:
        return ExperimentRecord.model_validate(payload)
    except ValidationError as exc:
        raise DataFormatError(f"{path}: {exc}") from exc


def write_record(record: ExperimentRecord, path: Path, force: bool = False) -> None:
    write_text(path, record.model_dump_json(indent=2) + "\n", force=force)
    log.info("Wrote %d blocks to %s", len(record.blocks), path)


def write_text(path: Path, text: str, force: bool = False) -> None:
    if path.exists() and not force:
        raise ConfigError(f"{path} exists; pass --force to overwrite")
    path.write_text(text, encoding="utf-8")


def file_sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def plot_frame(record: ExperimentRecord) -> pd.DataFrame:
    """Per-block "all qubits up" counts with running totals per setting."""
    up = "+" * record.n_qubits
    frame = pd.DataFrame(
        {
            "block_index": [block.order_index for block in record.blocks],
            "setting": record.settings(),
            "n_plus": [block.count(up) for block in record.blocks],
            "n_total": [block.total for block in record.blocks],
        }
    )
    frame["cumulative_plus"] = frame.groupby("setting", sort=False)["n_plus"].cumsum()
    return frame[PLOT_COLUMNS]


def write_plot_data(record: ExperimentRecord, path: Path, force: bool = False) -> None:
    write_text(path, plot_frame(record).to_csv(index=False, lineterminator="\n"), force=force)
    log.info("Wrote plot data to %s", path)
