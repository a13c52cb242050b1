"""Turn ``--models`` tokens into ModelSpecs for a given record."""

import logging
from collections.abc import Sequence

from src.errors import ConfigError
from src.likelihood import ExperimentRecord
from src.models.spec import STANDARD, ModelSpec
from src.qstate import pauli_labels
from src.twoqubit import build_alternative_models, inconsistency_scan, multiplicity_table

log = logging.getLogger(__name__)

DEFAULT_SEGMENTS = 2
DEFAULT_SCAN_TOP = 3


def split_tokens(text: str) -> list[str]:
    """Split on ``;`` when present, otherwise on ``,``."""
    separator = ";" if ";" in text else ","
    tokens = [token.strip() for token in text.split(separator)]
    return [token for token in tokens if token]


def resolve_models(tokens: str | Sequence[str], record: ExperimentRecord) -> list[ModelSpec]:
    """ModelSpecs for ``tokens``, standard first and without duplicate names.

    The standard model is added when not requested, since ranking needs it.
    """
    if isinstance(tokens, str):
        tokens = split_tokens(tokens)
    if not tokens:
        raise ConfigError("no models requested")

    specs: dict[str, ModelSpec] = {STANDARD: ModelSpec.standard(len(record.blocks))}
    for token in tokens:
        for spec in _resolve_token(token, record):
            specs.setdefault(spec.name, spec)
    if STANDARD not in tokens:
        log.info("Adding the standard model to the candidate set")
    return list(specs.values())


def _resolve_token(token: str, record: ExperimentRecord) -> list[ModelSpec]:
    n_blocks = len(record.blocks)
    kind, _, argument = token.partition(":")
    match kind:
        case "standard":
            return [ModelSpec.standard(n_blocks)]
        case "per-block":
            return [ModelSpec.per_block(n_blocks)]
        case "per-setting":
            return [ModelSpec.per_setting(record)]
        case "split":
            return [ModelSpec.time_segments(n_blocks, _segments(token, argument, n_blocks))]
        case "mask":
            components, _, segments = argument.partition("@")
            shared = frozenset(label.strip().upper() for label in components.split(",") if label.strip())
            unknown = shared - set(pauli_labels(record.n_qubits))
            if not shared or unknown:
                raise ConfigError(f"{token}: shared components must be among {pauli_labels(record.n_qubits)}")
            count = _segments(token, segments, n_blocks) if segments else DEFAULT_SEGMENTS
            if count > n_blocks:
                raise ConfigError(f"{token}: cannot split {n_blocks} blocks into {count} segments")
            return [ModelSpec.time_segments(n_blocks, count, shared=shared, name=token)]
        case "free":
            observable = argument.strip().upper()
            if observable not in pauli_labels(record.n_qubits):
                raise ConfigError(f"{token}: unknown observable")
            try:
                return [ModelSpec.free_observable(record, observable)]
            except ValueError as exc:
                raise ConfigError(f"{token}: {exc}") from exc
        case "scan":
            if record.n_qubits != 2:
                raise ConfigError("scan models need a two-qubit record")
            top = int(argument) if argument.isdigit() else DEFAULT_SCAN_TOP
            scan = inconsistency_scan(multiplicity_table(record))
            return build_alternative_models(scan, record, top=top)
        case _:
            raise ConfigError(f"unknown model {token!r}")


def _segments(token: str, text: str, n_blocks: int) -> int:
    if not text.strip().isdigit():
        raise ConfigError(f"{token}: segment count must be a positive integer")
    count = int(text)
    if not 1 <= count <= n_blocks:
        raise ConfigError(f"{token}: cannot split {n_blocks} blocks into {count} segments")
    return count
