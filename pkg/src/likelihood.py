"""Count records and multinomial log-likelihoods (natural logarithms)."""

import logging
from collections.abc import Iterable, Mapping
from typing import Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_serializer, field_validator, model_validator
from scipy.special import xlogy

from src.errors import ImpossibleDataError
from src.qstate import DensityMatrix, MeasurementSetting, born_probabilities, measurement_projectors

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1


class BlockData(BaseModel):
    """One group of sequential shots measured with a single setting."""

    model_config = ConfigDict(frozen=True)

    order_index: int = Field(ge=0)
    setting: MeasurementSetting
    counts: dict[str, int]

    @field_validator("setting", mode="before")
    @classmethod
    def _setting_from_axes(cls, value: object) -> object:
        if isinstance(value, (list, tuple)):
            return {"axes": tuple(value)}
        return value

    @field_validator("counts", mode="before")
    @classmethod
    def _ascii_minus(cls, value: object) -> object:
        # "−" (U+2212) is accepted as the minus outcome
        if not isinstance(value, Mapping):
            return value
        counts: dict[object, object] = {}
        for outcome, n in value.items():
            key = outcome.replace("−", "-") if isinstance(outcome, str) else outcome
            if key in counts:
                raise ValueError(f"outcome {key!r} listed twice")
            counts[key] = n
        return counts

    @field_serializer("setting")
    def _setting_as_axes(self, setting: MeasurementSetting) -> list[str]:
        return list(setting.axes)

    @model_validator(mode="after")
    def _counts_match_setting(self) -> "BlockData":
        unknown = set(self.counts) - set(self.setting.outcomes)
        if unknown:
            raise ValueError(f"outcomes {sorted(unknown)} not produced by setting {self.setting.label}")
        if any(n < 0 for n in self.counts.values()):
            raise ValueError("counts must be nonnegative")
        if sum(self.counts.values()) < 1:
            raise ValueError(f"block {self.order_index} is empty")
        return self

    @property
    def total(self) -> int:
        return sum(self.counts.values())

    def count(self, outcome: str) -> int:
        return self.counts.get(outcome, 0)

    def frequencies(self) -> dict[str, float]:
        total = self.total
        return {outcome: self.count(outcome) / total for outcome in self.setting.outcomes}


class RecordMetadata(BaseModel):
    model_config = ConfigDict(frozen=True)

    seed: int | None = None
    schedule: str = "blocked"
    p: float | None = None
    drift_sigma: float | None = None
    phi0: float | None = None
    notes: str = ""


class ExperimentRecord(BaseModel):
    """Ordered measurement blocks; the raw data of one experiment."""

    model_config = ConfigDict(frozen=True)

    schema_version: Literal[1] = SCHEMA_VERSION
    n_qubits: Literal[1, 2]
    blocks: tuple[BlockData, ...]
    metadata: RecordMetadata = RecordMetadata()

    @model_validator(mode="after")
    def _consistent_blocks(self) -> "ExperimentRecord":
        if not self.blocks:
            raise ValueError("an experiment needs at least one block")
        indices = [block.order_index for block in self.blocks]
        if indices != list(range(len(self.blocks))):
            raise ValueError(f"order_index must run 0..{len(self.blocks) - 1} without gaps, got {indices}")
        for block in self.blocks:
            if block.setting.n_qubits != self.n_qubits:
                raise ValueError(f"block {block.order_index} measures {block.setting.n_qubits} qubit(s)")
        return self

    @property
    def total_shots(self) -> int:
        return sum(block.total for block in self.blocks)

    def settings(self) -> list[str]:
        return [block.setting.label for block in self.blocks]


class EmpiricalAverages(BaseModel):
    """Observed Pauli averages of one block, keyed by Pauli label."""

    model_config = ConfigDict(frozen=True)

    values: dict[str, float]

    @field_validator("values")
    @classmethod
    def _within_unit_interval(cls, values: dict[str, float]) -> dict[str, float]:
        for label, value in values.items():
            if not -1.0 <= value <= 1.0:
                raise ValueError(f"average of {label} is {value}, outside [-1, 1]")
        return values

    def __getitem__(self, label: str) -> float:
        return self.values[label]


def empirical_averages(b: BlockData) -> EmpiricalAverages:
    """Average of every observable the block's setting determines: f+ - f-."""
    total = b.total
    values = {
        observable: sum(b.setting.outcome_sign(o, observable) * b.count(o) for o in b.setting.outcomes) / total
        for observable in b.setting.observables()
    }
    return EmpiricalAverages(values=values)


def pooled_averages(blocks: Iterable[BlockData]) -> tuple[dict[str, float], dict[str, int]]:
    """Shot-weighted averages over several blocks, and the shots behind each."""
    sums: dict[str, float] = {}
    shots: dict[str, int] = {}
    for block in blocks:
        for label, value in empirical_averages(block).values.items():
            sums[label] = sums.get(label, 0.0) + value * block.total
            shots[label] = shots.get(label, 0) + block.total
    return {label: sums[label] / shots[label] for label in sums}, shots


def multinomial_loglik(counts: Mapping[str, int], probs: Mapping[str, float]) -> float:
    """Sum of n_o ln p_o with 0 ln 0 = 0.

    Raises ImpossibleDataError when an observed outcome has probability zero.
    """
    total = 0.0
    for outcome, n in counts.items():
        p = probs.get(outcome, 0.0)
        if n > 0 and p <= 0.0:
            raise ImpossibleDataError(outcome, n)
        total += float(xlogy(n, p))
    return total


def block_max_loglik(b: BlockData) -> float:
    """Log-likelihood of the block at its own frequencies, -N H(f) in nats."""
    return multinomial_loglik(b.counts, b.frequencies())


def binary_entropy(f: float) -> float:
    """Shannon entropy of (f, 1 - f) in nats."""
    return float(-(xlogy(f, f) + xlogy(1.0 - f, 1.0 - f)))


def block_loglik(b: BlockData, rho: DensityMatrix) -> float:
    return multinomial_loglik(b.counts, born_probabilities(rho, b.setting))


def blocks_loglik(blocks: Iterable[BlockData], rho: DensityMatrix) -> float:
    """Log-likelihood of independent blocks sharing one state."""
    return sum(block_loglik(block, rho) for block in blocks)


def outcome_arrays(blocks: Iterable[BlockData]) -> tuple[np.ndarray, np.ndarray]:
    """Flatten blocks into (projector stack, count vector) in outcome order."""
    projectors: list[np.ndarray] = []
    counts: list[int] = []
    for block in blocks:
        for outcome, projector in measurement_projectors(block.setting).items():
            projectors.append(projector)
            counts.append(block.count(outcome))
    return np.array(projectors), np.array(counts, dtype=float)
