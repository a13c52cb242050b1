"""Typed candidate models, fitted models and AIC reports."""

from enum import StrEnum

from pydantic import BaseModel, ConfigDict, Field, model_validator

from src.likelihood import ExperimentRecord
from src.qstate import DensityMatrix, pauli_labels

STANDARD = "standard"


class ModelSpec(BaseModel):
    """A partition of blocks into state groups plus the components all groups share.

    ``grouping`` maps block index to group id. Components listed in ``shared``
    take one common value across every group; all others are free per group.
    """

    model_config = ConfigDict(frozen=True)

    name: str
    grouping: dict[int, int]
    shared: frozenset[str] = frozenset()
    predictive_group: int | None = None

    @model_validator(mode="after")
    def _valid_partition(self) -> "ModelSpec":
        if not self.grouping:
            raise ValueError("a model needs at least one block")
        if sorted(self.grouping) != list(range(len(self.grouping))):
            raise ValueError("grouping must assign every block index 0..n-1 exactly once")
        if self.predictive_group is not None and self.predictive_group not in self.grouping.values():
            raise ValueError(f"predictive group {self.predictive_group} is not a group of this model")
        return self

    @classmethod
    def standard(cls, n_blocks: int) -> "ModelSpec":
        return cls(name=STANDARD, grouping={i: 0 for i in range(n_blocks)})

    @classmethod
    def per_block(cls, n_blocks: int) -> "ModelSpec":
        return cls(name="per-block", grouping={i: i for i in range(n_blocks)})

    @classmethod
    def per_setting(cls, record: ExperimentRecord) -> "ModelSpec":
        order: dict[str, int] = {}
        grouping = {}
        for index, label in enumerate(record.settings()):
            grouping[index] = order.setdefault(label, len(order))
        return cls(name="per-setting", grouping=grouping)

    @classmethod
    def time_segments(
        cls,
        n_blocks: int,
        segments: int,
        shared: frozenset[str] = frozenset(),
        name: str | None = None,
    ) -> "ModelSpec":
        """``segments`` consecutive runs of blocks, as equal in size as possible."""
        if not 1 <= segments <= n_blocks:
            raise ValueError(f"cannot split {n_blocks} blocks into {segments} segments")
        grouping = {i: i * segments // n_blocks for i in range(n_blocks)}
        return cls(name=name or f"split:{segments}", grouping=grouping, shared=shared)

    @classmethod
    def free_observable(cls, record: ExperimentRecord, observable: str) -> "ModelSpec":
        """Every setting measuring ``observable`` gets its own value of it; all else shared."""
        measuring = [i for i, block in enumerate(record.blocks) if observable in block.setting.observables()]
        if not measuring:
            raise ValueError(f"no block measures {observable}")
        grouping = {i: 0 for i in range(len(record.blocks))}
        grouping.update({block: group for group, block in enumerate(measuring)})
        shared = frozenset(pauli_labels(record.n_qubits)) - {observable}
        return cls(name=f"free:{observable}", grouping=grouping, shared=shared)

    @property
    def groups(self) -> list[int]:
        """Group ids in order of first appearance."""
        return list(dict.fromkeys(self.grouping[i] for i in sorted(self.grouping)))

    @property
    def is_standard(self) -> bool:
        return len(self.groups) == 1

    @property
    def prediction_group(self) -> int:
        return self.groups[0] if self.predictive_group is None else self.predictive_group

    def blocks_of(self, group: int) -> list[int]:
        return [i for i in sorted(self.grouping) if self.grouping[i] == group]

    def summary(self) -> str:
        """Group id per block, e.g. ``"[0 0 0 1 1 1]"``."""
        return "[" + " ".join(str(self.grouping[i]) for i in sorted(self.grouping)) + "]"


class FittedModel(BaseModel):
    """Maximum-likelihood fit of one ModelSpec with its AIC score."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    spec: ModelSpec
    estimates: dict[int, DensityMatrix]
    lnl: float = Field(le=1e-9)
    k: int = Field(ge=0)
    n_samples: int = Field(ge=1)
    corrected: bool = False
    omega: float
    boundary_groups: tuple[int, ...] = ()

    @model_validator(mode="after")
    def _score_matches(self) -> "FittedModel":
        if not self.corrected and abs(self.omega - (self.lnl - self.k)) > 1e-12 * max(1.0, abs(self.lnl)):
            raise ValueError("uncorrected omega must equal lnL - K")
        return self

    @property
    def name(self) -> str:
        return self.spec.name

    @property
    def omega_uncorrected(self) -> float:
        return self.lnl - self.k

    @property
    def omega_c(self) -> float | None:
        if self.n_samples <= self.k + 1:
            return None
        return self.omega_uncorrected - self.k * (self.k + 1) / (self.n_samples - self.k - 1)

    @property
    def predictive_state(self) -> DensityMatrix:
        return self.estimates[self.spec.prediction_group]


class Verdict(StrEnum):
    CONSISTENT = "CONSISTENT"
    INCONSISTENT = "INCONSISTENT"


class AicReport(BaseModel):
    """Models ranked by Omega (best first) with deltas, Akaike weights and verdict."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    fitted: tuple[FittedModel, ...]
    deltas: tuple[float, ...]
    weights: tuple[float, ...]
    verdict: Verdict
    standard_name: str

    @model_validator(mode="after")
    def _aligned(self) -> "AicReport":
        if not len(self.fitted) == len(self.deltas) == len(self.weights):
            raise ValueError("fitted, deltas and weights must align")
        if abs(sum(self.weights) - 1.0) > 1e-12:
            raise ValueError("weights must sum to 1")
        if any(delta < 0 for delta in self.deltas):
            raise ValueError("deltas must be nonnegative")
        return self

    @property
    def best(self) -> FittedModel:
        return self.fitted[0]

    def get(self, name: str) -> FittedModel:
        for model in self.fitted:
            if model.name == name:
                return model
        raise KeyError(name)
