"""Two-qubit experiments over the nine local Pauli settings.

Each setting (A, B) fixes three averages: the correlator AB and the marginals
AI and IB. The correlators are measured once, while every marginal is
estimated three times, once per setting that shares its axis. Disagreement
between repeated estimates suggests which alternative models to try.
"""

import itertools
import logging
import math

from pydantic import BaseModel, ConfigDict, Field, model_validator

from src.config import MleOptions
from src.errors import AnalysisError, DimensionMismatchError
from src.likelihood import BlockData, ExperimentRecord, empirical_averages
from src.models.spec import ModelSpec
from src.optimize import MleResult, maximize_likelihood
from src.qstate import AXES, MeasurementSetting

log = logging.getLogger(__name__)


def enumerate_settings() -> list[MeasurementSetting]:
    """XX, XY, XZ, YX, ..., ZZ."""
    return [MeasurementSetting(axes=pair) for pair in itertools.product(AXES, repeat=2)]


SETTING_LABELS = tuple(setting.label for setting in enumerate_settings())


class SettingAverages(BaseModel):
    model_config = ConfigDict(frozen=True)

    setting: str
    correlator: float = Field(ge=-1.0, le=1.0)
    marginal_a: float = Field(ge=-1.0, le=1.0)
    marginal_b: float = Field(ge=-1.0, le=1.0)
    shots: int = Field(ge=1)


def per_setting_averages(b: BlockData) -> SettingAverages:
    if b.setting.n_qubits != 2:
        raise DimensionMismatchError(2, b.setting.n_qubits, "qubit count")
    correlator, marginal_a, marginal_b = (empirical_averages(b)[label] for label in b.setting.observables())
    return SettingAverages(
        setting=b.setting.label,
        correlator=correlator,
        marginal_a=marginal_a,
        marginal_b=marginal_b,
        shots=b.total,
    )


class TwoQubitAverages(BaseModel):
    """All per-setting averages, addressable by (setting, observable)."""

    model_config = ConfigDict(frozen=True)

    entries: tuple[SettingAverages, ...]

    @classmethod
    def from_record(cls, data: ExperimentRecord) -> "TwoQubitAverages":
        return cls(entries=tuple(per_setting_averages(block) for block in data.blocks))

    def get(self, setting: str, observable: str) -> float:
        for entry in self.entries:
            if entry.setting != setting:
                continue
            a, b = setting
            values = {a + b: entry.correlator, a + "I": entry.marginal_a, "I" + b: entry.marginal_b}
            if observable in values:
                return values[observable]
        raise KeyError((setting, observable))


class ObservableEstimate(BaseModel):
    model_config = ConfigDict(frozen=True)

    setting: str
    value: float
    shots: int


class MultiplicityTable(BaseModel):
    """Observable -> its estimates, one per setting that determines it."""

    model_config = ConfigDict(frozen=True)

    estimates: dict[str, tuple[ObservableEstimate, ...]]

    @model_validator(mode="after")
    def _nine_once_six_thrice(self) -> "MultiplicityTable":
        multiplicities = sorted(len(values) for values in self.estimates.values())
        if multiplicities != [1] * 9 + [3] * 6:
            raise ValueError(f"expected 9 single and 6 triple estimates, got multiplicities {multiplicities}")
        return self

    @property
    def total_estimates(self) -> int:
        return sum(len(values) for values in self.estimates.values())

    def multiplicity(self, observable: str) -> int:
        return len(self.estimates[observable])


def _require_full_setting_set(data: ExperimentRecord) -> None:
    if data.n_qubits != 2:
        raise AnalysisError("two-qubit analysis needs a two-qubit record")
    if sorted(data.settings()) != sorted(SETTING_LABELS):
        raise AnalysisError(f"expected each of the 9 settings once, got {data.settings()}")


def multiplicity_table(data: ExperimentRecord) -> MultiplicityTable:
    _require_full_setting_set(data)
    estimates: dict[str, list[ObservableEstimate]] = {}
    for block in data.blocks:
        for observable, value in empirical_averages(block).values.items():
            estimates.setdefault(observable, []).append(
                ObservableEstimate(setting=block.setting.label, value=value, shots=block.total)
            )
    return MultiplicityTable(estimates={label: tuple(values) for label, values in estimates.items()})


class ScanEntry(BaseModel):
    model_config = ConfigDict(frozen=True)

    observable: str
    z: float
    settings: tuple[str, str]


def pair_z_score(m1: float, n1: int, m2: float, n2: int) -> float:
    """|m1 - m2| over the plug-in binomial standard error of the difference."""
    variance = (1 - m1 * m1) / n1 + (1 - m2 * m2) / n2
    if variance == 0.0:
        return 0.0 if m1 == m2 else math.inf
    return abs(m1 - m2) / math.sqrt(variance)


def inconsistency_scan(t: MultiplicityTable, shots: int | None = None) -> list[ScanEntry]:
    """Largest pairwise z-score of every repeatedly estimated observable, highest first.

    ``shots`` overrides the per-estimate shot counts when given.
    """
    entries = []
    for observable, estimates in t.estimates.items():
        if len(estimates) < 2:
            continue
        worst: ScanEntry | None = None
        for first, second in itertools.combinations(estimates, 2):
            z = pair_z_score(first.value, shots or first.shots, second.value, shots or second.shots)
            if worst is None or z > worst.z:
                worst = ScanEntry(observable=observable, z=z, settings=(first.setting, second.setting))
        entries.append(worst)
    entries.sort(key=lambda entry: -entry.z)
    if entries:
        log.info("Least consistent repeated estimate: %s (z=%.2f)", entries[0].observable, entries[0].z)
    return entries


def joint_mle(data: ExperimentRecord, options: MleOptions | None = None) -> MleResult:
    """Single 4x4 state maximizing the likelihood of all nine settings."""
    _require_full_setting_set(data)
    return maximize_likelihood(list(data.blocks), 2, options)


def build_alternative_models(
    scan: list[ScanEntry],
    data: ExperimentRecord,
    top: int = 3,
    z_threshold: float = 3.0,
) -> list[ModelSpec]:
    """Standard and per-setting models plus one ``free:<obs>`` model per flagged observable.

    An observable is flagged when its scan z-score reaches ``z_threshold``; at most
    ``top`` of them are used.
    """
    n_blocks = len(data.blocks)
    models = [ModelSpec.standard(n_blocks), ModelSpec.per_setting(data)]
    flagged = [entry for entry in scan if entry.z >= z_threshold][:top]
    for entry in flagged:
        models.append(ModelSpec.free_observable(data, entry.observable))
    return models
