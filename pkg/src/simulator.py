"""Synthetic experiments from a drifting source, plus i.i.d. controls.

The source emits p|psi_phi><psi_phi| + (1 - p) I/2 with <sigma_x> = p cos(phi),
<sigma_y> = p sin(phi), and phi performs a Gaussian random walk from shot to
shot. Two-qubit experiments use the product of two copies of that state.
"""

import logging
import math
from collections.abc import Sequence
from concurrent.futures import ProcessPoolExecutor
from enum import StrEnum

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from src.catalog import resolve_models
from src.errors import ConfigError, DimensionMismatchError, ImpossibleDataError
from src.likelihood import BlockData, ExperimentRecord, RecordMetadata
from src.models import Verdict, fit_model, rank_models
from src.qstate import AXES, BlochVector, DensityMatrix, MeasurementSetting, born_probabilities, state_from_bloch

log = logging.getLogger(__name__)

DEFAULT_SHOTS = 500
DEFAULT_P = 0.9


class SourceConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    p: float = Field(default=DEFAULT_P, ge=0.0, le=1.0)
    phi0: float = 0.0
    sigma_step: float = Field(default=0.0, ge=0.0)
    seed: int = Field(default=0, ge=0, lt=2**64)


class ScheduleOrdering(StrEnum):
    BLOCKED = "blocked"
    RANDOMIZED = "randomized"


class ScheduledBlock(BaseModel):
    model_config = ConfigDict(frozen=True)

    setting: MeasurementSetting
    shots: int = Field(ge=1)

    @field_validator("setting", mode="before")
    @classmethod
    def _setting_from_label(cls, value: object) -> object:
        if isinstance(value, str):
            return MeasurementSetting.parse(value)
        return value


class Schedule(BaseModel):
    """Ordered blocks of (setting, shots)."""

    model_config = ConfigDict(frozen=True)

    blocks: tuple[ScheduledBlock, ...]
    ordering: ScheduleOrdering = ScheduleOrdering.BLOCKED

    @model_validator(mode="after")
    def _uniform_qubit_count(self) -> "Schedule":
        if not self.blocks:
            raise ValueError("a schedule needs at least one block")
        if len({block.setting.n_qubits for block in self.blocks}) != 1:
            raise ValueError("all blocks must measure the same number of qubits")
        return self

    @classmethod
    def six_block_default(cls, ordering: ScheduleOrdering = ScheduleOrdering.BLOCKED) -> "Schedule":
        """Six blocks of 500 shots: X, Y, Z, X, Y, Z."""
        return cls(
            blocks=tuple(ScheduledBlock(setting=axis, shots=DEFAULT_SHOTS) for axis in AXES * 2),
            ordering=ordering,
        )

    @classmethod
    def two_qubit_default(cls, ordering: ScheduleOrdering = ScheduleOrdering.BLOCKED) -> "Schedule":
        """The nine local Pauli settings, XX first, 500 shots each."""
        pairs = [a + b for a in AXES for b in AXES]
        return cls(blocks=tuple(ScheduledBlock(setting=pair, shots=DEFAULT_SHOTS) for pair in pairs), ordering=ordering)

    @classmethod
    def from_descriptor(cls, text: str, ordering: ScheduleOrdering = ScheduleOrdering.BLOCKED) -> "Schedule":
        """Parse ``"X:500,Y:500,Z:500"``; two-qubit settings read ``"XY:500"``."""
        blocks = []
        for item in text.split(","):
            label, _, shots = item.strip().partition(":")
            if not label or not shots.strip().isdigit():
                raise ConfigError(f"malformed block {item!r}, expected SETTING:SHOTS")
            try:
                blocks.append(ScheduledBlock(setting=label, shots=int(shots)))
            except ValueError as exc:
                raise ConfigError(f"invalid block {item!r}: {exc}") from exc
        try:
            return cls(blocks=tuple(blocks), ordering=ordering)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    @property
    def n_qubits(self) -> int:
        return self.blocks[0].setting.n_qubits

    @property
    def total_shots(self) -> int:
        return sum(block.shots for block in self.blocks)


class DriftTrajectory(BaseModel):
    """Source angle phi_k for every shot, in time order."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    phi: np.ndarray

    def __len__(self) -> int:
        return len(self.phi)

    @property
    def increments(self) -> np.ndarray:
        return np.diff(self.phi)


def source_state(phi: float, p: float) -> DensityMatrix:
    if not 0.0 <= p <= 1.0:
        raise ConfigError(f"depolarization weight {p} outside [0, 1]")
    return state_from_bloch(BlochVector(x=p * math.cos(phi), y=p * math.sin(phi), z=0.0))


def _streams(seed: int) -> tuple[np.random.Generator, np.random.Generator, np.random.Generator]:
    """Independent generators for the walk, the outcomes and the shot order."""
    walk, outcomes, order = np.random.SeedSequence(seed).spawn(3)
    return np.random.default_rng(walk), np.random.default_rng(outcomes), np.random.default_rng(order)


def drift_walk(cfg: SourceConfig, n_shots: int) -> DriftTrajectory:
    if n_shots < 1:
        raise ConfigError("a trajectory needs at least one shot")
    rng, _, _ = _streams(cfg.seed)
    steps = rng.normal(0.0, cfg.sigma_step, n_shots - 1)
    phi = cfg.phi0 + np.concatenate([[0.0], np.cumsum(steps)])
    return DriftTrajectory(phi=phi)


def run_experiment(cfg: SourceConfig, sched: Schedule) -> ExperimentRecord:
    """Sample every shot from the source at its own time and count outcomes per block.

    In randomized order the settings are permuted across shots while the source
    keeps drifting in time order.
    """
    trajectory = drift_walk(cfg, sched.total_shots)
    _, outcome_rng, order_rng = _streams(cfg.seed)

    block_of_shot = np.repeat(np.arange(len(sched.blocks)), [block.shots for block in sched.blocks])
    if sched.ordering is ScheduleOrdering.RANDOMIZED:
        block_of_shot = order_rng.permutation(block_of_shot)

    # per-shot Bloch vector of one copy of the source
    bloch = cfg.p * np.stack([np.cos(trajectory.phi), np.sin(trajectory.phi), np.zeros(len(trajectory))], axis=1)
    axes = np.array([[AXES.index(axis) for axis in block.setting.axes] for block in sched.blocks])
    shot_axes = axes[block_of_shot]
    p_plus = (1 + np.take_along_axis(bloch, shot_axes, axis=1)) / 2
    minus = outcome_rng.random(p_plus.shape) >= p_plus

    n_qubits = sched.n_qubits
    n_outcomes = 2**n_qubits
    outcome_index = minus @ (2 ** np.arange(n_qubits - 1, -1, -1))
    counts = np.bincount(
        block_of_shot * n_outcomes + outcome_index, minlength=len(sched.blocks) * n_outcomes
    ).reshape(len(sched.blocks), n_outcomes)

    blocks = tuple(
        BlockData(
            order_index=index,
            setting=block.setting,
            counts=dict(zip(block.setting.outcomes, (int(n) for n in counts[index]))),
        )
        for index, block in enumerate(sched.blocks)
    )
    log.info(
        "Simulated %d shots in %d blocks (p=%.3f, sigma=%.4g, %s)",
        sched.total_shots, len(blocks), cfg.p, cfg.sigma_step, sched.ordering.value,
    )
    return ExperimentRecord(
        n_qubits=n_qubits,
        blocks=blocks,
        metadata=RecordMetadata(
            seed=cfg.seed,
            schedule=sched.ordering.value,
            p=cfg.p,
            drift_sigma=cfg.sigma_step,
            phi0=cfg.phi0,
        ),
    )


def run_iid_experiment(state: DensityMatrix, sched: Schedule, seed: int) -> ExperimentRecord:
    """Independent shots from one fixed state; block order does not matter."""
    if state.n_qubits != sched.n_qubits:
        raise DimensionMismatchError(state.n_qubits, sched.n_qubits, "qubit count")
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    blocks = []
    for index, block in enumerate(sched.blocks):
        probabilities = born_probabilities(state, block.setting)
        weights = np.array([probabilities[outcome] for outcome in block.setting.outcomes])
        drawn = rng.multinomial(block.shots, weights / weights.sum())
        blocks.append(
            BlockData(
                order_index=index,
                setting=block.setting,
                counts=dict(zip(block.setting.outcomes, (int(n) for n in drawn))),
            )
        )
    return ExperimentRecord(
        n_qubits=sched.n_qubits,
        blocks=tuple(blocks),
        metadata=RecordMetadata(seed=seed, schedule=sched.ordering.value, notes="i.i.d. control"),
    )


def extreme_drift_record(shots: int, mixing: float = 0.0) -> ExperimentRecord:
    """X, Y and Z blocks measured on the +1 eigenstate of their own axis.

    Each block state is mixed with I/2 at weight ``mixing``. Counts are the
    expected values rounded to integers, so the record is deterministic.
    """
    if shots < 1:
        raise ConfigError("blocks need at least one shot")
    if not 0.0 <= mixing <= 1.0:
        raise ConfigError(f"mixing weight {mixing} outside [0, 1]")
    n_plus = round(shots * (2 - mixing) / 2)
    blocks = tuple(
        BlockData(order_index=index, setting=MeasurementSetting.parse(axis), counts={"+": n_plus, "-": shots - n_plus})
        for index, axis in enumerate(AXES)
    )
    return ExperimentRecord(
        n_qubits=1,
        blocks=blocks,
        metadata=RecordMetadata(notes=f"eigenstate of each measured axis, mixing {mixing}"),
    )


class PowerEstimate(BaseModel):
    """Fraction of trials whose verdict was INCONSISTENT."""

    model_config = ConfigDict(frozen=True)

    trials: int = Field(ge=1)
    detections: int = Field(ge=0)

    @property
    def fraction(self) -> float:
        return self.detections / self.trials

    @property
    def standard_error(self) -> float:
        f = self.fraction
        return math.sqrt(f * (1 - f) / self.trials)


def trial_seed(master: int, trial: int) -> int:
    """Sub-seed of one trial, derived from the master seed and the trial counter."""
    state = np.random.SeedSequence(master, spawn_key=(trial,)).generate_state(1, np.uint64)
    return int(state[0])


def _detects_failure(cfg: SourceConfig, sched: Schedule, models: tuple[str, ...], corrected: bool) -> bool:
    record = run_experiment(cfg, sched)
    fitted = []
    for spec in resolve_models(models, record):
        try:
            fitted.append(fit_model(spec, record, corrected=corrected))
        except ImpossibleDataError as exc:
            log.warning("Model %s excluded in trial with seed %d: %s", spec.name, cfg.seed, exc)
    return rank_models(fitted).verdict is Verdict.INCONSISTENT


def _run_trial(args: tuple[SourceConfig, Schedule, tuple[str, ...], bool]) -> bool:
    return _detects_failure(*args)


def monte_carlo_power(
    cfg: SourceConfig,
    sched: Schedule,
    models: Sequence[str],
    n_trials: int,
    workers: int = 1,
    corrected: bool = False,
) -> PowerEstimate:
    """Rerun the experiment ``n_trials`` times and count INCONSISTENT verdicts.

    Trial i uses the sub-seed ``trial_seed(cfg.seed, i)``, so results do not
    depend on ``workers``.
    """
    if n_trials < 1:
        raise ConfigError("need at least one trial")
    jobs = [
        (cfg.model_copy(update={"seed": trial_seed(cfg.seed, trial)}), sched, tuple(models), corrected)
        for trial in range(n_trials)
    ]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(_run_trial, jobs, chunksize=max(1, n_trials // (4 * workers))))
    else:
        outcomes = [_run_trial(job) for job in jobs]

    estimate = PowerEstimate(trials=n_trials, detections=sum(outcomes))
    log.info(
        "sigma=%.4g: %d/%d trials INCONSISTENT (%.3f +/- %.3f)",
        cfg.sigma_step, estimate.detections, n_trials, estimate.fraction, estimate.standard_error,
    )
    return estimate
