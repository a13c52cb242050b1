"""End-to-end behaviour over many random or simulated experiments.

Run with ``pytest -m slow``; the power runs take a minute or two.
"""

import math
from collections.abc import Iterator
from pathlib import Path

import numpy as np
import pytest

from src.config import MleOptions
from src.testing import qubit_record
from src.likelihood import binary_entropy, multinomial_loglik
from src.main import EXIT_OK, main
from src.models import ModelSpec, fit_model, rank_models
from src.models.spec import Verdict
from src.qstate import DensityMatrix, MeasurementSetting, born_probabilities, state_from_bloch, trace_distance
from src.qubit_analytic import (
    QubitSummary,
    analytic_omegas,
    approximate_standard_bloch,
    consistency_threshold,
    delta_aic_exact,
    delta_aic_taylor,
)
from src.simulator import Schedule, SourceConfig, monte_carlo_power, run_iid_experiment
from src.twoqubit import SETTING_LABELS, joint_mle

pytestmark = pytest.mark.slow

POWER_TRIALS = 500
POWER_MODELS = ["standard", "mask:Z@2"]
# sqrt(3000) * sigma >= pi over the default 3000-shot run
DRIFT_SIGMA = 0.1


def oracle_delta(s: QubitSummary) -> float:
    state = state_from_bloch(approximate_standard_bloch(s))
    lnl_s = lnl_a = 0.0
    for axis, m in zip("XYZ", s.averages):
        counts = {"+": s.n * (1 + m) / 2, "-": s.n * (1 - m) / 2}
        lnl_s += multinomial_loglik(counts, born_probabilities(state, MeasurementSetting.parse(axis)))
        lnl_a += -s.n * binary_entropy((1 + m) / 2)
    return 1 + lnl_s - lnl_a


def random_summaries(
    rng: np.random.Generator, count: int, r_low: float, r_high: float, bound: float
) -> Iterator[QubitSummary]:
    produced = 0
    while produced < count:
        direction = rng.normal(size=3)
        averages = direction / np.linalg.norm(direction) * rng.uniform(r_low, r_high)
        if np.any(np.abs(averages) > bound):
            continue
        produced += 1
        yield QubitSummary(x=averages[0], y=averages[1], z=averages[2], n=int(rng.integers(10, 10_001)))


def random_state(rng: np.random.Generator, dim: int) -> DensityMatrix:
    g = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    rho = g @ g.conj().T
    return DensityMatrix(matrix=rho / np.trace(rho).real)


def test_closed_form_matches_likelihood_oracle() -> None:
    rng = np.random.default_rng(2024)
    for s in random_summaries(rng, 1000, 1.0 + 1e-6, 1.8, 0.95):
        assert delta_aic_exact(s) == pytest.approx(oracle_delta(s), abs=1e-9)


def test_quadratic_form_near_the_sphere() -> None:
    rng = np.random.default_rng(7)
    for s in random_summaries(rng, 1000, 1.0 + 1e-4, 1.01, 0.7):
        exact_term = delta_aic_exact(s) - 1
        taylor_term = delta_aic_taylor(s) - 1
        assert abs(taylor_term - exact_term) <= 0.05 * abs(exact_term)


def test_quadratic_sign_matches_threshold_on_a_grid() -> None:
    rng = np.random.default_rng(99)
    checked = 0
    for s in random_summaries(rng, 10_000, 1.0 + 1e-6, 1.1, 0.999):
        consistent = (s.r - 1) <= consistency_threshold(s.x, s.y, s.z) / math.sqrt(s.n)
        assert (delta_aic_taylor(s) >= 0) == consistent
        checked += 1
    assert checked == 10_000


def test_inside_the_ball_standard_ties_the_alternative() -> None:
    rng = np.random.default_rng(31)
    checked = 0
    while checked < 200:
        n = int(rng.integers(5, 400))
        plus = rng.integers(0, n + 1, size=3)
        averages = (2 * plus - n) / n
        if averages @ averages > 1:
            continue
        record = qubit_record(*((axis, int(p), n - int(p)) for axis, p in zip("XYZ", plus)))
        standard = fit_model(ModelSpec.standard(3), record)
        per_block = fit_model(ModelSpec.per_block(3), record)
        assert abs(standard.omega - per_block.omega) <= 1e-9
        assert rank_models([standard, per_block]).verdict is Verdict.CONSISTENT
        assert analytic_omegas(QubitSummary.from_record(record)).delta == 0.0
        checked += 1


def test_no_drift_mostly_keeps_the_standard_model() -> None:
    estimate = monte_carlo_power(
        SourceConfig(p=0.9, sigma_step=0.0, seed=1), Schedule.six_block_default(), POWER_MODELS, POWER_TRIALS
    )
    assert 1 - estimate.fraction >= 0.75


def test_strong_drift_is_detected() -> None:
    assert math.sqrt(3000) * DRIFT_SIGMA >= math.pi
    estimate = monte_carlo_power(
        SourceConfig(p=0.9, sigma_step=DRIFT_SIGMA, seed=2), Schedule.six_block_default(), POWER_MODELS, POWER_TRIALS
    )
    assert estimate.fraction >= 0.90


def test_two_qubit_mle_is_monotone_on_random_data() -> None:
    rng = np.random.default_rng(5)
    options = MleOptions(max_iterations=5000)
    for trial in range(100):
        record = run_iid_experiment(random_state(rng, 4), Schedule.two_qubit_default(), seed=trial)
        trace = joint_mle(record, options).lnl_trace
        assert all(later >= earlier - 1e-9 for earlier, later in zip(trace, trace[1:]))


def test_two_qubit_mle_recovers_the_maximally_mixed_state() -> None:
    schedule = Schedule.from_descriptor(",".join(f"{label}:100000" for label in SETTING_LABELS))
    mixed = DensityMatrix.maximally_mixed(2)
    result = joint_mle(run_iid_experiment(mixed, schedule, seed=3))
    assert trace_distance(result.state, mixed) <= 0.02


def test_two_qubit_iid_data_keeps_the_gap_moderate() -> None:
    record = run_iid_experiment(random_state(np.random.default_rng(17), 4), Schedule.two_qubit_default(), seed=17)
    standard = fit_model(ModelSpec.standard(9), record)
    per_setting = fit_model(ModelSpec.per_setting(record), record)
    assert standard.lnl <= per_setting.lnl + 1e-9
    assert per_setting.lnl - standard.lnl < 30


def test_simulation_and_report_are_reproducible(tmp_path: Path) -> None:
    outputs = []
    for run in ("a", "b"):
        record = tmp_path / f"{run}.json"
        report = tmp_path / f"{run}-report.json"
        args = ["simulate", "--seed", "123", "--drift-sigma", "0.05", "--out", str(record)]
        assert main(args) == EXIT_OK
        models = "standard;per-block;mask:Z@2"
        assert main(["analyze", "--in", str(record), "--models", models, "--report", str(report)]) == EXIT_OK
        outputs.append((record.read_bytes(), report.read_bytes()))
    assert outputs[0] == outputs[1]
