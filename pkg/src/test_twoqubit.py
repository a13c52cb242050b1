import logging

import numpy as np
import pytest

from src.config import MleOptions
from src.errors import AnalysisError, DimensionMismatchError
from src.likelihood import BlockData, ExperimentRecord, blocks_loglik
from src.models import fit_model
from src.models.spec import ModelSpec
from src.qstate import BlochVector, DensityMatrix, MeasurementSetting, bloch_to_density, born_probabilities
from src.twoqubit import (
    SETTING_LABELS,
    MultiplicityTable,
    ObservableEstimate,
    ScanEntry,
    TwoQubitAverages,
    build_alternative_models,
    enumerate_settings,
    inconsistency_scan,
    joint_mle,
    multiplicity_table,
    per_setting_averages,
)


def pair_block(label: str, counts: tuple[int, int, int, int], index: int = 0) -> BlockData:
    return BlockData(
        order_index=index,
        setting=MeasurementSetting.parse(label),
        counts=dict(zip(("++", "+-", "-+", "--"), counts)),
    )


def expected_count_record(state: DensityMatrix, shots: int) -> ExperimentRecord:
    """Nine settings with counts equal to shots times the Born probabilities."""
    blocks = []
    for index, setting in enumerate(enumerate_settings()):
        probabilities = born_probabilities(state, setting)
        counts = {outcome: round(shots * probabilities[outcome]) for outcome in setting.outcomes}
        blocks.append(BlockData(order_index=index, setting=setting, counts=counts))
    return ExperimentRecord(n_qubits=2, blocks=tuple(blocks))


@pytest.fixture
def product_state() -> DensityMatrix:
    a = bloch_to_density(BlochVector(x=0.2)).matrix
    b = bloch_to_density(BlochVector(z=0.4)).matrix
    return DensityMatrix(matrix=np.kron(a, b))


def test_enumerate_settings() -> None:
    settings = enumerate_settings()
    assert len(settings) == 9
    assert settings[0].axes == ("X", "X")
    assert settings[-1].axes == ("Z", "Z")
    assert [s.label for s in settings] == list(SETTING_LABELS)


@pytest.mark.parametrize(
    "counts,expected",
    [((100, 0, 0, 0), (1, 1, 1)), ((25, 25, 25, 25), (0, 0, 0)), ((40, 10, 10, 40), (0.6, 0, 0))],
)
def test_per_setting_averages(counts: tuple[int, int, int, int], expected: tuple[float, float, float]) -> None:
    averages = per_setting_averages(pair_block("XY", counts))
    assert (averages.correlator, averages.marginal_a, averages.marginal_b) == pytest.approx(expected)


def test_per_setting_averages_recover_frequencies() -> None:
    counts = (31, 7, 12, 50)
    a = per_setting_averages(pair_block("YZ", counts))
    n = sum(counts)
    signs = {"++": (1, 1), "+-": (1, -1), "-+": (-1, 1), "--": (-1, -1)}
    for (outcome, (sa, sb)), observed in zip(signs.items(), counts):
        frequency = (1 + sa * a.marginal_a + sb * a.marginal_b + sa * sb * a.correlator) / 4
        assert frequency == pytest.approx(observed / n, abs=1e-12)


def test_per_setting_averages_reject_single_qubit_block() -> None:
    block = BlockData(order_index=0, setting=MeasurementSetting.parse("X"), counts={"+": 1})
    with pytest.raises(DimensionMismatchError):
        per_setting_averages(block)


def test_multiplicity_table(product_state: DensityMatrix) -> None:
    table = multiplicity_table(expected_count_record(product_state, 100))
    multiplicities = sorted(table.multiplicity(label) for label in table.estimates)
    assert multiplicities == [1] * 9 + [3] * 6
    assert table.total_estimates == 27
    assert [e.setting for e in table.estimates["XI"]] == ["XX", "XY", "XZ"]


def test_multiplicity_table_rejects_wrong_settings(product_state: DensityMatrix) -> None:
    record = expected_count_record(product_state, 100)
    partial = ExperimentRecord(n_qubits=2, blocks=record.blocks[:8])
    with pytest.raises(AnalysisError):
        multiplicity_table(partial)


def test_averages_addressable_by_setting_and_observable(product_state: DensityMatrix) -> None:
    averages = TwoQubitAverages.from_record(expected_count_record(product_state, 100))
    assert averages.get("XZ", "XI") == pytest.approx(0.2)
    assert averages.get("XZ", "IZ") == pytest.approx(0.4)
    assert averages.get("XZ", "XZ") == pytest.approx(0.08)
    with pytest.raises(KeyError):
        averages.get("XZ", "YI")


def _table_with_xi(values: tuple[float, float, float], shots: int = 500) -> MultiplicityTable:
    estimates: dict[str, tuple[ObservableEstimate, ...]] = {}
    for setting in SETTING_LABELS:
        a, b = setting
        estimates[a + b] = (ObservableEstimate(setting=setting, value=0.0, shots=shots),)
    for axis in "XYZ":
        estimates[axis + "I"] = tuple(
            ObservableEstimate(setting=axis + b, value=0.0, shots=shots) for b in "XYZ"
        )
        estimates["I" + axis] = tuple(
            ObservableEstimate(setting=a + axis, value=0.0, shots=shots) for a in "XYZ"
        )
    estimates["XI"] = tuple(
        ObservableEstimate(setting="X" + b, value=v, shots=shots) for b, v in zip("XYZ", values)
    )
    return MultiplicityTable(estimates=estimates)


def test_scan_of_identical_estimates_is_zero() -> None:
    scan = inconsistency_scan(_table_with_xi((0.0, 0.0, 0.0)))
    assert len(scan) == 6
    assert all(entry.z == 0.0 for entry in scan)


def test_scan_ranks_disagreeing_observable_first() -> None:
    scan = inconsistency_scan(_table_with_xi((0.2, -0.2, 0.1)))
    assert scan[0].observable == "XI"
    assert scan[0].z == pytest.approx(0.4 / np.sqrt(2 * 0.96 / 500), rel=1e-12)
    assert scan[0].z == pytest.approx(6.45, abs=0.01)
    assert set(scan[0].settings) == {"XX", "XY"}


def test_joint_mle_reaches_the_generating_state(product_state: DensityMatrix) -> None:
    record = expected_count_record(product_state, 100)
    result = joint_mle(record)
    assert result.converged
    assert all(b >= a for a, b in zip(result.lnl_trace, result.lnl_trace[1:]))
    assert result.lnl >= blocks_loglik(record.blocks, product_state) - 1e-8


def test_joint_mle_flags_contrived_inconsistent_data() -> None:
    blocks = tuple(
        BlockData(order_index=i, setting=setting, counts={"++": 200})
        for i, setting in enumerate(enumerate_settings())
    )
    result = joint_mle(ExperimentRecord(n_qubits=2, blocks=blocks))
    assert result.rank_deficient


def test_joint_mle_reports_the_iteration_cap(caplog: pytest.LogCaptureFixture) -> None:
    blocks = tuple(
        BlockData(order_index=i, setting=setting, counts={"++": 200})
        for i, setting in enumerate(enumerate_settings())
    )
    with caplog.at_level(logging.WARNING, logger="src.optimize"):
        result = joint_mle(ExperimentRecord(n_qubits=2, blocks=blocks), MleOptions(max_iterations=3))
    assert not result.converged
    assert result.iterations == 3
    assert len(result.lnl_trace) == 4
    assert result.lnl == max(result.lnl_trace)
    assert "did not converge in 3 iterations" in caplog.text


def test_per_setting_model_fits_perfectly(product_state: DensityMatrix) -> None:
    record = expected_count_record(product_state, 100)
    per_setting = fit_model(ModelSpec.per_setting(record), record)
    standard = fit_model(ModelSpec.standard(9), record)
    assert per_setting.k == 27
    assert standard.lnl <= per_setting.lnl + 1e-9


def test_build_alternative_models(product_state: DensityMatrix) -> None:
    record = expected_count_record(product_state, 100)
    assert [m.name for m in build_alternative_models([], record)] == ["standard", "per-setting"]

    scan = [ScanEntry(observable="XI", z=4.2, settings=("XX", "XZ")), ScanEntry(observable="IY", z=1.0, settings=("XY", "YY"))]
    models = build_alternative_models(scan, record)
    assert [m.name for m in models] == ["standard", "per-setting", "free:XI"]
    free = models[-1]
    assert len(free.groups) == 3
    assert len(free.shared) == 14
    assert "XI" not in free.shared
