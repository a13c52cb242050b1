"""Record builders shared by the unit and acceptance tests."""

from src.likelihood import BlockData, ExperimentRecord
from src.qstate import MeasurementSetting


def qubit_record(*blocks: tuple[str, int, int]) -> ExperimentRecord:
    """Single-qubit record from (axis, n_plus, n_minus) triples."""
    return ExperimentRecord(
        n_qubits=1,
        blocks=tuple(
            BlockData(order_index=i, setting=MeasurementSetting.parse(axis), counts={"+": plus, "-": minus})
            for i, (axis, plus, minus) in enumerate(blocks)
        ),
    )
