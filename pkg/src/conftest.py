import pytest

from src.likelihood import ExperimentRecord
from src.testing import qubit_record


@pytest.fixture
def interior_record() -> ExperimentRecord:
    # averages (0.3, -0.2, 0.1), R < 1
    return qubit_record(("X", 65, 35), ("Y", 40, 60), ("Z", 55, 45))


@pytest.fixture
def extreme_record() -> ExperimentRecord:
    # every outcome +1: averages (1, 1, 1), R = sqrt(3)
    return qubit_record(("X", 100, 0), ("Y", 100, 0), ("Z", 100, 0))
