"""Exception hierarchy for tomoguard."""


class TomoguardError(Exception):
    """Base exception for all tomoguard errors."""


class ConfigError(TomoguardError):
    """Invalid configuration or command-line option combination."""


class DataFormatError(TomoguardError):
    """An experiment or report file does not match its schema."""


class StateError(TomoguardError):
    """Invalid density matrix, Bloch vector or linear-inversion matrix."""


class DimensionMismatchError(StateError):
    """State, setting or record disagree on the number of qubits."""

    def __init__(self, expected: int, actual: int, what: str = "dimension") -> None:
        self.expected = expected
        self.actual = actual
        super().__init__(f"{what} mismatch: expected {expected}, got {actual}")


class AnalysisError(TomoguardError):
    """The analysis cannot proceed on the given data."""


class ModelError(AnalysisError):
    """Failure tied to a named candidate model."""

    def __init__(self, model: str, message: str) -> None:
        self.model = model
        super().__init__(f"{model}: {message}")


class ImpossibleDataError(AnalysisError):
    """An observed outcome has zero probability under the evaluated state."""

    def __init__(self, outcome: str, count: int) -> None:
        self.outcome = outcome
        self.count = count
        super().__init__(f"outcome {outcome!r} observed {count} times but has probability 0")
