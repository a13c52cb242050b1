"""Density-matrix and Bloch-vector algebra for one and two qubits.

Pauli convention: sigma_y = [[0, -i], [i, 0]]. With this convention the inverse
Bloch map of (1, 1, 1) has (1 - i)/2 in its top-right entry.
"""

import itertools
import logging
from functools import reduce
from typing import Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, field_validator, model_validator

from src.errors import DimensionMismatchError, StateError

log = logging.getLogger(__name__)

HERMITIAN_TOL = 1e-12
TRACE_TOL = 1e-12
EIGEN_TOL = 1e-10
PHYSICAL_TOL = 1e-12

Axis = Literal["X", "Y", "Z"]
AXES: tuple[Axis, ...] = ("X", "Y", "Z")

PAULI: dict[str, np.ndarray] = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


class BlochVector(BaseModel):
    """Expectation values of sigma_x, sigma_y, sigma_z (possibly unphysical)."""

    model_config = ConfigDict(frozen=True)

    x: float = 0.0
    y: float = 0.0
    z: float = 0.0

    @field_validator("x", "y", "z")
    @classmethod
    def _within_unit_interval(cls, value: float) -> float:
        if not -1.0 - PHYSICAL_TOL <= value <= 1.0 + PHYSICAL_TOL:
            raise ValueError(f"Bloch component {value} outside [-1, 1]")
        return value

    @classmethod
    def from_array(cls, values: np.ndarray | list[float]) -> "BlochVector":
        x, y, z = (float(v) for v in values)
        return cls(x=x, y=y, z=z)

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z])

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.as_array()))

    @property
    def is_physical(self) -> bool:
        return self.x**2 + self.y**2 + self.z**2 <= 1.0 + PHYSICAL_TOL


class MeasurementSetting(BaseModel):
    """One Pauli axis per qubit; outcomes are sign strings such as "+-"."""

    model_config = ConfigDict(frozen=True)

    axes: tuple[Axis, ...]

    @field_validator("axes")
    @classmethod
    def _one_or_two_qubits(cls, value: tuple[Axis, ...]) -> tuple[Axis, ...]:
        if len(value) not in (1, 2):
            raise ValueError(f"settings cover 1 or 2 qubits, got {len(value)} axes")
        return value

    @classmethod
    def parse(cls, label: str) -> "MeasurementSetting":
        """Build a setting from a label such as ``"X"`` or ``"XY"``."""
        return cls(axes=tuple(label.upper()))

    @property
    def n_qubits(self) -> int:
        return len(self.axes)

    @property
    def label(self) -> str:
        return "".join(self.axes)

    @property
    def outcomes(self) -> list[str]:
        return ["".join(signs) for signs in itertools.product("+-", repeat=self.n_qubits)]

    def observables(self) -> list[str]:
        """Pauli labels whose averages this setting determines.

        Two-qubit order is (correlator, marginal A, marginal B).
        """
        if self.n_qubits == 1:
            return [self.axes[0]]
        a, b = self.axes
        return [a + b, a + "I", "I" + b]

    def outcome_sign(self, outcome: str, observable: str) -> int:
        """Eigenvalue of ``observable`` on the eigenvector labelled ``outcome``."""
        sign = 1
        for char, symbol in zip(observable, outcome):
            if char != "I" and symbol == "-":
                sign = -sign
        return sign


class _HermitianMatrix(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    matrix: np.ndarray

    @field_validator("matrix", mode="before")
    @classmethod
    def _hermitian_trace_one(cls, value: object) -> np.ndarray:
        array = np.array(value, dtype=complex)
        if array.ndim != 2 or array.shape[0] != array.shape[1] or array.shape[0] not in (2, 4):
            raise ValueError(f"expected a 2x2 or 4x4 matrix, got shape {array.shape}")
        if np.linalg.norm(array - array.conj().T) > HERMITIAN_TOL:
            raise ValueError("matrix is not Hermitian")
        if abs(np.trace(array) - 1.0) > TRACE_TOL:
            raise ValueError(f"trace is {np.trace(array).real:.15g}, expected 1")
        array = (array + array.conj().T) / 2
        array.setflags(write=False)
        return array

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, type(self)):
            return NotImplemented
        return bool(np.array_equal(self.matrix, other.matrix))

    def __hash__(self) -> int:
        return hash(self.matrix.tobytes())

    @property
    def dim(self) -> int:
        return int(self.matrix.shape[0])

    @property
    def n_qubits(self) -> int:
        return 1 if self.dim == 2 else 2

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.matrix)


class LinearInversionMatrix(_HermitianMatrix):
    """Hermitian trace-one matrix matching observed averages; may be indefinite."""


class DensityMatrix(_HermitianMatrix):
    """Physical state: Hermitian, trace one, eigenvalues >= -1e-10."""

    @model_validator(mode="after")
    def _positive_semidefinite(self) -> "DensityMatrix":
        smallest = float(np.linalg.eigvalsh(self.matrix)[0])
        if smallest < -EIGEN_TOL:
            raise ValueError(f"matrix has negative eigenvalue {smallest:.3g}")
        return self

    @classmethod
    def maximally_mixed(cls, n_qubits: int) -> "DensityMatrix":
        dim = 2**n_qubits
        return cls(matrix=np.eye(dim, dtype=complex) / dim)


def pauli_labels(n_qubits: int) -> list[str]:
    """Non-identity Pauli strings, qubit A first (``"XI"`` is sigma_x on A)."""
    if n_qubits == 1:
        return list(AXES)
    if n_qubits != 2:
        raise DimensionMismatchError(2, n_qubits, "qubit count")
    return ["".join(p) for p in itertools.product("IXYZ", repeat=2) if p != ("I", "I")]


def pauli_operator(label: str) -> np.ndarray:
    return reduce(np.kron, [PAULI[char] for char in label])


def linear_inversion(averages: dict[str, float], n_qubits: int) -> LinearInversionMatrix:
    """Matrix (1 + sum_P <P> P) / d reproducing the given Pauli averages.

    Labels missing from ``averages`` are taken as zero.
    """
    dim = 2**n_qubits
    known = set(pauli_labels(n_qubits))
    unknown = set(averages) - known
    if unknown:
        raise StateError(f"unknown Pauli labels for {n_qubits} qubit(s): {sorted(unknown)}")

    matrix = np.eye(dim, dtype=complex)
    for label, value in averages.items():
        matrix = matrix + value * pauli_operator(label)
    return LinearInversionMatrix(matrix=matrix / dim)


def bloch_to_density(b: BlochVector) -> LinearInversionMatrix:
    return linear_inversion({"X": b.x, "Y": b.y, "Z": b.z}, n_qubits=1)


def state_from_bloch(b: BlochVector) -> DensityMatrix:
    """Physical qubit state with Bloch vector ``b`` (requires |b| <= 1)."""
    if not b.is_physical:
        raise StateError(f"Bloch vector of norm {b.norm:.6g} is not a physical state")
    return DensityMatrix(matrix=bloch_to_density(b).matrix)


def expectation(rho: _HermitianMatrix, label: str) -> float:
    return float(np.trace(rho.matrix @ pauli_operator(label)).real)


def pauli_coefficients(rho: _HermitianMatrix) -> dict[str, float]:
    return {label: expectation(rho, label) for label in pauli_labels(rho.n_qubits)}


def density_to_bloch(rho: _HermitianMatrix) -> BlochVector:
    if rho.dim != 2:
        raise DimensionMismatchError(2, rho.dim)
    return BlochVector(x=expectation(rho, "X"), y=expectation(rho, "Y"), z=expectation(rho, "Z"))


def project_positive_eigenspace(m: LinearInversionMatrix | np.ndarray) -> DensityMatrix:
    """Closest physical state: drop negative eigenvalues and renormalize.

    For a qubit with one negative eigenvalue this is the projector onto the
    positive eigenvector; an already physical input is returned unchanged.
    """
    if isinstance(m, np.ndarray):
        if np.linalg.norm(m - m.conj().T) > HERMITIAN_TOL:
            raise StateError("cannot project a non-Hermitian matrix")
        m = LinearInversionMatrix(matrix=m)

    eigenvalues, eigenvectors = np.linalg.eigh(m.matrix)
    if eigenvalues[0] >= -EIGEN_TOL:
        return DensityMatrix(matrix=m.matrix)

    clipped = np.clip(eigenvalues, 0.0, None)
    log.debug("Truncating %d negative eigenvalue(s)", int(np.sum(eigenvalues < 0)))
    projected = (eigenvectors * (clipped / clipped.sum())) @ eigenvectors.conj().T
    return DensityMatrix(matrix=projected)


def measurement_projectors(setting: MeasurementSetting) -> dict[str, np.ndarray]:
    projectors = {}
    for outcome in setting.outcomes:
        factors = [
            (PAULI["I"] + (1 if symbol == "+" else -1) * PAULI[axis]) / 2
            for axis, symbol in zip(setting.axes, outcome)
        ]
        projectors[outcome] = reduce(np.kron, factors)
    return projectors


def born_probabilities(rho: DensityMatrix, s: MeasurementSetting) -> dict[str, float]:
    if rho.n_qubits != s.n_qubits:
        raise DimensionMismatchError(rho.n_qubits, s.n_qubits, "qubit count")
    return {
        outcome: max(float(np.trace(rho.matrix @ projector).real), 0.0)
        for outcome, projector in measurement_projectors(s).items()
    }


def purity(rho: DensityMatrix) -> float:
    return float(np.trace(rho.matrix @ rho.matrix).real)


def trace_distance(a: _HermitianMatrix, b: _HermitianMatrix) -> float:
    if a.dim != b.dim:
        raise DimensionMismatchError(a.dim, b.dim)
    return float(0.5 * np.abs(np.linalg.eigvalsh(a.matrix - b.matrix)).sum())


def numerical_rank(rho: DensityMatrix, threshold: float = 1e-8) -> int:
    return int(np.sum(rho.eigenvalues() > threshold))
