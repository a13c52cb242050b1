"""Closed-form results for one qubit measured once along each of X, Y and Z.

Every function takes a QubitSummary: the three observed averages and the shot
count N per block. R is the length of the frequency-matching Bloch vector; when
R > 1 no physical state reproduces the data and the standard model pays for it.
"""

import logging
import math

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, computed_field, field_validator
from scipy.special import xlogy

from src.errors import AnalysisError
from src.likelihood import ExperimentRecord, binary_entropy, empirical_averages
from src.optimize import maximize_on_sphere
from src.qstate import AXES, BlochVector, DensityMatrix, density_to_bloch, state_from_bloch

log = logging.getLogger(__name__)

# (R - 1)^2 <= TAYLOR_MARGIN * (1 - M^2) counts as "much smaller"
TAYLOR_MARGIN = 0.1


class QubitSummary(BaseModel):
    """Averages X, Y, Z from three blocks of N shots each."""

    model_config = ConfigDict(frozen=True)

    x: float
    y: float
    z: float
    n: int = Field(ge=1)

    @field_validator("x", "y", "z")
    @classmethod
    def _within_unit_interval(cls, value: float) -> float:
        if not -1.0 <= value <= 1.0:
            raise ValueError(f"average {value} outside [-1, 1]")
        return value

    @computed_field
    @property
    def r(self) -> float:
        return radius(self.x, self.y, self.z)

    @property
    def averages(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z])

    @classmethod
    def from_record(cls, record: ExperimentRecord) -> "QubitSummary":
        """Summary of a single-qubit record with one equal-sized block per axis."""
        if record.n_qubits != 1:
            raise AnalysisError("closed forms cover single-qubit records only")
        if sorted(record.settings()) != list(AXES):
            raise AnalysisError(f"closed forms need one X, Y and Z block each, got {record.settings()}")
        sizes = {block.total for block in record.blocks}
        if len(sizes) != 1:
            raise AnalysisError(f"closed forms need equal block sizes, got {sorted(sizes)}")
        values = {block.setting.label: empirical_averages(block)[block.setting.label] for block in record.blocks}
        return cls(x=values["X"], y=values["Y"], z=values["Z"], n=sizes.pop())


def radius(x: float, y: float, z: float) -> float:
    return math.sqrt(x * x + y * y + z * z)


def summary_loglik(s: QubitSummary, b: BlochVector) -> float:
    """ln L of the three blocks under the state with Bloch vector ``b``."""
    averages = s.averages
    bloch = np.clip(b.as_array(), -1.0, 1.0)
    plus = s.n * (1 + averages) / 2
    minus = s.n * (1 - averages) / 2
    return float(np.sum(xlogy(plus, (1 + bloch) / 2) + xlogy(minus, (1 - bloch) / 2)))


def alternative_loglik(s: QubitSummary) -> float:
    """ln L of the per-block model: -N times the summed binary entropies."""
    return -s.n * sum(binary_entropy((1 + m) / 2) for m in s.averages)


def approximate_standard_bloch(s: QubitSummary) -> BlochVector:
    """(X, Y, Z) inside the ball, (X, Y, Z)/R outside it."""
    r = s.r
    if r <= 1.0:
        return BlochVector(x=s.x, y=s.y, z=s.z)
    return BlochVector.from_array(s.averages / r)


def standard_mle_qubit(s: QubitSummary) -> DensityMatrix:
    """Maximum-likelihood single state for the three blocks.

    Outside the ball the (X, Y, Z)/R guess is refined on the sphere; the
    refinement is kept only if it scores at least as well.
    """
    approximate = approximate_standard_bloch(s)
    if s.r <= 1.0:
        return state_from_bloch(approximate)

    averages = s.averages
    refined = BlochVector.from_array(maximize_on_sphere(s.n * (1 + averages) / 2, s.n * (1 - averages) / 2))
    if summary_loglik(s, refined) >= summary_loglik(s, approximate):
        return state_from_bloch(refined)
    return state_from_bloch(approximate)


def delta_aic_exact(s: QubitSummary) -> float:
    """Omega_s - Omega_a using the (X, Y, Z)/R state for the standard model.

    Zero for R <= 1, where both models fit perfectly with three parameters.
    Otherwise 1 + N * sum_M f(M, R) with f the per-axis log-likelihood gap.
    """
    r = s.r
    if r <= 1.0:
        return 0.0
    return 1.0 + s.n * sum(_axis_gap(m, r) for m in s.averages)


def _axis_gap(m: float, r: float) -> float:
    if abs(m) == 1.0:
        # both divergent logarithms cancel; only the +1 (or -1) outcome remains
        log.debug("Using the |M| = 1 limit at R=%.6f", r)
        return math.log((r + 1) / (2 * r))
    return 0.5 * math.log((1 - m * m / (r * r)) / (1 - m * m)) + 0.5 * m * math.log(
        (r + m) * (1 - m) / ((r - m) * (1 + m))
    )


def _curvature(s: QubitSummary) -> float:
    averages = s.averages
    if np.any(np.abs(averages) == 1.0):
        return math.inf
    return float(np.sum(averages**2 / (2 * (1 - averages**2))))


def delta_aic_taylor(s: QubitSummary) -> float:
    """Quadratic approximation 1 - N (R-1)^2 sum_M M^2 / (2(1 - M^2)).

    Valid for (R-1)^2 much smaller than every 1 - M^2; outside that regime the
    value is still returned but a warning is logged.
    """
    r = s.r
    if r == 1.0:
        return 1.0
    if r < 1.0:
        log.warning("Taylor form evaluated at R=%.6f < 1, where the models tie exactly", r)
    elif np.any((r - 1) ** 2 > TAYLOR_MARGIN * (1 - s.averages**2)):
        log.warning("Taylor form outside its regime: (R-1)^2=%.3g not small against 1-M^2", (r - 1) ** 2)

    curvature = _curvature(s)
    if math.isinf(curvature):
        return -math.inf
    return 1.0 - s.n * (r - 1) ** 2 * curvature


def consistency_threshold(x: float, y: float, z: float) -> float:
    """Constant C with the standard model consistent iff R - 1 <= C / sqrt(N).

    Returns inf when all averages vanish (no constraint) and 0 when one of them
    has magnitude 1.
    """
    curvature = _curvature(QubitSummary(x=x, y=y, z=z, n=1))
    if curvature == 0.0:
        log.debug("All averages are zero; the threshold imposes no constraint")
        return math.inf
    if math.isinf(curvature):
        return 0.0
    return 1.0 / math.sqrt(curvature)


def is_consistent_taylor(s: QubitSummary) -> bool:
    return s.r - 1 <= consistency_threshold(s.x, s.y, s.z) / math.sqrt(s.n)


class AnalyticOmegas(BaseModel):
    """Closed-form scores of the standard and per-block models."""

    model_config = ConfigDict(frozen=True)

    standard: float
    alternative: float
    k_standard: int
    k_alternative: int = 3

    @property
    def delta(self) -> float:
        return self.standard - self.alternative


def analytic_omegas(s: QubitSummary) -> AnalyticOmegas:
    """Omega of both models with the exact standard-model maximum.

    The per-block model fits perfectly with one parameter per block. The
    standard model needs three parameters inside the ball and two (a pure
    state) outside it.
    """
    lnl_alternative = alternative_loglik(s)
    if s.r <= 1.0:
        return AnalyticOmegas(standard=lnl_alternative - 3, alternative=lnl_alternative - 3, k_standard=3)
    estimate = standard_mle_qubit(s)
    lnl_standard = summary_loglik(s, density_to_bloch(estimate))
    return AnalyticOmegas(standard=lnl_standard - 2, alternative=lnl_alternative - 3, k_standard=2)

