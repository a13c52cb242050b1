"""Numerical likelihood maximizers shared by the fitting modules.

Three maximizers live here:

* ``maximize_on_sphere``: exact boundary maximum for a qubit measured along
  Pauli axes, used when the frequency-matching Bloch vector lies outside the ball.
* ``maximize_likelihood``: diluted R·rho·R fixed-point iteration over physical
  states of any dimension; positivity is preserved by construction.
* ``maximize_masked``: SLSQP over Pauli coordinates for several states that
  share some of their components.
"""

import logging
from typing import NamedTuple

import numpy as np
from pydantic import BaseModel, ConfigDict
from scipy.optimize import brentq, minimize
from scipy.special import xlogy

from src.config import MleOptions
from src.errors import AnalysisError, ImpossibleDataError
from src.likelihood import BlockData, blocks_loglik, outcome_arrays, pooled_averages
from src.qstate import (
    DensityMatrix,
    LinearInversionMatrix,
    linear_inversion,
    measurement_projectors,
    pauli_coefficients,
    pauli_labels,
    pauli_operator,
    project_positive_eigenspace,
)

log = logging.getLogger(__name__)

_SEED_MIN_EIGENVALUE = 1e-6
_SEED_MIXING = 1e-3
_PROB_FLOOR = 1e-12
_MASK_FEASIBILITY_TOL = 1e-8


class MleResult(BaseModel):
    """Outcome of an iterative likelihood maximization."""

    model_config = ConfigDict(frozen=True)

    state: DensityMatrix
    lnl: float
    iterations: int
    converged: bool
    lnl_trace: tuple[float, ...]
    rank_deficient: bool


def maximize_on_sphere(plus: np.ndarray, minus: np.ndarray) -> np.ndarray:
    """Unit Bloch vector maximizing sum_a n+_a ln(1+b_a) + n-_a ln(1-b_a).

    Each axis solves n+/(1+b) - n-/(1-b) = lam * b; lam > 0 is tuned until
    |b| = 1. Axes without counts stay at zero. Counts may be fractional.
    """
    plus = np.asarray(plus, dtype=float)
    minus = np.asarray(minus, dtype=float)
    total = float(plus.sum() + minus.sum())
    if total <= 0:
        raise AnalysisError("no counts to fit")

    def excess(lam: float) -> float:
        b = _axis_roots(plus, minus, lam)
        return float(b @ b) - 1.0

    if excess(0.0) <= 0:
        raise AnalysisError("frequency-matching Bloch vector is inside the ball")

    upper = total
    while excess(upper) > 0:
        upper *= 2.0
    lam = brentq(excess, 0.0, upper, xtol=1e-14 * total)
    b = _axis_roots(plus, minus, lam)
    return b / np.linalg.norm(b)


def _axis_roots(plus: np.ndarray, minus: np.ndarray, lam: float) -> np.ndarray:
    return np.array([_axis_root(float(p), float(m), lam) for p, m in zip(plus, minus)])


def _axis_root(plus: float, minus: float, lam: float) -> float:
    if plus == 0 and minus == 0:
        return 0.0
    if minus == 0:
        return _one_sided_root(plus, lam)
    if plus == 0:
        return -_one_sided_root(minus, lam)

    # (1 - b^2) times the stationarity condition; positive at -1, negative at +1
    def stationarity(b: float) -> float:
        return plus * (1 - b) - minus * (1 + b) - lam * b * (1 - b * b)

    return brentq(stationarity, -1.0, 1.0, xtol=1e-16)


def _one_sided_root(n: float, lam: float) -> float:
    if lam <= n / 2:
        return 1.0
    return (-1.0 + np.sqrt(1.0 + 4.0 * n / lam)) / 2.0


def seed_state(blocks: list[BlockData], n_qubits: int) -> np.ndarray:
    """Full-rank starting point: projected linear inversion, mixed if singular."""
    averages, _ = pooled_averages(blocks)
    projected = project_positive_eigenspace(linear_inversion(averages, n_qubits))
    if projected.eigenvalues()[0] > _SEED_MIN_EIGENVALUE:
        return np.array(projected.matrix)
    dim = 2**n_qubits
    return (1 - _SEED_MIXING) * projected.matrix + _SEED_MIXING * np.eye(dim) / dim


def maximize_likelihood(
    blocks: list[BlockData],
    n_qubits: int,
    options: MleOptions | None = None,
    start: np.ndarray | None = None,
) -> MleResult:
    """Maximize the likelihood of blocks sharing one state by diluted R·rho·R.

    Every accepted iterate has lnL no lower than its predecessor; the run stops
    when the per-iteration gain drops below ``options.tolerance``.
    """
    options = options or MleOptions()
    projectors, counts = outcome_arrays(blocks)
    rho = seed_state(blocks, n_qubits) if start is None else np.array(start, dtype=complex)
    lnl = _array_loglik(projectors, counts, rho)
    trace = [lnl]
    converged = False
    iterations = 0

    for iterations in range(1, options.max_iterations + 1):
        rho_next, lnl_next = _rrr_step(projectors, counts, rho, lnl, options)
        if lnl_next < lnl:
            raise AnalysisError(f"likelihood decreased at iteration {iterations}")
        gain = lnl_next - lnl
        rho, lnl = rho_next, lnl_next
        trace.append(lnl)
        if gain < options.tolerance:
            converged = True
            break

    if not converged:
        log.warning("R·rho·R did not converge in %d iterations (lnL=%.6f)", iterations, lnl)

    state = project_positive_eigenspace(LinearInversionMatrix(matrix=rho))
    rank_deficient = bool(state.eigenvalues()[0] < options.rank_threshold)
    if rank_deficient:
        log.warning("Rank-deficient estimate (smallest eigenvalue %.3g)", state.eigenvalues()[0])
    log.debug("R·rho·R finished after %d iterations, lnL=%.10f", iterations, lnl)
    return MleResult(
        state=state,
        lnl=lnl,
        iterations=iterations,
        converged=converged,
        lnl_trace=tuple(trace),
        rank_deficient=rank_deficient,
    )


def _array_loglik(projectors: np.ndarray, counts: np.ndarray, rho: np.ndarray) -> float:
    probs = np.einsum("kij,ji->k", projectors, rho).real
    if np.any((counts > 0) & (probs <= 0)):
        return -np.inf
    return float(xlogy(counts, np.clip(probs, 0.0, None)).sum())


def _r_operator(projectors: np.ndarray, counts: np.ndarray, rho: np.ndarray) -> np.ndarray:
    probs = np.einsum("kij,ji->k", projectors, rho).real
    weights = np.divide(counts, probs, out=np.zeros_like(counts), where=counts > 0)
    return np.einsum("k,kij->ij", weights, projectors) / counts.sum()


def _normalized(matrix: np.ndarray) -> np.ndarray:
    matrix = (matrix + matrix.conj().T) / 2
    return matrix / np.trace(matrix).real


def _rrr_step(
    projectors: np.ndarray,
    counts: np.ndarray,
    rho: np.ndarray,
    lnl: float,
    options: MleOptions,
) -> tuple[np.ndarray, float]:
    r = _r_operator(projectors, counts, rho)
    candidate = _normalized(r @ rho @ r)
    candidate_lnl = _array_loglik(projectors, counts, candidate)
    if candidate_lnl >= lnl:
        return candidate, candidate_lnl

    identity = np.eye(rho.shape[0])
    epsilon = options.dilution_start
    while epsilon >= options.dilution_floor:
        step = identity + epsilon * r
        candidate = _normalized(step @ rho @ step)
        candidate_lnl = _array_loglik(projectors, counts, candidate)
        if candidate_lnl >= lnl:
            return candidate, candidate_lnl
        epsilon /= 2
    return rho, lnl


class _GroupProblem(NamedTuple):
    offsets: np.ndarray
    design: np.ndarray
    counts: np.ndarray
    selector: np.ndarray


def maximize_masked(
    groups: list[list[BlockData]],
    n_qubits: int,
    shared: frozenset[str],
    start: DensityMatrix,
) -> list[DensityMatrix]:
    """Maximize the joint likelihood of per-group states with shared components.

    Variables are Pauli coordinates: one per shared label plus one per free
    label and group. Each group's state must stay positive semidefinite. The
    returned states never score below ``start`` used for every group.
    """
    labels = pauli_labels(n_qubits)
    shared_labels = [label for label in labels if label in shared]
    free_labels = [label for label in labels if label not in shared]
    n_vars = len(shared_labels) + len(groups) * len(free_labels)
    operators = np.array([pauli_operator(label) for label in labels])
    problems = [
        _group_problem(blocks, operators, labels, shared_labels, free_labels, index, n_vars)
        for index, blocks in enumerate(groups)
    ]

    start_coefficients = pauli_coefficients(start)
    theta0 = np.array(
        [start_coefficients[label] for label in shared_labels]
        + [start_coefficients[label] for _ in groups for label in free_labels]
    )
    total = float(sum(problem.counts.sum() for problem in problems))

    def objective(theta: np.ndarray) -> tuple[float, np.ndarray]:
        value = 0.0
        gradient = np.zeros(n_vars)
        for problem in problems:
            probs = np.maximum(problem.offsets + problem.design @ theta, _PROB_FLOOR)
            value += float(xlogy(problem.counts, probs).sum())
            gradient += problem.design.T @ (problem.counts / probs)
        return -value / total, -gradient / total

    constraints = [
        {
            "type": "ineq",
            "fun": lambda theta, p=problem: _psd_margin(p, operators, theta)[0],
            "jac": lambda theta, p=problem: _psd_margin(p, operators, theta)[1],
        }
        for problem in problems
    ]
    result = minimize(
        objective,
        theta0,
        jac=True,
        method="SLSQP",
        constraints=constraints,
        options={"ftol": 1e-14, "maxiter": 1000},
    )
    log.debug("SLSQP finished: success=%s, %s", result.success, result.message)

    fallback = [start] * len(groups)
    margins = [_psd_margin(problem, operators, result.x)[0] for problem in problems]
    if min(margins) < -_MASK_FEASIBILITY_TOL:
        log.warning("Masked fit left the state space (margin %.3g); keeping the shared estimate", min(margins))
        return fallback

    candidates = [_state_from(problem, operators, result.x) for problem in problems]
    try:
        candidate_lnl = sum(blocks_loglik(blocks, state) for blocks, state in zip(groups, candidates))
    except ImpossibleDataError:
        return fallback
    start_lnl = sum(blocks_loglik(blocks, start) for blocks in groups)
    if candidate_lnl < start_lnl:
        log.warning("Masked fit ended below its starting point; keeping the shared estimate")
        return fallback
    return candidates


def _group_problem(
    blocks: list[BlockData],
    operators: np.ndarray,
    labels: list[str],
    shared_labels: list[str],
    free_labels: list[str],
    group_index: int,
    n_vars: int,
) -> _GroupProblem:
    dim = operators.shape[1]
    selector = np.zeros((len(labels), n_vars))
    for row, label in enumerate(labels):
        if label in shared_labels:
            column = shared_labels.index(label)
        else:
            column = len(shared_labels) + group_index * len(free_labels) + free_labels.index(label)
        selector[row, column] = 1.0

    offsets, weights, counts = [], [], []
    for block in blocks:
        for outcome, projector in measurement_projectors(block.setting).items():
            offsets.append(np.trace(projector).real / dim)
            weights.append(np.einsum("lij,ji->l", operators, projector).real / dim)
            counts.append(block.count(outcome))
    return _GroupProblem(
        offsets=np.array(offsets),
        design=np.array(weights) @ selector,
        counts=np.array(counts, dtype=float),
        selector=selector,
    )


def _psd_margin(problem: _GroupProblem, operators: np.ndarray, theta: np.ndarray) -> tuple[float, np.ndarray]:
    coefficients = problem.selector @ theta
    dim = operators.shape[1]
    if dim == 2:
        return 1.0 - float(coefficients @ coefficients), -2.0 * coefficients @ problem.selector

    rho = (np.eye(dim) + np.einsum("l,lij->ij", coefficients, operators)) / dim
    eigenvalues, eigenvectors = np.linalg.eigh(rho)
    lowest = eigenvectors[:, 0]
    derivative = np.einsum("i,lij,j->l", lowest.conj(), operators, lowest).real / dim
    return float(eigenvalues[0]), derivative @ problem.selector


def _state_from(problem: _GroupProblem, operators: np.ndarray, theta: np.ndarray) -> DensityMatrix:
    coefficients = problem.selector @ theta
    dim = operators.shape[1]
    matrix = (np.eye(dim) + np.einsum("l,lij->ij", coefficients, operators)) / dim
    # feasibility is checked by the caller; this only clips rounding-level negativity
    return project_positive_eigenspace(LinearInversionMatrix(matrix=matrix))
