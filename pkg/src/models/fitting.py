"""Maximum-likelihood fits of candidate models and their parameter counts."""

import logging
from typing import NamedTuple

import numpy as np

from src.config import MleOptions
from src.errors import ModelError
from src.likelihood import BlockData, ExperimentRecord, blocks_loglik, pooled_averages
from src.models.scoring import aic, aicc
from src.models.spec import FittedModel, ModelSpec
from src.optimize import maximize_likelihood, maximize_masked, maximize_on_sphere
from src.qstate import (
    AXES,
    BlochVector,
    DensityMatrix,
    linear_inversion,
    numerical_rank,
    pauli_labels,
    state_from_bloch,
)

log = logging.getLogger(__name__)


class _GroupFit(NamedTuple):
    state: DensityMatrix
    lnl: float
    k: int
    on_boundary: bool


def count_parameters(
    estimate: DensityMatrix,
    n_determined: int | None = None,
    rank_threshold: float = 1e-8,
) -> int:
    """Independent parameters of a state estimate: 2dr - r^2 - 1 for rank r.

    That is 3 for a mixed qubit, 2 for a pure one and 15 for a full-rank pair.
    When the data fix only ``n_determined`` components, the count is capped there.
    """
    dim = estimate.dim
    rank = numerical_rank(estimate, rank_threshold)
    k = 2 * dim * rank - rank * rank - 1
    if n_determined is None:
        return k
    return min(k, n_determined)


def fit_model(
    spec: ModelSpec,
    data: ExperimentRecord,
    options: MleOptions | None = None,
    corrected: bool = False,
) -> FittedModel:
    """Maximize the likelihood of ``data`` over all states compatible with ``spec``.

    Groups whose frequency-matching state is physical are fitted in closed form
    and counted by their data-determined components. Single-qubit boundary cases
    use the exact Bloch-sphere solver, two-qubit groups the R·rho·R iteration,
    and shared-component models a constrained fit in Pauli coordinates.
    """
    options = options or MleOptions()
    if len(spec.grouping) != len(data.blocks):
        raise ModelError(spec.name, f"covers {len(spec.grouping)} blocks, record has {len(data.blocks)}")

    groups = spec.groups
    block_groups = [[data.blocks[i] for i in spec.blocks_of(group)] for group in groups]

    if spec.shared and len(groups) > 1:
        states, k = _fit_masked(spec, block_groups, data.n_qubits, options)
        boundary: tuple[int, ...] = ()
    else:
        fits = [_fit_group(blocks, data.n_qubits, options) for blocks in block_groups]
        states = [fit.state for fit in fits]
        k = sum(fit.k for fit in fits)
        boundary = tuple(group for group, fit in zip(groups, fits) if fit.on_boundary)

    lnl = sum(blocks_loglik(blocks, state) for blocks, state in zip(block_groups, states))
    n_samples = data.total_shots
    omega = aicc(lnl, k, n_samples) if corrected else aic(lnl, k)
    log.info("Fitted %s: lnL=%.6f K=%d Omega=%.6f", spec.name, lnl, k, omega)
    return FittedModel(
        spec=spec,
        estimates=dict(zip(groups, states)),
        lnl=lnl,
        k=k,
        n_samples=n_samples,
        corrected=corrected,
        omega=omega,
        boundary_groups=boundary,
    )


def determined_labels(blocks: list[BlockData]) -> set[str]:
    """Pauli components whose averages the blocks measure."""
    return {label for block in blocks for label in block.setting.observables()}


def _fit_group(blocks: list[BlockData], n_qubits: int, options: MleOptions) -> _GroupFit:
    determined = determined_labels(blocks)
    if n_qubits == 1:
        return _fit_qubit_group(blocks, determined, options)

    if len({block.setting.label for block in blocks}) == 1:
        # one setting: the state diagonal in its eigenbasis reproduces every frequency
        averages, _ = pooled_averages(blocks)
        state = DensityMatrix(matrix=linear_inversion(averages, n_qubits).matrix)
        return _GroupFit(state, blocks_loglik(blocks, state), len(determined), on_boundary=False)

    result = maximize_likelihood(blocks, n_qubits, options)
    k = count_parameters(result.state, len(determined), options.rank_threshold)
    return _GroupFit(result.state, blocks_loglik(blocks, result.state), k, on_boundary=result.rank_deficient)


def _fit_qubit_group(blocks: list[BlockData], determined: set[str], options: MleOptions) -> _GroupFit:
    averages, _ = pooled_averages(blocks)
    vector = np.array([averages.get(axis, 0.0) for axis in AXES])
    if vector @ vector <= 1.0:
        state = state_from_bloch(BlochVector.from_array(vector))
        return _GroupFit(state, blocks_loglik(blocks, state), len(determined), on_boundary=False)

    plus, minus = _axis_counts(blocks)
    state = state_from_bloch(BlochVector.from_array(maximize_on_sphere(plus, minus)))
    k = count_parameters(state, len(determined), options.rank_threshold)
    return _GroupFit(state, blocks_loglik(blocks, state), k, on_boundary=True)


def _axis_counts(blocks: list[BlockData]) -> tuple[np.ndarray, np.ndarray]:
    plus = np.zeros(len(AXES))
    minus = np.zeros(len(AXES))
    for block in blocks:
        axis = AXES.index(block.setting.axes[0])
        plus[axis] += block.count("+")
        minus[axis] += block.count("-")
    return plus, minus


def _fit_masked(
    spec: ModelSpec,
    block_groups: list[list[BlockData]],
    n_qubits: int,
    options: MleOptions,
) -> tuple[list[DensityMatrix], int]:
    unknown = spec.shared - set(pauli_labels(n_qubits))
    if unknown:
        raise ModelError(spec.name, f"unknown shared components {sorted(unknown)}")

    determined = [determined_labels(blocks) for blocks in block_groups]
    shared_determined = {label for label in spec.shared if any(label in d for d in determined)}
    k = len(shared_determined) + sum(len(d - spec.shared) for d in determined)

    if n_qubits == 1:
        closed_form = _qubit_mask_closed_form(block_groups, spec.shared)
        if closed_form is not None:
            return closed_form, k

    all_blocks = [block for blocks in block_groups for block in blocks]
    start = _fit_group(all_blocks, n_qubits, options).state
    return maximize_masked(block_groups, n_qubits, spec.shared, start), k


def _qubit_mask_closed_form(
    block_groups: list[list[BlockData]],
    shared: frozenset[str],
) -> list[DensityMatrix] | None:
    """Frequency-matching states: shared axes pooled over all groups, free per group.

    Returns None when any group's vector falls outside the Bloch ball.
    """
    pooled, _ = pooled_averages(block for blocks in block_groups for block in blocks)
    vectors = []
    for blocks in block_groups:
        own, _ = pooled_averages(blocks)
        source = [pooled if axis in shared else own for axis in AXES]
        vectors.append(np.array([values.get(axis, 0.0) for values, axis in zip(source, AXES)]))
    if any(vector @ vector > 1.0 for vector in vectors):
        return None
    return [state_from_bloch(BlochVector.from_array(vector)) for vector in vectors]
