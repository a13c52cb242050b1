"""AIC scoring, ranking, Akaike weights and model-averaged prediction.

Sign convention: Omega = ln L - K, so higher is better.
"""

import logging
from collections.abc import Sequence

import numpy as np

from src.errors import AnalysisError, DimensionMismatchError
from src.models.spec import AicReport, FittedModel, Verdict
from src.qstate import MeasurementSetting, born_probabilities

log = logging.getLogger(__name__)


def aic(lnl: float, k: int) -> float:
    if k < 0:
        raise ValueError(f"parameter count must be nonnegative, got {k}")
    return lnl - k


def aicc(lnl: float, k: int, n_samples: int) -> float:
    """Finite-sample corrected score: aic - K(K+1)/(n - K - 1)."""
    if n_samples <= k + 1:
        raise AnalysisError(f"AICc needs more than K+1={k + 1} samples, got {n_samples}")
    return aic(lnl, k) - k * (k + 1) / (n_samples - k - 1)


def akaike_weights(omegas: Sequence[float]) -> list[float]:
    """Normalized exp(Omega_k); ratios equal exp(Omega_k - Omega_k')."""
    if not omegas:
        raise ValueError("need at least one score")
    values = np.asarray(omegas, dtype=float)
    if not np.all(np.isfinite(values)):
        raise ValueError("scores must be finite")
    relative = np.exp(values - values.max())
    return list(relative / relative.sum())


def rank_models(fitted: Sequence[FittedModel], tie_tolerance: float = 1e-9) -> AicReport:
    """Sort by Omega (best first) and judge the standard model.

    Scores within ``tie_tolerance`` count as tied and the model with fewer
    parameters goes first; the standard model wins exact ties. The verdict is
    CONSISTENT iff the standard model scores at least as well as every alternative.
    """
    if len(fitted) < 2:
        raise AnalysisError("ranking needs at least two models")
    standard = next((model for model in fitted if model.spec.is_standard), None)
    if standard is None:
        raise AnalysisError("no standard (single-group) model among the candidates")

    ordered = _ordered_with_ties(list(fitted), standard, tie_tolerance)
    omegas = [model.omega for model in ordered]
    best = max(omegas)
    best_alternative = max(model.omega for model in fitted if model is not standard)
    consistent = standard.omega >= best_alternative - tie_tolerance
    verdict = Verdict.CONSISTENT if consistent else Verdict.INCONSISTENT
    log.info("Standard model %s: Omega_s - max Omega_a = %.4f", verdict.value, standard.omega - best_alternative)
    return AicReport(
        fitted=tuple(ordered),
        deltas=tuple(best - omega for omega in omegas),
        weights=tuple(akaike_weights(omegas)),
        verdict=verdict,
        standard_name=standard.name,
    )


def _ordered_with_ties(fitted: list[FittedModel], standard: FittedModel, tolerance: float) -> list[FittedModel]:
    # near ties go to the smaller K; the standard model also wins exact ties
    by_score = sorted(fitted, key=lambda model: -model.omega)
    ordered: list[FittedModel] = []
    while by_score:
        head = by_score[0].omega
        tied = [model for model in by_score if head - model.omega <= tolerance]
        by_score = [model for model in by_score if head - model.omega > tolerance]
        group = sorted((model for model in tied if model is not standard), key=lambda model: model.k)
        if any(model is standard for model in tied):
            slot = next(
                (i for i, model in enumerate(group) if model.omega == standard.omega or model.k >= standard.k),
                len(group),
            )
            group.insert(slot, standard)
        ordered.extend(group)
    return ordered


def model_averaged_prediction(report: AicReport, future_setting: MeasurementSetting) -> dict[str, float]:
    """Akaike-weighted mixture of each model's Born probabilities.

    Each model predicts with the state of its prediction group (first group by
    default), i.e. the state describing samples not yet measured.
    """
    if not report.fitted:
        raise AnalysisError("empty report")
    mixture = {outcome: 0.0 for outcome in future_setting.outcomes}
    for model, weight in zip(report.fitted, report.weights):
        state = model.predictive_state
        if state.n_qubits != future_setting.n_qubits:
            raise DimensionMismatchError(state.n_qubits, future_setting.n_qubits, "qubit count")
        for outcome, probability in born_probabilities(state, future_setting).items():
            mixture[outcome] += weight * probability
    return mixture
