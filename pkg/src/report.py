"""Report documents: the serialized form of a model ranking."""

import logging
import math
from collections.abc import Sequence

import pandas as pd
from pydantic import BaseModel, ConfigDict, model_validator

from src.models import AicReport, FittedModel, Verdict
from src.qstate import density_to_bloch
from src.qubit_analytic import (
    QubitSummary,
    analytic_omegas,
    consistency_threshold,
    delta_aic_exact,
    delta_aic_taylor,
)

log = logging.getLogger(__name__)

REPORT_SCHEMA_VERSION = 1


class ReportRow(BaseModel):
    model_config = ConfigDict(frozen=True)

    name: str
    grouping: str
    shared: list[str]
    lnl: float
    k: int
    omega: float
    omega_c: float | None
    delta: float
    weight: float
    note: str = ""
    estimate_bloch: list[float] | None = None


class AnalyticSection(BaseModel):
    model_config = ConfigDict(frozen=True)

    x: float
    y: float
    z: float
    n: int
    r: float
    c: float | None
    delta_exact: float
    delta_taylor: float | None
    delta_refined: float
    omega_standard: float
    omega_alternative: float


class Provenance(BaseModel):
    model_config = ConfigDict(frozen=True)

    input_sha256: str
    seed: int | None
    tool_version: str


class ExcludedModel(BaseModel):
    model_config = ConfigDict(frozen=True)

    name: str
    reason: str


class ReportDocument(BaseModel):
    model_config = ConfigDict(frozen=True)

    schema_version: int = REPORT_SCHEMA_VERSION
    rows: list[ReportRow]
    verdict: Verdict
    standard_model: str
    analytic: AnalyticSection | None = None
    provenance: Provenance
    excluded: list[ExcludedModel] = []

    @model_validator(mode="after")
    def _sorted_and_normalized(self) -> "ReportDocument":
        omegas = [row.omega for row in self.rows]
        if any(later > earlier + 1e-9 for earlier, later in zip(omegas, omegas[1:])):
            raise ValueError("rows must be sorted by omega, best first")
        if abs(sum(row.weight for row in self.rows) - 1.0) > 1e-12:
            raise ValueError("weights must sum to 1")
        return self


def _finite_or_none(value: float) -> float | None:
    return value if math.isfinite(value) else None


def analytic_section(summary: QubitSummary) -> AnalyticSection:
    omegas = analytic_omegas(summary)
    return AnalyticSection(
        x=summary.x,
        y=summary.y,
        z=summary.z,
        n=summary.n,
        r=summary.r,
        c=_finite_or_none(consistency_threshold(summary.x, summary.y, summary.z)),
        delta_exact=delta_aic_exact(summary),
        delta_taylor=_finite_or_none(delta_aic_taylor(summary)) if summary.r > 1.0 else None,
        delta_refined=omegas.delta,
        omega_standard=omegas.standard,
        omega_alternative=omegas.alternative,
    )


def _row(model: FittedModel, delta: float, weight: float) -> ReportRow:
    note = ""
    if model.boundary_groups:
        note = "boundary estimate in group(s) " + " ".join(str(g) for g in model.boundary_groups)
    bloch = None
    if model.spec.is_standard and model.predictive_state.n_qubits == 1:
        bloch = density_to_bloch(model.predictive_state).as_array().tolist()
    return ReportRow(
        name=model.name,
        grouping=model.spec.summary(),
        shared=sorted(model.spec.shared),
        lnl=model.lnl,
        k=model.k,
        omega=model.omega,
        omega_c=model.omega_c,
        delta=delta,
        weight=weight,
        note=note,
        estimate_bloch=bloch,
    )


def build_report(
    report: AicReport,
    provenance: Provenance,
    analytic: AnalyticSection | None = None,
    excluded: Sequence[ExcludedModel] = (),
) -> ReportDocument:
    rows = [_row(model, delta, weight) for model, delta, weight in zip(report.fitted, report.deltas, report.weights)]
    return ReportDocument(
        rows=rows,
        verdict=report.verdict,
        standard_model=report.standard_name,
        analytic=analytic,
        provenance=provenance,
        excluded=list(excluded),
    )


def format_table(doc: ReportDocument) -> str:
    """Human-readable ranking followed by the verdict."""
    frame = pd.DataFrame(
        {
            "model": [row.name for row in doc.rows],
            "groups": [row.grouping for row in doc.rows],
            "lnL": [row.lnl for row in doc.rows],
            "K": [row.k for row in doc.rows],
            "Omega": [row.omega for row in doc.rows],
            "Omega_c": [row.omega_c for row in doc.rows],
            "dOmega": [row.delta for row in doc.rows],
            "weight": [row.weight for row in doc.rows],
        }
    )
    lines = [frame.to_string(index=False, float_format=lambda v: f"{v:.4f}")]
    for row in doc.rows:
        if row.estimate_bloch is not None:
            x, y, z = row.estimate_bloch
            lines.append(f"{row.name} estimate: Bloch ({x:.6f}, {y:.6f}, {z:.6f})")
    for item in doc.excluded:
        lines.append(f"excluded {item.name}: {item.reason}")
    if doc.analytic is not None:
        a = doc.analytic
        lines.append(f"R = {a.r:.6f}, closed-form Omega_s - Omega_a = {a.delta_exact:.6f} (refined {a.delta_refined:.6f})")
    lines.append(f"verdict: {doc.verdict.value}")
    return "\n".join(lines) + "\n"


def report_json(doc: ReportDocument) -> str:
    return doc.model_dump_json(indent=2) + "\n"
