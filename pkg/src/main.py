"""tomoguard command line: ``simulate``, ``analyze`` and ``power``."""

import argparse
import logging
import sys
from pathlib import Path

import pandas as pd
from pydantic import ValidationError

from src import __version__
from src.catalog import resolve_models, split_tokens
from src.config import AppSettings, MleOptions
from src.errors import AnalysisError, ConfigError, DataFormatError, ImpossibleDataError, StateError
from src.likelihood import ExperimentRecord
from src.models import STANDARD, FittedModel, fit_model, rank_models
from src.qubit_analytic import QubitSummary
from src.records import file_sha256, read_record, write_plot_data, write_record, write_text
from src.report import ExcludedModel, Provenance, analytic_section, build_report, format_table, report_json
from src.simulator import (
    DEFAULT_P,
    Schedule,
    ScheduleOrdering,
    SourceConfig,
    monte_carlo_power,
    run_experiment,
)

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA_FORMAT = 3
EXIT_ANALYSIS = 4

DEFAULT_MODELS = "standard,per-block"
DEFAULT_POWER_MODELS = "standard;mask:Z@2"
POWER_COLUMNS = ["drift_sigma", "trials", "fraction", "standard_error"]


def _add_source_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--qubits", type=int, choices=[1, 2], default=1)
    parser.add_argument(
        "--blocks",
        type=str,
        default=None,
        help='Block list such as "X:500,Y:500,Z:500" (default: X,Y,Z,X,Y,Z x 500, or the 9 pair settings)',
    )
    parser.add_argument("--schedule", choices=[o.value for o in ScheduleOrdering], default="blocked")
    parser.add_argument("--p", type=float, default=DEFAULT_P, help="Weight of the pure part of the source")
    parser.add_argument("--phi0", type=float, default=0.0, help="Initial source angle (radians)")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--force", action="store_true", help="Overwrite existing output files")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tomoguard", description="Detect failed tomography by AIC model selection")
    parser.add_argument("--version", action="version", version=f"tomoguard {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    simulate = sub.add_parser("simulate", help="Simulate an experiment from a drifting source")
    _add_source_flags(simulate)
    simulate.add_argument("--drift-sigma", type=float, default=0.0, help="Per-shot std. dev. of the angle walk")
    simulate.add_argument("--out", type=Path, required=True)
    simulate.set_defaults(handler=cmd_simulate)

    analyze = sub.add_parser("analyze", help="Rank candidate models for a recorded experiment")
    analyze.add_argument("--in", dest="input", type=Path, required=True)
    analyze.add_argument(
        "--models",
        type=str,
        default=DEFAULT_MODELS,
        help="standard, per-block, per-setting, split:K, mask:C1,C2[@K], free:OBS, scan[:TOP]; "
        'separate with ";" when a token contains commas',
    )
    analyze.add_argument("--aicc", action="store_true", help="Rank by the finite-sample corrected score")
    analyze.add_argument("--analytic", action="store_true", help="Add the single-qubit closed forms")
    analyze.add_argument("--report", type=Path, default=None)
    analyze.add_argument("--plot-data", type=Path, default=None)
    analyze.add_argument("--force", action="store_true", help="Overwrite existing output files")
    analyze.set_defaults(handler=cmd_analyze)

    power = sub.add_parser("power", help="Detection rate versus drift strength by Monte Carlo")
    _add_source_flags(power)
    power.add_argument("--trials", type=int, default=100)
    power.add_argument("--sigma-grid", type=str, default="0,0.1")
    power.add_argument("--models", type=str, default=DEFAULT_POWER_MODELS)
    power.add_argument("--aicc", action="store_true")
    power.add_argument("--workers", type=int, default=1)
    power.add_argument("--out", type=Path, required=True)
    power.set_defaults(handler=cmd_power)
    return parser


def _schedule(args: argparse.Namespace) -> Schedule:
    ordering = ScheduleOrdering(args.schedule)
    if args.blocks is None:
        if args.qubits == 2:
            return Schedule.two_qubit_default(ordering)
        return Schedule.six_block_default(ordering)
    schedule = Schedule.from_descriptor(args.blocks, ordering)
    if schedule.n_qubits != args.qubits:
        raise ConfigError(f"--blocks measures {schedule.n_qubits} qubit(s) but --qubits is {args.qubits}")
    return schedule


def _source(args: argparse.Namespace, sigma: float) -> SourceConfig:
    try:
        return SourceConfig(p=args.p, phi0=args.phi0, sigma_step=sigma, seed=args.seed)
    except ValidationError as exc:
        raise ConfigError(str(exc)) from exc


def cmd_simulate(args: argparse.Namespace) -> int:
    schedule = _schedule(args)
    record = run_experiment(_source(args, args.drift_sigma), schedule)
    write_record(record, args.out, force=args.force)
    return EXIT_OK


def _fit_all(
    record: ExperimentRecord,
    tokens: str,
    corrected: bool,
) -> tuple[list[FittedModel], list[ExcludedModel]]:
    fitted, excluded = [], []
    for spec in resolve_models(tokens, record):
        try:
            fitted.append(fit_model(spec, record, corrected=corrected))
        except ImpossibleDataError as exc:
            log.warning("Excluding %s: %s", spec.name, exc)
            excluded.append(ExcludedModel(name=spec.name, reason=f"excluded by data: {exc}"))
    if any(item.name == STANDARD for item in excluded):
        raise AnalysisError("the standard model assigns probability zero to observed data")
    if len(fitted) < 2:
        raise AnalysisError("need the standard model and at least one alternative")
    return fitted, excluded


def cmd_analyze(args: argparse.Namespace) -> int:
    record = read_record(args.input)
    fitted, excluded = _fit_all(record, args.models, args.aicc)
    ranking = rank_models(fitted, tie_tolerance=MleOptions().tie_tolerance)

    analytic = None
    if args.analytic:
        analytic = analytic_section(QubitSummary.from_record(record))
    provenance = Provenance(
        input_sha256=file_sha256(args.input),
        seed=record.metadata.seed,
        tool_version=__version__,
    )
    doc = build_report(ranking, provenance, analytic=analytic, excluded=excluded)

    sys.stdout.write(format_table(doc))
    if args.report is not None:
        write_text(args.report, report_json(doc), force=args.force)
        log.info("Wrote report to %s", args.report)
    if args.plot_data is not None:
        write_plot_data(record, args.plot_data, force=args.force)
    return EXIT_OK


def _sigma_grid(text: str) -> list[float]:
    try:
        grid = [float(item) for item in text.split(",") if item.strip()]
    except ValueError as exc:
        raise ConfigError(f"--sigma-grid: {exc}") from exc
    if not grid or any(sigma < 0 for sigma in grid):
        raise ConfigError("--sigma-grid needs nonnegative values")
    return grid


def cmd_power(args: argparse.Namespace) -> int:
    if args.trials < 1:
        raise ConfigError("--trials must be at least 1")
    if args.workers < 1:
        raise ConfigError("--workers must be at least 1")
    if args.out.exists() and not args.force:
        raise ConfigError(f"{args.out} exists; pass --force to overwrite")
    schedule = _schedule(args)
    models = split_tokens(args.models)
    grid = _sigma_grid(args.sigma_grid)

    rows = []
    for sigma in grid:
        estimate = monte_carlo_power(
            _source(args, sigma), schedule, models, args.trials, workers=args.workers, corrected=args.aicc
        )
        rows.append((sigma, estimate.trials, estimate.fraction, estimate.standard_error))
    frame = pd.DataFrame(rows, columns=POWER_COLUMNS)
    write_text(args.out, frame.to_csv(index=False, float_format="%.6g", lineterminator="\n"), force=True)
    log.info("Wrote power curve (%d points) to %s", len(grid), args.out)
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    settings = AppSettings()
    logging.basicConfig(
        level=getattr(logging, settings.log_level.upper(), logging.WARNING),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    args = build_parser().parse_args(argv)
    try:
        return args.handler(args)
    except ConfigError as exc:
        log.error("%s", exc)
        return EXIT_USAGE
    except DataFormatError as exc:
        log.error("%s", exc)
        return EXIT_DATA_FORMAT
    except (AnalysisError, StateError) as exc:
        log.error("%s", exc)
        return EXIT_ANALYSIS


if __name__ == "__main__":
    sys.exit(main())
