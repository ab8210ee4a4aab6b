"""Command-line front end.

    python app.py classify   --model FILE [--tol T] [--n-max N]
    python app.py stationary --model FILE [--kmax K]
    python app.py simulate   --model FILE [--seed S] [--excursions E] [--horizon H] [--workers W]
    python app.py compare    --model FILE [--trunc N] [--kmax K]
    python app.py validate   --model FILE [--trunc N] [--excursions E]

Exit status: 0 success, 1 the computation was refused (e.g. no positive
recurrence certificate, an excursion overran the step guard, a failed
validation check), 2 bad input. Results go to stdout or --out; logs go to
stderr.
"""

import argparse
import sys
import time
from pathlib import Path
from typing import List, Literal, Optional, Sequence

from loguru import logger
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from config.model_file import load_model
from config.settings import settings
from core.classify import classify
from core.errors import ComputationRefused, InputError, OutputError, RunSpecError
from core.model import ProcessModel
from core.oracle import compare, convergence_study
from core.simulate import SimConfig, estimate_return_times, simulate_ctmc
from core.stationary import psi_stationary
from core.validation import ValidationSuite
from ui import report
from utils.logger import setup_logger

COMMANDS = ("classify", "stationary", "simulate", "compare", "validate")


class RunSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    command: Literal["classify", "stationary", "simulate", "compare", "validate"]
    model: Path
    kmax: Optional[int] = Field(default=None, ge=0, le=1_000_000)
    trunc: int = Field(default=200, ge=2, le=20_000)
    study: bool = False
    tol: Optional[float] = Field(default=None, gt=0, lt=1)
    n_max: Optional[int] = Field(default=None, ge=1)
    seed: Optional[int] = Field(default=None, ge=0, lt=2 ** 64)
    excursions: Optional[int] = Field(default=None, ge=1)
    horizon: float = Field(default=100_000, gt=0)
    horizon_kind: Literal["events", "time"] = "events"
    workers: Optional[int] = Field(default=None, ge=1, le=256)
    format: Literal["table", "csv"] = "table"
    out: Optional[Path] = None
    log_level: Optional[str] = None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bdjumps",
        description="Recurrence, stationary laws and simulation for birth-death processes with bounded upward jumps",
    )
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--model", required=True, help="JSON model file")
    parser.add_argument("--kmax", type=int, help="Largest site to report")
    parser.add_argument("--trunc", type=int, default=200, help="Truncation level N for the oracle")
    parser.add_argument("--study", action="store_true", help="compare: run N, 2N, 4N, 8N and report convergence")
    parser.add_argument("--tol", type=float, help="Relative tolerance (default from settings)")
    parser.add_argument("--n-max", dest="n_max", type=int, help="Series horizon")
    parser.add_argument("--seed", type=int, help="Simulation seed")
    parser.add_argument("--excursions", type=int, help="Independent excursions for return-time estimates")
    parser.add_argument("--horizon", type=float, default=100_000, help="Length of the simulated path")
    parser.add_argument("--horizon-kind", dest="horizon_kind", choices=("events", "time"), default="events")
    parser.add_argument("--workers", type=int, help="Threads for excursion sampling")
    parser.add_argument("--format", choices=("table", "csv"), default="table")
    parser.add_argument("--out", help="Write the report here instead of stdout")
    parser.add_argument("--log-level", dest="log_level", help="Override BDJUMPS_LOG_LEVEL")
    return parser


def to_run_spec(args: argparse.Namespace) -> RunSpec:
    try:
        return RunSpec(**vars(args))
    except ValidationError as e:
        for error in e.errors():
            logger.error(f"   - {'.'.join(str(p) for p in error['loc'])}: {error['msg']}")
        first = e.errors()[0]
        raise RunSpecError(f"invalid option --{str(first['loc'][0]).replace('_', '-')}: {first['msg']}")


def _sim_config(spec: RunSpec) -> SimConfig:
    return SimConfig(
        seed=settings.SEED if spec.seed is None else spec.seed,
        horizon=spec.horizon,
        horizon_kind=spec.horizon_kind,
        excursion_count=settings.EXCURSIONS if spec.excursions is None else spec.excursions,
        workers=settings.WORKERS if spec.workers is None else spec.workers,
    )


def _sections(spec: RunSpec, model: ProcessModel) -> List[report.Section]:
    if spec.command == "classify":
        return report.classification_sections(classify(model, spec.tol, spec.n_max))

    if spec.command == "stationary":
        return report.stationary_sections(psi_stationary(model, spec.kmax, spec.tol, spec.n_max))

    if spec.command == "simulate":
        cfg = _sim_config(spec)
        path = simulate_ctmc(model, cfg)
        returns = estimate_return_times(model, cfg)
        kmax = spec.kmax if spec.kmax is not None else min(len(path.occupation_time) - 1, 50)
        return report.simulation_sections(path, returns, kmax)

    if spec.command == "compare":
        if spec.study:
            Ns = [spec.trunc * 2 ** j for j in range(4)]
            return report.convergence_sections(convergence_study(model, Ns, spec.kmax, spec.tol))
        return report.comparison_sections(compare(model, spec.trunc, spec.kmax, spec.tol))

    suite = ValidationSuite(
        model,
        trunc=spec.trunc,
        excursions=spec.excursions or 10_000,
        seed=spec.seed,
        workers=spec.workers or settings.WORKERS,
        tol=spec.tol,
    )
    result = suite.run()
    sections = report.validation_sections(result, with_timing=spec.format == "table")
    if not result.passed:
        failed = ", ".join(c.name for c in result.checks if not c.passed)
        _emit(spec, sections)
        raise ComputationRefused(f"validation failed: {failed}")
    return sections


def _emit(spec: RunSpec, sections: Sequence[report.Section]) -> None:
    text = report.render(sections, spec.format)
    if spec.out is not None:
        try:
            spec.out.write_text(text, encoding="utf-8")
        except OSError as e:
            raise OutputError(spec.out, e.strerror or str(e))
        logger.info(f"Report written to {spec.out}")
    else:
        sys.stdout.write(text)
        sys.stdout.flush()


def run(spec: RunSpec) -> int:
    """Execute one command; returns the exit status."""
    start = time.time()
    logger.info(f"Running {spec.command} on {spec.model}")
    try:
        model = load_model(spec.model)
        _emit(spec, _sections(spec, model))
    except InputError as e:
        logger.error(f"{spec.command} rejected its input: {e}")
        print(f"error: {e}", file=sys.stderr)
        return 2
    except ComputationRefused as e:
        logger.error(f"{spec.command} refused: {e}")
        print(f"error: {e}", file=sys.stderr)
        return 1
    logger.info(f"{spec.command} finished in {time.time() - start:.2f}s")
    return 0


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    setup_logger(args.log_level or settings.LOG_LEVEL, settings.LOG_FILE)
    try:
        spec = to_run_spec(args)
    except RunSpecError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    return run(spec)


if __name__ == "__main__":
    sys.exit(main())
