"""Plain-text tables and CSV for the command results.

A report is a list of sections, each a small table. CSV output writes one
block per section (header row, data rows, blank separator) with every float
at CSV_DIGITS significant digits so values survive a round trip.
"""

import csv
import io
from dataclasses import dataclass, field
from typing import Any, List, Optional, Sequence, TextIO

from config.settings import settings
from core.models import (
    ClassificationResult,
    ComparisonReport,
    PathSummary,
    ReturnTimeEstimate,
    StationaryResult,
    ValidationReport,
)


@dataclass
class Section:
    title: str
    headers: List[str]
    rows: List[List[Any]] = field(default_factory=list)


def fmt(value: Any, digits: Optional[int] = None) -> str:
    if value is None:
        return "n/a"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return format(value, f".{digits or settings.CSV_DIGITS}g")
    return str(value)


def write_csv(sections: Sequence[Section], stream: TextIO) -> None:
    writer = csv.writer(stream, lineterminator="\n")
    for pos, section in enumerate(sections):
        if pos:
            writer.writerow([])
        writer.writerow(section.headers)
        for row in section.rows:
            writer.writerow([fmt(v) for v in row])


def write_table(sections: Sequence[Section], stream: TextIO, digits: int = 10) -> None:
    for pos, section in enumerate(sections):
        if pos:
            stream.write("\n")
        cells = [section.headers] + [[fmt(v, digits) for v in row] for row in section.rows]
        widths = [max(len(r[c]) for r in cells) for c in range(len(section.headers))]
        stream.write(f"{section.title}\n{'=' * len(section.title)}\n")
        for n, row in enumerate(cells):
            stream.write("  ".join(cell.rjust(w) for cell, w in zip(row, widths)).rstrip() + "\n")
            if n == 0:
                stream.write("  ".join("-" * w for w in widths) + "\n")


def render(sections: Sequence[Section], fmt_name: str) -> str:
    out = io.StringIO()
    if fmt_name == "csv":
        write_csv(sections, out)
    else:
        write_table(sections, out)
    return out.getvalue()


def _summary(title: str, pairs: Sequence[tuple]) -> Section:
    return Section(title, ["quantity", "value"], [[k, v] for k, v in pairs])


# --- Builders ---

def classification_sections(result: ClassificationResult) -> List[Section]:
    sections = [_summary("Classification", [
        ("verdict", result.verdict.value),
        ("rho_tail", result.rho_tail),
        ("rho_tail_lower", result.rho_tail_lower),
        ("rho_tail_upper", result.rho_tail_upper),
        ("rho_per_step", result.rho_per_step),
        ("period", result.period),
        ("last_phi", result.last_phi),
        ("last_phi_log2", result.last_phi_log2),
        ("partial_sum", result.partial_sum),
        ("tail_bound", result.tail_bound),
        ("n_used", result.n_used),
        ("certified", result.certified),
        ("recurrence_certified", result.recurrence_certified),
        ("numerically_decided", result.numerically_decided),
    ])]
    if result.notes:
        sections.append(Section("Notes", ["note"], [[n] for n in result.notes]))
    return sections


def stationary_sections(result: StationaryResult) -> List[Section]:
    summary = _summary("Stationary summary", [
        ("E_eta", result.Eeta),
        ("ET", result.ET),
        ("kmax", result.kmax),
        ("psi_tail_mass_bound", result.tail_mass_bound),
        ("pi_tail_mass_bound", result.pi_tail_mass_bound),
        ("certified", result.certified),
    ])
    table = Section("Stationary distribution", ["k", "psi", "pi"],
                    [[k, p, q] for k, (p, q) in enumerate(zip(result.psi, result.pi))])
    return [summary, table]


def simulation_sections(path: PathSummary, returns: ReturnTimeEstimate, kmax: int) -> List[Section]:
    total_visits = sum(path.visit_counts) or 1
    rows = []
    for k in range(kmax + 1):
        occ = path.occupation_time[k] if k < len(path.occupation_time) else 0.0
        visits = path.visit_counts[k] if k < len(path.visit_counts) else 0
        rows.append([k, occ / path.total_time if path.total_time > 0 else 0.0, visits / total_visits])
    summary = _summary("Simulation summary", [
        ("events", path.event_count),
        ("total_time", path.total_time),
        ("path_excursions", path.excursions_completed),
        ("horizon", path.horizon_reached),
        ("excursions", returns.excursions),
        ("mean_T", returns.mean_T),
        ("se_T", returns.se_T),
        ("mean_eta", returns.mean_eta),
        ("se_eta", returns.se_eta),
    ])
    return [summary, Section("Empirical distribution", ["k", "psi_hat", "pi_hat"], rows)]


def comparison_sections(report: ComparisonReport) -> List[Section]:
    rows = Section("Formula vs truncated generator", ["k", "psi_formula", "psi_oracle", "abs_diff"],
                   [[r.k, r.psi_formula, r.psi_oracle, r.abs_diff] for r in report.rows])
    summary = Section("Comparison summary", ["N", "sup_norm", "tv_distance", "pi_sup_norm", "pi_tv_distance",
                                             "oracle_residual"],
                      [[report.N, report.sup_norm, report.tv_distance, report.pi_sup_norm,
                        report.pi_tv_distance, report.oracle_residual]])
    return [rows, summary]


def convergence_sections(reports: Sequence[ComparisonReport]) -> List[Section]:
    return [Section("Truncation convergence", ["N", "sup_norm", "tv_distance", "pi_sup_norm", "pi_tv_distance"],
                    [[r.N, r.sup_norm, r.tv_distance, r.pi_sup_norm, r.pi_tv_distance] for r in reports])]


def validation_sections(report: ValidationReport, with_timing: bool = True) -> List[Section]:
    headers = ["check", "passed", "skipped", "detail"] + (["seconds"] if with_timing else [])
    rows = []
    for c in report.checks:
        row: List[Any] = [c.name, c.passed, c.skipped, c.detail]
        if with_timing:
            row.append(round(c.elapsed, 3))
        rows.append(row)
    return [Section("Validation", headers, rows)]
