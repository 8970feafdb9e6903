"""CSV and JSON writers (and readers) for screening reports.

The CSV carries one row per scenario; the JSON carries everything,
including violation lists and re-dispatch details. Both are stable
across runs once timing fields are zeroed.
"""

from __future__ import annotations

import csv
import io
import json
from contextlib import contextmanager
from dataclasses import asdict
from pathlib import Path

from .results import (
    BaseCaseSummary,
    Participant,
    RedispatchRecord,
    ScenarioResult,
    ScreeningReport,
    Totals,
    Violation,
)

SCHEMA_VERSION = "1"
MAX_VIOLATIONS = 50

CSV_HEADER = (
    "branch_id",
    "from_bus",
    "to_bus",
    "islanding",
    "converged",
    "outer_iters",
    "cg_iters",
    "time_ms",
    "worst_violation_pct",
    "violation_count",
    "failure_reason",
)


@contextmanager
def _text_sink(destination):
    if isinstance(destination, (str, Path)):
        with open(destination, "w", encoding="utf-8", newline="") as fh:
            yield fh
    else:
        yield destination


def _flag(b: bool) -> str:
    return "true" if b else "false"


def _csv_row(s: ScenarioResult) -> list[str]:
    return [
        str(s.branch_id),
        str(s.from_bus),
        str(s.to_bus),
        _flag(s.islanding),
        _flag(s.converged),
        str(s.outer_iterations),
        str(s.cg_iterations_total),
        f"{s.time_ms:.2f}",
        f"{s.worst_violation_pct:.1f}",
        str(len(s.violations)),
        s.failure_reason or "",
    ]


def csv_text(report: ScreeningReport) -> str:
    buf = io.StringIO(newline="")
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(CSV_HEADER)
    for s in report.scenarios:
        w.writerow(_csv_row(s))
    return buf.getvalue()


def write_csv(report: ScreeningReport, destination) -> int:
    """Write one row per scenario; returns the number of bytes written (UTF-8).

    Raises:
        OSError: the destination cannot be written.
    """
    text = csv_text(report)
    with _text_sink(destination) as fh:
        fh.write(text)
    return len(text.encode("utf-8"))


def read_csv(source) -> list[dict]:
    """Parse a report CSV back into typed row dicts keyed by the header names."""
    if isinstance(source, (str, Path)):
        with open(source, encoding="utf-8", newline="") as fh:
            text = fh.read()
    else:
        text = source.read()
    reader = csv.DictReader(io.StringIO(text, newline=""))
    if tuple(reader.fieldnames or ()) != CSV_HEADER:
        raise ValueError(f"unexpected CSV header {reader.fieldnames}")
    rows = []
    for r in reader:
        rows.append({
            "branch_id": int(r["branch_id"]),
            "from_bus": int(r["from_bus"]),
            "to_bus": int(r["to_bus"]),
            "islanding": r["islanding"] == "true",
            "converged": r["converged"] == "true",
            "outer_iters": int(r["outer_iters"]),
            "cg_iters": int(r["cg_iters"]),
            "time_ms": float(r["time_ms"]),
            "worst_violation_pct": float(r["worst_violation_pct"]),
            "violation_count": int(r["violation_count"]),
            "failure_reason": r["failure_reason"] or None,
        })
    return rows


def _scenario_dict(s: ScenarioResult) -> dict:
    shown = s.violations[:MAX_VIOLATIONS]
    return {
        "branch_id": s.branch_id,
        "from_bus": s.from_bus,
        "to_bus": s.to_bus,
        "islanding": s.islanding,
        "deenergized_count": s.deenergized_count,
        "converged": s.converged,
        "outer_iterations": s.outer_iterations,
        "cg_iterations_total": s.cg_iterations_total,
        "time_ms": s.time_ms,
        "worst_violation_pct": s.worst_violation_pct,
        "violation_count": len(s.violations),
        "violations": [asdict(v) for v in shown],
        "violations_overflow": len(s.violations) - len(shown),
        "redispatch": asdict(s.redispatch) if s.redispatch is not None else None,
        "failure_reason": s.failure_reason,
    }


def report_to_dict(report: ScreeningReport) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "case_name": report.case_name,
        "solver": report.solver,
        "totals": asdict(report.totals),
        "total_time_ms": report.total_time_ms,
        "base_case": asdict(report.base_case) if report.base_case is not None else None,
        "scenarios": [_scenario_dict(s) for s in report.scenarios],
    }


def json_text(report: ScreeningReport) -> str:
    return json.dumps(report_to_dict(report), indent=2) + "\n"


def write_json(report: ScreeningReport, destination) -> int:
    """Write the full report as JSON; returns the number of bytes written (UTF-8).

    Raises:
        OSError: the destination cannot be written.
    """
    text = json_text(report)
    with _text_sink(destination) as fh:
        fh.write(text)
    return len(text.encode("utf-8"))


def _redispatch_from(d) -> RedispatchRecord | None:
    if d is None:
        return None
    return RedispatchRecord(
        island_net_injection=d["island_net_injection"],
        participants=tuple(Participant(**p) for p in d["participants"]),
        island_gen_count=d["island_gen_count"],
        island_load_count=d["island_load_count"],
    )


def report_from_dict(d: dict) -> ScreeningReport:
    if d.get("schema_version") != SCHEMA_VERSION:
        raise ValueError(f"unsupported schema_version {d.get('schema_version')!r}")
    scenarios = []
    for s in d["scenarios"]:
        scenarios.append(ScenarioResult(
            branch_id=s["branch_id"],
            from_bus=s["from_bus"],
            to_bus=s["to_bus"],
            islanding=s["islanding"],
            deenergized_count=s["deenergized_count"],
            converged=s["converged"],
            outer_iterations=s["outer_iterations"],
            cg_iterations_total=s["cg_iterations_total"],
            time_ms=s["time_ms"],
            violations=tuple(Violation(**v) for v in s["violations"]),
            redispatch=_redispatch_from(s["redispatch"]),
            failure_reason=s["failure_reason"],
        ))
    base = d.get("base_case")
    return ScreeningReport(
        case_name=d["case_name"],
        solver=d["solver"],
        totals=Totals(**d["totals"]),
        total_time_ms=d["total_time_ms"],
        scenarios=tuple(scenarios),
        base_case=BaseCaseSummary(**base) if base is not None else None,
    )


def read_json(source) -> ScreeningReport:
    """Inverse of :func:`write_json` (violation lists beyond the cap are not recoverable)."""
    if isinstance(source, (str, Path)):
        with open(source, encoding="utf-8") as fh:
            return report_from_dict(json.load(fh))
    return report_from_dict(json.load(source))


def summary_line(report: ScreeningReport) -> str:
    t = report.totals
    return (
        f"tested={t.tested} converged={t.converged} islanding={t.islanding} "
        f"failed={t.failed} total_ms={report.total_time_ms:.2f}"
    )
