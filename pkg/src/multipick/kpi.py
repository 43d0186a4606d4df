"""Throughput, success and timing KPIs over trial records, plus report export."""

from __future__ import annotations

import csv
import json
import math
from collections import Counter
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional, Sequence

from .errors import EmptyInput, IoFailure, ZeroTime
from .executor import PHASES, Outcome, PickType, TrialRecord

SECONDS_PER_HOUR = 3600.0
DISCREPANCY_TOL = 0.05  # s
FACTORS = ("object_type", "approach_angle", "pick_type", "gripper_config")


@dataclass(frozen=True)
class PhaseMeans:
    means: tuple  # one entry per phase, None where no record reached it
    sum_of_means: float
    mean_total: Optional[float]
    reference_total: Optional[float] = None
    discrepancy: bool = False


def phase_means(records: Sequence[TrialRecord], reference_total: Optional[float] = None,
                tolerance: float = DISCREPANCY_TOL) -> PhaseMeans:
    """Per-phase means over the records that reached each phase.

    ``sum_of_means`` adds the five means; ``mean_total`` averages whole-trial
    times. The two differ once failed trials skip phases, and a quoted
    ``reference_total`` may differ from both; either gap of ``tolerance`` or
    more raises the ``discrepancy`` flag.
    """
    if not records:
        raise EmptyInput("phase_means needs at least one record")
    means = []
    for k in range(len(PHASES)):
        vals = [r.phase_durations[k] for r in records if r.phase_durations[k] is not None]
        means.append(math.fsum(vals) / len(vals) if vals else None)
    total = math.fsum(m for m in means if m is not None)
    timed = [r.active_time for r in records if r.phase_durations[0] is not None]
    mean_total = math.fsum(timed) / len(timed) if timed else None
    flag = mean_total is not None and abs(total - mean_total) >= tolerance
    if reference_total is not None:
        flag = flag or abs(total - reference_total) >= tolerance
    return PhaseMeans(tuple(means), total, mean_total, reference_total, bool(flag))


def active_time(records: Sequence[TrialRecord]) -> float:
    """In-trial seconds summed over all records; downtime between trials is never counted."""
    return math.fsum(r.active_time for r in records)


def throughput(records: Sequence[TrialRecord]) -> tuple[float, float]:
    """``(tph, uph)``: successful trials and placed items per active hour."""
    hours = active_time(records) / SECONDS_PER_HOUR
    if not hours > 0:
        raise ZeroTime("throughput needs positive active time")
    successes = sum(r.outcome is Outcome.SUCCESS for r in records)
    items = sum(r.items_placed for r in records)
    return successes / hours, items / hours


def _uph_or_none(records) -> Optional[float]:
    try:
        return throughput(records)[1]
    except ZeroTime:
        return None


def success_rate(records: Sequence[TrialRecord]) -> Optional[float]:
    """Successes over trials that reached grasping; ``None`` if there are none."""
    reached = [r for r in records if r.outcome is not Outcome.SYSTEM_FAILURE]
    if not reached:
        return None
    return sum(r.outcome is Outcome.SUCCESS for r in reached) / len(reached)


def _level(record: TrialRecord, factor: str) -> str:
    v = getattr(record.scenario, factor)
    return str(v.value if hasattr(v, "value") else v)


def success_breakdown(records: Sequence[TrialRecord]) -> dict:
    """Success rate per level of each factor, each over its own denominator."""
    out = {}
    for factor in FACTORS:
        levels: dict[str, list] = {}
        for r in records:
            levels.setdefault(_level(r, factor), []).append(r)
        out[factor] = {}
        for level in sorted(levels, key=_sort_key):
            group = levels[level]
            reached = [r for r in group if r.outcome is not Outcome.SYSTEM_FAILURE]
            out[factor][level] = {
                "trials": len(reached),
                "successes": sum(r.outcome is Outcome.SUCCESS for r in reached),
                "rate": success_rate(group),
            }
    return out


def _sort_key(level: str):
    return (0, int(level), "") if level.isdigit() else (1, 0, level)


def failure_breakdown(records: Sequence[TrialRecord]) -> dict:
    """Shares of grasp and drop failures among process failures; ``{}`` when there are none."""
    c = Counter(r.outcome for r in records)
    n = c[Outcome.GRASP_FAILURE] + c[Outcome.DROP_FAILURE]
    if n == 0:
        return {}
    return {Outcome.GRASP_FAILURE.value: c[Outcome.GRASP_FAILURE] / n,
            Outcome.DROP_FAILURE.value: c[Outcome.DROP_FAILURE] / n}


def outcome_table(records: Sequence[TrialRecord]) -> dict:
    """Outcome counts per object and pick type, and grasp failures per scenario."""
    by_group: dict[str, Counter] = {}
    by_scenario: dict[str, int] = {}
    for r in records:
        key = f"{r.scenario.object_type.value}-{r.scenario.pick_type.value}"
        by_group.setdefault(key, Counter())[r.outcome.value] += 1
        if r.outcome is Outcome.GRASP_FAILURE:
            by_scenario[r.scenario.key] = by_scenario.get(r.scenario.key, 0) + 1
    groups = {k: {o.value: by_group[k][o.value] for o in Outcome} for k in sorted(by_group)}
    return {"object_pick": groups, "grasp_failures_by_scenario": dict(sorted(by_scenario.items()))}


def _pick_totals(records) -> dict:
    out = {}
    for pick in PickType:
        group = [r for r in records if r.scenario.pick_type is pick]
        out[pick.value] = {
            "attempts": sum(r.outcome is not Outcome.SYSTEM_FAILURE for r in group),
            "items_placed": sum(r.items_placed for r in group),
            "active_time_s": active_time(group),
        }
    return out


@dataclass(frozen=True)
class KpiReport:
    phase: PhaseMeans
    tph: Optional[float]
    uph: Optional[float]
    uph_single: Optional[float]
    uph_multi: Optional[float]
    success_rate: Optional[float]
    failure_breakdown: dict
    counts: dict
    breakdowns: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["phase"]["means"] = list(self.phase.means)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "KpiReport":
        p = dict(d["phase"])
        p["means"] = tuple(p["means"])
        return cls(PhaseMeans(**p), d["tph"], d["uph"], d["uph_single"], d["uph_multi"],
                   d["success_rate"], d["failure_breakdown"], d["counts"], d["breakdowns"])


def build_report(records: Sequence[TrialRecord], reference_total: Optional[float] = None) -> KpiReport:
    """Every KPI at once. An empty record list gives a report of zero counts."""
    c = Counter(r.outcome for r in records)
    counts = {
        "trials": len(records),
        "successes": c[Outcome.SUCCESS],
        "items_placed": sum(r.items_placed for r in records),
        "active_time_s": active_time(records),
        "reached_grasping": len(records) - c[Outcome.SYSTEM_FAILURE],
        "grasp_failures": c[Outcome.GRASP_FAILURE],
        "drop_failures": c[Outcome.DROP_FAILURE],
        "system_failures": c[Outcome.SYSTEM_FAILURE],
    }
    if records:
        phase = phase_means(records, reference_total)
    else:
        phase = PhaseMeans((None,) * len(PHASES), 0.0, None, reference_total, False)
    try:
        tph, uph = throughput(records)
    except ZeroTime:
        tph = uph = None
    single = [r for r in records if r.scenario.pick_type is PickType.SINGLE]
    multi = [r for r in records if r.scenario.pick_type is PickType.MULTI]
    breakdowns = {"success": success_breakdown(records), **outcome_table(records),
                  "pick_type": _pick_totals(records)}
    return KpiReport(phase, tph, uph, _uph_or_none(single), _uph_or_none(multi),
                     success_rate(records), failure_breakdown(records), counts, breakdowns)


# --- export ------------------------------------------------------------------------

REPORT_JSON = "kpi_report.json"
PHASE_CSV = "table_phases.csv"
THROUGHPUT_CSV = "table_throughput.csv"
SUMMARY_CSV = "kpi_summary.csv"
SUCCESS_CSV = "breakdown_success.csv"
OUTCOME_CSV = "breakdown_outcomes.csv"
SCENARIO_CSV = "breakdown_grasp_failures.csv"


def _g(x) -> str:
    return "" if x is None else f"{x:.9g}"


def one_decimal(x) -> str:
    return "" if x is None else f"{x:.1f}"


def _write_rows(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def export_report(report: KpiReport, out_dir, formats: Sequence[str] = ("csv", "json")) -> list[Path]:
    """Write the report; returns the paths written.

    CSV output: phase means, the throughput table, a KPI summary and the
    per-factor breakdowns. JSON output mirrors every field and reloads exactly.
    """
    out = Path(out_dir)
    written: list[Path] = []
    try:
        out.mkdir(parents=True, exist_ok=True)
        if "json" in formats:
            p = out / REPORT_JSON
            p.write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n")
            written.append(p)
        if "csv" in formats:
            ph = report.phase
            rows = [[name, _g(m)] for name, m in zip(PHASES, ph.means)]
            rows += [["Sum of means", _g(ph.sum_of_means)], ["Mean trial total", _g(ph.mean_total)]]
            if ph.reference_total is not None:
                rows.append(["Reference total", _g(ph.reference_total)])
            rows.append(["Discrepancy flagged", "yes" if ph.discrepancy else "no"])
            _write_rows(out / PHASE_CSV, ["Phase", "Mean [s]"], rows)

            c = report.counts
            _write_rows(out / THROUGHPUT_CSV, ["Metric", "Value"], [
                ["Total trials", c["trials"]],
                ["Successful trials", c["successes"]],
                ["Placed items", c["items_placed"]],
                ["Total time [s]", f"{c['active_time_s']:.2f}"],
                ["TPH", one_decimal(report.tph)],
                ["UPH", one_decimal(report.uph)],
            ])

            fb = report.failure_breakdown
            _write_rows(out / SUMMARY_CSV, ["Metric", "Value"], [
                ["Trials reaching grasping", c["reached_grasping"]],
                ["Success rate", _g(report.success_rate)],
                ["Grasp failure share", _g(fb.get(Outcome.GRASP_FAILURE.value))],
                ["Drop failure share", _g(fb.get(Outcome.DROP_FAILURE.value))],
                ["UPH single-item", one_decimal(report.uph_single)],
                ["UPH multi-item", one_decimal(report.uph_multi)],
            ])

            rows = [[factor, level, v["trials"], v["successes"], _g(v["rate"])]
                    for factor, levels in report.breakdowns.get("success", {}).items()
                    for level, v in levels.items()]
            _write_rows(out / SUCCESS_CSV, ["factor", "level", "trials", "successes", "success_rate"], rows)

            groups = report.breakdowns.get("object_pick", {})
            rows = [[k, *(v[o.value] for o in Outcome)] for k, v in groups.items()]
            _write_rows(out / OUTCOME_CSV, ["object_pick", *(o.value for o in Outcome)], rows)

            rows = [[k, v] for k, v in report.breakdowns.get("grasp_failures_by_scenario", {}).items()]
            _write_rows(out / SCENARIO_CSV, ["scenario", "grasp_failures"], rows)
            written += [out / n for n in (PHASE_CSV, THROUGHPUT_CSV, SUMMARY_CSV, SUCCESS_CSV,
                                          OUTCOME_CSV, SCENARIO_CSV)]
    except OSError as exc:
        raise IoFailure(f"cannot write report to {out}: {exc}") from exc
    return written


def read_report_json(path) -> KpiReport:
    try:
        return KpiReport.from_dict(json.loads(Path(path).read_text()))
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
