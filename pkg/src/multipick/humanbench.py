"""Human pick-and-pack demonstrations: data model, summary statistics and a
side-by-side comparison with robot KPIs.

CSV schema (header required, ``#`` lines ignored)::

    participant,item_type,mode,strategy,picks_per_punnet,punnet_time_s,wrist_rotation_max_deg

Each row is one packed punnet.
"""

from __future__ import annotations

import csv
import enum
import math
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

from .errors import EmptyMode, InvariantViolation, IoFailure, SchemaError

HUMAN_COLUMNS = ("participant", "item_type", "mode", "strategy", "picks_per_punnet",
                 "punnet_time_s", "wrist_rotation_max_deg")
ITEM_TYPES = ("brussels_sprouts", "shallot_onions", "strawberries", "sweet_peppers",
              "mandarins", "button_mushrooms", "baby_carrots", "plum_tomatoes")
PICKS_RANGE = (2, 12)


class Mode(str, enum.Enum):
    NATURAL = "Natural"
    SINGLE_PICK = "SinglePick"


class Strategy(str, enum.Enum):
    SCOOP_WIDE = "ScoopWide"
    SCOOP_PLUS_SINGLE = "ScoopPlusSingle"
    MULTI_PINCH = "MultiPinch"
    PINCH = "Pinch"


@dataclass(frozen=True)
class HumanTrial:
    participant: str
    item_type: str
    mode: Mode
    strategy: Strategy
    picks_per_punnet: int
    punnet_time: float  # s
    wrist_rotation_max: float  # deg

    def __post_init__(self):
        lo, hi = PICKS_RANGE
        if not lo <= self.picks_per_punnet <= hi:
            raise InvariantViolation(f"picks_per_punnet {self.picks_per_punnet} outside [{lo}, {hi}]")
        if self.mode is Mode.SINGLE_PICK and self.strategy is not Strategy.PINCH:
            raise InvariantViolation(f"SinglePick mode requires Pinch, got {self.strategy.value}")
        if self.item_type not in ITEM_TYPES:
            raise InvariantViolation(f"unknown item_type {self.item_type!r}")
        if not self.punnet_time > 0:
            raise InvariantViolation("punnet_time must be positive")


def _parse_row(row: dict) -> HumanTrial:
    try:
        mode = Mode(row["mode"])
        strategy = Strategy(row["strategy"])
        picks = int(row["picks_per_punnet"])
        t = float(row["punnet_time_s"])
        wrist = float(row["wrist_rotation_max_deg"])
    except ValueError as exc:
        raise SchemaError(str(exc)) from exc
    return HumanTrial(row["participant"], row["item_type"], mode, strategy, picks, t, wrist)


def ingest(path) -> list[HumanTrial]:
    """Read and validate a human-trial CSV. Errors name the offending file line."""
    try:
        with open(Path(path), newline="") as fh:
            lines = [(n, line) for n, line in enumerate(fh, start=1) if not line.startswith("#")]
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    if not lines:
        raise SchemaError(f"{path}: missing header")
    reader = csv.reader(line for _, line in lines)
    header = next(reader)
    if tuple(header) != HUMAN_COLUMNS:
        raise SchemaError(f"{path} line {lines[0][0]}: expected columns {','.join(HUMAN_COLUMNS)}")
    trials = []
    for (lineno, _), values in zip(lines[1:], reader):
        if len(values) != len(HUMAN_COLUMNS):
            raise SchemaError(f"{path} line {lineno}: expected {len(HUMAN_COLUMNS)} fields")
        row = dict(zip(HUMAN_COLUMNS, values))
        try:
            trials.append(_parse_row(row))
        except SchemaError as exc:
            raise SchemaError(f"{path} line {lineno}: {exc}") from exc
        except InvariantViolation as exc:
            raise InvariantViolation(f"{path} line {lineno}: {exc}") from exc
    return trials


def export_trials(path, trials: Sequence[HumanTrial], comment: Optional[str] = None) -> None:
    try:
        with open(Path(path), "w", newline="") as fh:
            if comment:
                for line in comment.splitlines():
                    fh.write(f"# {line}\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(HUMAN_COLUMNS)
            for t in trials:
                w.writerow([t.participant, t.item_type, t.mode.value, t.strategy.value,
                            t.picks_per_punnet, repr(float(t.punnet_time)),
                            repr(float(t.wrist_rotation_max))])
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


@dataclass(frozen=True)
class HumanSummary:
    strategy_distribution: dict  # strategy -> fraction of Natural trials
    uph: dict  # mode -> punnets per hour
    picks: dict  # mode -> mean picks per punnet
    uph_ratio: float  # Natural / SinglePick
    picks_reduction: float
    wrist_rotation_range: tuple  # deg

    def to_dict(self) -> dict:
        return {
            "strategy_distribution": dict(self.strategy_distribution),
            "uph": dict(self.uph),
            "picks": dict(self.picks),
            "uph_ratio": self.uph_ratio,
            "picks_reduction": self.picks_reduction,
            "wrist_rotation_range": list(self.wrist_rotation_range),
        }


def summarize(trials: Sequence[HumanTrial]) -> HumanSummary:
    """Strategy mix of Natural trials and per-mode throughput.

    UPH counts punnets per hour of summed punnet time. The picks reduction is
    one minus the ratio of mean picks per punnet, Natural over SinglePick.
    """
    by_mode = {m: [t for t in trials if t.mode is m] for m in Mode}
    for m, group in by_mode.items():
        if not group:
            raise EmptyMode(f"no trials in mode {m.value}")
    natural = by_mode[Mode.NATURAL]
    counts = Counter(t.strategy for t in natural)
    distribution = {s.value: counts[s] / len(natural) for s in Strategy}
    uph = {m.value: len(g) / (math.fsum(t.punnet_time for t in g) / 3600.0) for m, g in by_mode.items()}
    picks = {m.value: sum(t.picks_per_punnet for t in g) / len(g) for m, g in by_mode.items()}
    wrist = [t.wrist_rotation_max for t in trials]
    return HumanSummary(
        distribution, uph, picks,
        uph[Mode.NATURAL.value] / uph[Mode.SINGLE_PICK.value],
        1.0 - picks[Mode.NATURAL.value] / picks[Mode.SINGLE_PICK.value],
        (min(wrist), max(wrist)),
    )


@dataclass(frozen=True)
class Comparison:
    rows: tuple  # (metric, robot, human-or-None)
    has_human: bool
    diagnostics: tuple = ()

    def to_rows(self) -> list[list[str]]:
        def f(x):
            return "" if x is None else f"{x:.9g}"
        header = ["metric", "robot", "human"] if self.has_human else ["metric", "robot"]
        body = [[m, f(r), f(h)] if self.has_human else [m, f(r)] for m, r, h in self.rows]
        return [header, *body]


def _ratio(a, b):
    return None if a is None or not b else a / b


def compare(human: Optional[HumanSummary], robot) -> Comparison:
    """Robot single/multi figures next to the human SinglePick/Natural ones.

    Robot UPH counts items; human UPH counts punnets. Robot picks per unit is
    grasp attempts per placed item.
    """
    pt = robot.breakdowns.get("pick_type", {})
    ppu = {}
    for k in ("Single", "Multi"):
        v = pt.get(k, {})
        ppu[k] = _ratio(v.get("attempts"), v.get("items_placed"))
    robot_reduction = None
    if ppu["Single"] and ppu["Multi"] is not None:
        robot_reduction = 1.0 - ppu["Multi"] / ppu["Single"]
    h = human
    rows = (
        ("uph_single", robot.uph_single, h.uph[Mode.SINGLE_PICK.value] if h else None),
        ("uph_multi", robot.uph_multi, h.uph[Mode.NATURAL.value] if h else None),
        ("uph_ratio", _ratio(robot.uph_multi, robot.uph_single), h.uph_ratio if h else None),
        ("picks_per_unit_single", ppu["Single"], h.picks[Mode.SINGLE_PICK.value] if h else None),
        ("picks_per_unit_multi", ppu["Multi"], h.picks[Mode.NATURAL.value] if h else None),
        ("picks_reduction", robot_reduction, h.picks_reduction if h else None),
    )
    diag = () if h else ("no human data supplied; human columns omitted",)
    return Comparison(rows, h is not None, diag)


def write_comparison_csv(path, comparison: Comparison) -> None:
    try:
        with open(Path(path), "w", newline="") as fh:
            csv.writer(fh, lineterminator="\n").writerows(comparison.to_rows())
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc
