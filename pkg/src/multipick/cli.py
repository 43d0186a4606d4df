"""Command-line entry point.

    multipick run [--config PATH] [--seed N] [--jobs N] [--scenario FILTER] [--reps N] [--out DIR] [--human [PATH]]
    multipick kpi TRIALS_CSV [--config PATH] [--out DIR] [--human [PATH]]

``MULTIPICK_CONFIG``, ``MULTIPICK_SEED``, ``MULTIPICK_JOBS`` and ``MULTIPICK_OUT``
stand in for the matching flags; explicit flags win. Exit status is 0 whenever
the run completes, even if trials fail; 2 on configuration errors, 1 on I/O or
schema errors.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import shutil
import sys
import tempfile
from dataclasses import replace
from pathlib import Path
from typing import Optional

from . import humanbench, kpi
from .config import dump_config, load_config
from .errors import ConfigError, EmptyMode, InvariantViolation, IoFailure, SchemaError
from .executor import (RunConfig, build_matrix, read_records_csv, run_matrix, write_records_csv,
                       write_records_json)

log = logging.getLogger("multipick")

ENV_PREFIX = "MULTIPICK_"
BUNDLED_HUMAN = Path(__file__).with_name("data") / "human_synthetic.csv"
TRIALS_CSV = "trials.csv"
TRIALS_JSON = "trials.json"
CONFIG_USED = "config_used.yaml"
COMPARISON_CSV = "human_comparison.csv"
HUMAN_SUMMARY = "human_summary.json"

_FILTER_KEYS = {"object": "objects", "pick": "picks", "angle": "angles", "config": "configs"}


def _label(level) -> str:
    return str(getattr(level, "value", level))


def parse_scenario_filter(text: str, matrix):
    """Restrict matrix levels, e.g. ``object=pickle,angle=60|90``. Case-insensitive."""
    updates = {}
    for part in filter(None, (p.strip() for p in text.split(","))):
        key, sep, value = part.partition("=")
        field_name = _FILTER_KEYS.get(key.strip().lower())
        if not sep or field_name is None:
            raise ConfigError(f"bad scenario filter term {part!r}; keys are {', '.join(_FILTER_KEYS)}")
        levels = getattr(matrix, field_name)
        chosen = []
        for v in value.split("|"):
            match = [lv for lv in levels if _label(lv).lower() == v.strip().lower()]
            if not match:
                raise ConfigError(f"{key}={v!r} is not one of {', '.join(map(_label, levels))}")
            chosen.extend(m for m in match if m not in chosen)
        updates[field_name] = tuple(chosen)
    return replace(matrix, **updates)


def _env(name: str) -> Optional[str]:
    v = os.environ.get(ENV_PREFIX + name)
    return v if v not in (None, "") else None


def _env_int(name: str) -> Optional[int]:
    v = _env(name)
    if v is None:
        return None
    try:
        return int(v)
    except ValueError:
        raise ConfigError(f"{ENV_PREFIX}{name} must be an integer, got {v!r}") from None


def resolve_config(args) -> RunConfig:
    """Config file, then environment, then flags."""
    config = load_config(args.config or _env("CONFIG"))
    seed = args.seed if args.seed is not None else _env_int("SEED")
    jobs = args.jobs if getattr(args, "jobs", None) is not None else _env_int("JOBS")
    out = args.out or _env("OUT")
    try:
        if seed is not None:
            config = replace(config, master_seed=seed)
        if jobs is not None:
            config = replace(config, jobs=jobs)
        if out is not None:
            config = replace(config, output_dir=str(out))
        matrix = config.matrix
        if getattr(args, "scenario", None):
            matrix = parse_scenario_filter(args.scenario, matrix)
        if getattr(args, "reps", None) is not None:
            matrix = replace(matrix, repetitions=args.reps)
        return replace(config, matrix=matrix)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _load_human(path) -> Optional[humanbench.HumanSummary]:
    if path is None:
        log.info("no human data supplied; comparison lists robot figures only")
        return None
    return humanbench.summarize(humanbench.ingest(path))


class _Staging:
    """Write into a scratch directory, then move every file into place at once."""

    def __init__(self, out: Path):
        self.out = out

    def __enter__(self) -> Path:
        try:
            self.out.parent.mkdir(parents=True, exist_ok=True)
            self.tmp = Path(tempfile.mkdtemp(prefix=".multipick-", dir=self.out.parent))
        except OSError as exc:
            raise IoFailure(f"cannot prepare {self.out}: {exc}") from exc
        return self.tmp

    def __exit__(self, exc_type, exc, tb):
        try:
            if exc_type is None:
                self.out.mkdir(parents=True, exist_ok=True)
                for p in sorted(self.tmp.iterdir()):
                    os.replace(p, self.out / p.name)
        except OSError as err:
            raise IoFailure(f"cannot write {self.out}: {err}") from err
        finally:
            shutil.rmtree(self.tmp, ignore_errors=True)
        return False


def _emit_reports(dest: Path, report, human) -> None:
    kpi.export_report(report, dest)
    comparison = humanbench.compare(human, report)
    humanbench.write_comparison_csv(dest / COMPARISON_CSV, comparison)
    for d in comparison.diagnostics:
        log.info(d)
    if human is not None:
        (dest / HUMAN_SUMMARY).write_text(json.dumps(human.to_dict(), indent=2, sort_keys=True) + "\n")


def _summary_line(report) -> str:
    c = report.counts
    f = kpi.one_decimal
    return (f"{c['trials']} trials, {c['successes']} successful, {c['items_placed']} items placed; "
            f"TPH {f(report.tph) or '-'}, UPH {f(report.uph) or '-'}")


def cmd_run(args) -> int:
    config = resolve_config(args)
    human = _load_human(args.human)
    scenarios = build_matrix(config.matrix, config.master_seed)
    log.info("running %d trials with %d worker(s)", len(scenarios), config.jobs)
    records = run_matrix(config=config, scenarios=scenarios)
    report = kpi.build_report(records, config.reference_phase_total)
    out = Path(config.output_dir)
    with _Staging(out) as dest:
        try:
            write_records_csv(records, dest / TRIALS_CSV)
            write_records_json(records, dest / TRIALS_JSON)
            dump_config(config, dest / CONFIG_USED)
        except OSError as exc:
            raise IoFailure(str(exc)) from exc
        _emit_reports(dest, report, human)
    print(_summary_line(report))
    print(f"outputs in {out}")
    return 0


def cmd_kpi(args) -> int:
    config = load_config(args.config or _env("CONFIG"))
    human = _load_human(args.human)
    records = read_records_csv(args.trials)
    report = kpi.build_report(records, config.reference_phase_total)
    out = Path(args.out or _env("OUT") or Path(args.trials).parent / "kpi")
    with _Staging(out) as dest:
        _emit_reports(dest, report, human)
    print(_summary_line(report))
    print(f"outputs in {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="multipick", description="Produce pick-and-place benchmark simulator.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    human_kw = dict(nargs="?", const=str(BUNDLED_HUMAN), default=None, metavar="PATH",
                    help="human-trial CSV; without PATH the bundled synthetic set is used")

    run = sub.add_parser("run", help="simulate the experiment matrix")
    run.add_argument("--config", type=Path)
    run.add_argument("--seed", type=int)
    run.add_argument("--jobs", type=int)
    run.add_argument("--scenario", help="e.g. object=pickle,pick=single,angle=90,config=concentric")
    run.add_argument("--reps", type=int)
    run.add_argument("--out", type=Path)
    run.add_argument("--human", **human_kw)
    run.set_defaults(func=cmd_run)

    k = sub.add_parser("kpi", help="recompute KPIs from a trial CSV")
    k.add_argument("trials", type=Path)
    k.add_argument("--config", type=Path, help="supplies the reference phase total")
    k.add_argument("--out", type=Path)
    k.add_argument("--human", **human_kw)
    k.set_defaults(func=cmd_kpi)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (IoFailure, SchemaError, InvariantViolation, EmptyMode) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
