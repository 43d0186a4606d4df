#!/usr/bin/env python3
"""Run the full 24-scenario x 5-repetition matrix and print the headline tables.

Thin wrapper over ``multipick run``; extra arguments are passed through, e.g.
``python scripts/run_matrix.py --jobs 4 --out results/matrix``.
"""

import json
import sys
import time
from pathlib import Path

from multipick import cli
from multipick.executor import PHASES


def _out_dir(argv):
    if "--out" in argv:
        return Path(argv[argv.index("--out") + 1])
    return Path("results/matrix")


def main(argv):
    out = _out_dir(argv)
    if "--out" not in argv:
        argv = [*argv, "--out", str(out)]
    t0 = time.perf_counter()
    code = cli.main(["run", "--human", *argv])
    if code:
        return code
    report = json.loads((out / "kpi_report.json").read_text())
    ph = report["phase"]
    print(f"\nmatrix finished in {time.perf_counter() - t0:.1f} s")
    print("phase means [s]")
    for name, m in zip(PHASES, ph["means"]):
        print(f"  {name:<15} {m:6.2f}" if m is not None else f"  {name:<15}      -")
    print(f"  {'sum of means':<15} {ph['sum_of_means']:6.2f}  (reference {ph['reference_total']}, "
          f"flagged: {'yes' if ph['discrepancy'] else 'no'})")
    print("outcomes")
    for group, counts in report["breakdowns"]["object_pick"].items():
        print(f"  {group:<14} " + "  ".join(f"{k} {v}" for k, v in counts.items()))
    return 0


if __name__ == "__main__":
    raise SystemExit(main(sys.argv[1:]))
