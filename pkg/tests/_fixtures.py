"""Hand-built record sets with known KPI values."""

import itertools
import math

from multipick.executor import Outcome, ScenarioSpec, TrialRecord

TEMPLATE = (5.12, 10.37, 5.80, 20.12, 0.21)
PHASES_REACHED = {
    Outcome.SUCCESS: 5,
    Outcome.DROP_FAILURE: 5,
    Outcome.GRASP_FAILURE: 3,
    Outcome.SYSTEM_FAILURE: 0,
}


def _scenarios(pick):
    combos = itertools.cycle(itertools.product(("Lime", "Pickle"), (60, 75, 90), ("Parallel", "Concentric")))
    for rep, (obj, angle, layout) in enumerate(combos, start=1):
        yield ScenarioSpec(obj, pick, angle, layout, repetition=rep % 5 + 1, seed=rep)


def block(pick, counts, total_time, items):
    """Records for one pick type.

    ``counts`` maps outcome to trial count. Durations follow TEMPLATE, scaled so the
    block's active time is ``total_time``; placed items are spread over successes.
    """
    outcomes = [o for o, n in counts.items() for _ in range(n)]
    raw = math.fsum(sum(TEMPLATE[:PHASES_REACHED[o]]) for o in outcomes)
    scale = total_time / raw if raw else 0.0
    successes = counts.get(Outcome.SUCCESS, 0)
    per = [items // successes + (1 if k < items % successes else 0) for k in range(successes)] if successes else []
    out, k = [], 0
    for scenario, o in zip(_scenarios(pick), outcomes):
        n = PHASES_REACHED[o]
        durations = tuple(TEMPLATE[i] * scale if i < n else None for i in range(5))
        if o is Outcome.SUCCESS:
            placed = per[k]
            k += 1
            out.append(TrialRecord(scenario, durations, o, placed, placed))
        elif o is Outcome.DROP_FAILURE:
            out.append(TrialRecord(scenario, durations, o, 1, 0))
        else:
            out.append(TrialRecord(scenario, durations, o))
    return out


def single_block():
    return block("Single", {Outcome.SUCCESS: 25, Outcome.GRASP_FAILURE: 8, Outcome.DROP_FAILURE: 2,
                            Outcome.SYSTEM_FAILURE: 25}, 1576.20, 25)


def multi_block():
    return block("Multi", {Outcome.SUCCESS: 16, Outcome.GRASP_FAILURE: 10, Outcome.DROP_FAILURE: 2,
                           Outcome.SYSTEM_FAILURE: 32}, 1503.56, 31)


def table_two():
    """120 trials, 41 successes, 56 items, 3079.76 s of active time."""
    return single_block() + multi_block()


def failure_split(grasp=18, drop=4):
    return block("Multi", {Outcome.GRASP_FAILURE: grasp, Outcome.DROP_FAILURE: drop}, 100.0, 0)


def table_one(n=10):
    """Successful trials with exactly the TEMPLATE phase durations."""
    return [TrialRecord(s, TEMPLATE, Outcome.SUCCESS, 1, 1)
            for s, _ in zip(_scenarios("Single"), range(n))]
