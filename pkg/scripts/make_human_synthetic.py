#!/usr/bin/env python3
"""Regenerate the bundled synthetic human-demonstration dataset.

The rows are invented. Counts and totals are fixed so the aggregate statistics
come out at known values:

    Natural     24 punnets, strategies 12/7/5, 80 picks, 1000 s
    SinglePick  24 punnets, all Pinch,          250 picks, 1700 s

giving UPH 86.4 vs 50.8 (ratio 1.70) and a picks reduction of 0.68.
"""

import argparse
from pathlib import Path

import numpy as np

from multipick.humanbench import ITEM_TYPES, HumanTrial, Mode, Strategy, export_trials, summarize

OUT = Path(__file__).resolve().parents[1] / "src" / "multipick" / "data" / "human_synthetic.csv"
N_PARTICIPANTS = 6


def _times(picks, total, rng):
    # time roughly proportional to picks, rescaled to hit the total exactly at 10 ms resolution
    raw = np.asarray(picks, float) * rng.uniform(0.85, 1.15, size=len(picks))
    cs = np.round(raw / raw.sum() * total * 100).astype(int)
    cs[-1] += int(round(total * 100)) - cs.sum()
    return [int(c) / 100 for c in cs]


def build(seed: int = 7) -> list[HumanTrial]:
    rng = np.random.default_rng(seed)
    natural_strategies = ([Strategy.SCOOP_WIDE] * 12 + [Strategy.SCOOP_PLUS_SINGLE] * 7
                          + [Strategy.MULTI_PINCH] * 5)
    natural_picks = [3] * 16 + [4] * 8
    single_picks = [10] * 14 + [11] * 10
    rng.shuffle(natural_picks)
    rng.shuffle(single_picks)

    trials = []
    for mode, strategies, picks, total in (
        (Mode.NATURAL, natural_strategies, natural_picks, 1000.0),
        (Mode.SINGLE_PICK, [Strategy.PINCH] * 24, single_picks, 1700.0),
    ):
        times = _times(picks, total, rng)
        for k, (s, p, t) in enumerate(zip(strategies, picks, times)):
            trials.append(HumanTrial(
                participant=f"P{k % N_PARTICIPANTS + 1}",
                item_type=ITEM_TYPES[k % len(ITEM_TYPES)],
                mode=mode,
                strategy=s,
                picks_per_punnet=p,
                punnet_time=t,
                wrist_rotation_max=round(float(rng.uniform(30.0, 35.0)), 1),
            ))
    return trials


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", type=Path, default=OUT)
    ap.add_argument("--seed", type=int, default=7)
    args = ap.parse_args()
    trials = build(args.seed)
    export_trials(args.out, trials, comment="SYNTHETIC DATA: generated by scripts/make_human_synthetic.py, "
                                            "not recorded from participants")
    s = summarize(trials)
    print(f"wrote {len(trials)} rows to {args.out}")
    print(f"distribution {s.strategy_distribution}")
    print(f"uph {s.uph}  ratio {s.uph_ratio:.4f}  picks reduction {s.picks_reduction:.4f}")


if __name__ == "__main__":
    main()
