"""Regenerate the synthetic episode logs under fixtures/sample_logs/.

The fixture mimics a 10-run x 25-episode campaign for both algorithms with
zero-current policies (every return is exactly -35.0 over 140 steps):

  * drq: exactly 3 violating exploratory episodes among episodes 2..25
    across all runs (3/240 = 0.0125), clean greedy evaluations;
  * dqn: 12 violating exploratory episodes per run, a few greedy ones.

Deterministic, stdlib-only; run from the repository root:
    python fixtures/make_sample_logs.py
"""

import csv
from pathlib import Path

RUNS = 10
EPISODES = 25
STEPS = 140

HEADER = [
    "run", "episode", "phase", "steps", "episode_return", "cum_violation",
    "max_violation", "violated", "violating_steps", "vanilla_steps",
    "explore_steps", "greedy_steps", "fallback_steps",
]

DRQ_VIOLATIONS = {(2, 7), (5, 3), (9, 19)}  # (run, episode), 3 of 240


def drq_row(run, episode, phase):
    if phase == "exploration":
        if episode == 1:
            return [run, episode, phase, STEPS, -35.0, 2.4, 0.11, 1, 31, STEPS, 0, 0, 0]
        violated = (run, episode) in DRQ_VIOLATIONS
        return [
            run, episode, phase, STEPS, -35.0,
            0.04 if violated else 0.0,
            0.025 if violated else 0.0,
            int(violated),
            2 if violated else 0,
            0, 28, 112, 0,
        ]
    return [run, episode, phase, STEPS, -35.0, 0.0, 0.0, 0, 0, 0, 0, STEPS, 0]


def dqn_row(run, episode, phase):
    if phase == "exploration":
        violated = episode <= 13  # episodes 1..13: 1 unshielded + 12 counted
        return [
            run, episode, phase, STEPS, -35.0,
            1.5 if violated else 0.0,
            0.12 if violated else 0.0,
            int(violated),
            30 if violated else 0,
            0, 28, 112, 0,
        ]
    violated = 2 <= episode <= 7
    return [
        run, episode, phase, STEPS, -35.0,
        0.8 if violated else 0.0,
        0.09 if violated else 0.0,
        int(violated),
        12 if violated else 0,
        0, 0, STEPS, 0,
    ]


def main():
    out = Path(__file__).parent / "sample_logs"
    out.mkdir(exist_ok=True)
    for algo, row_fn in (("drq", drq_row), ("dqn", dqn_row)):
        for run in range(RUNS):
            path = out / f"{algo}_run{run:02d}_episodes.csv"
            with open(path, "w", newline="") as fh:
                writer = csv.writer(fh, lineterminator="\n")
                writer.writerow(HEADER)
                for episode in range(1, EPISODES + 1):
                    for phase in ("exploration", "greedy"):
                        writer.writerow(row_fn(run, episode, phase))
    print(f"wrote fixture logs to {out}")


if __name__ == "__main__":
    main()
