"""Scratch: compare candidate defaults on one seed. Not part of the package."""
import sys
import time
from pathlib import Path
import csv

from drq.harness import ExperimentConfig, run_single
from drq.nn import TrainConfig

name, grid, tol, d_epochs, seed, q_epochs = (
    sys.argv[1], int(sys.argv[2]), float(sys.argv[3]), int(sys.argv[4]),
    int(sys.argv[5]) if len(sys.argv) > 5 else 2024,
    int(sys.argv[6]) if len(sys.argv) > 6 else 200,
)
out = Path(f"/tmp/cmp_{name}")
out.mkdir(parents=True, exist_ok=True)
cfg = ExperimentConfig(
    runs=1, episodes=25, out_dir=str(out), seed=seed,
    feasibility_tolerance=tol, grid_size=grid, fit_sweeps=3,
    clamp_d_targets=len(sys.argv) > 7 and sys.argv[7] == "clamp",
    q_train=TrainConfig(epochs=q_epochs, batch_size=16, init_scale=8.0),
    d_train=TrainConfig(epochs=d_epochs, batch_size=16, init_scale=8.0),
    dqn_train=TrainConfig(epochs=200, batch_size=16, init_scale=8.0),
)
t0 = time.perf_counter()
run_single(cfg, 0)
dt = time.perf_counter() - t0
eps = list(csv.DictReader(open(out / "drq_run00_episodes.csv")))
ex = [r for r in eps if r["phase"] == "exploration" and int(r["episode"]) >= 2]
gr = [r for r in eps if r["phase"] == "greedy"]
viol = sum(int(r["violated"]) for r in ex)
vsteps = sum(int(r["violating_steps"]) for r in ex)
viol_eps = [r["episode"] for r in ex if r["violated"] == "1"]
gr_viol = sum(int(r["violated"]) for r in gr if int(r["episode"]) >= 2)
print(
    f"{name}: {dt:.0f}s | explore viol {viol}/24 (eps {viol_eps}) steps {vsteps}/3360"
    f" | greedy viol {gr_viol} | final greedy {float(gr[-1]['episode_return']):.2f}"
)
