"""Command-line entry point.

Subcommands:
    run        execute a campaign from a config file (or defaults)
    stats      aggregate an output directory into safety/performance stats
    dro-solve  one-shot offset computation from a sample file (debugging)
    gradcheck  finite-difference self-test of the network gradients

Exit codes: 0 success, 2 configuration error, 3 runtime error.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import dro, nn
from .harness import ConfigError, ExperimentConfig, compute_stats, parse_config, run_experiment


def _cmd_run(args) -> int:
    if args.config:
        cfg = parse_config(args.config)
    else:
        cfg = ExperimentConfig()
    overrides = {}
    if args.out is not None:
        overrides["out_dir"] = args.out
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.workers is not None:
        overrides["workers"] = args.workers
    if args.algorithm is not None:
        overrides["algorithm"] = args.algorithm
    if overrides:
        cfg = replace(cfg, **overrides)
    summary = run_experiment(cfg)
    algo = summary["stats"]["algorithms"][cfg.algorithm]
    print(f"{cfg.algorithm}: {cfg.runs} runs x {cfg.episodes} episodes -> {cfg.out_dir}")
    print(
        "exploration episode violation fraction (ep >= 2): "
        f"{algo['exploration']['episode_violation_fraction']:.6g}"
    )
    final = algo["final_episode_greedy_return"]
    print(
        f"final-episode greedy return: mean {final['mean']:.4f} "
        f"(min {final['min']:.4f}, max {final['max']:.4f})"
    )
    return 0


def _cmd_stats(args) -> int:
    stats = compute_stats(args.directory)
    for algo, s in stats["algorithms"].items():
        print(f"== {algo} ({s['runs']} runs, {s['episodes']} episodes)")
        for phase in ("exploration", "greedy"):
            p = s[phase]
            print(
                f"  {phase:11s} episodes 2..N: "
                f"{p['violating_episodes']}/{p['episodes_considered']} violated "
                f"({p['episode_violation_fraction']:.6g}); "
                f"timestep fraction {p['timestep_violation_fraction']:.6g}"
            )
        print("  greedy return by episode (mean [min, max]):")
        for row in s["greedy_return_by_episode"]:
            print(
                f"    ep {row['episode']:3d}: {row['mean']:9.4f} "
                f"[{row['min']:9.4f}, {row['max']:9.4f}]"
            )
    out_path = Path(args.json) if args.json else Path(args.directory) / "stats.json"
    with open(out_path, "w") as fh:
        json.dump({"stats": stats}, fh, indent=2, sort_keys=True)
    print(f"wrote {out_path}")
    return 0


def _cmd_dro_solve(args) -> int:
    try:
        samples = np.loadtxt(args.samples, ndmin=1)
    except OSError as exc:
        raise ConfigError(f"cannot read sample file {args.samples}: {exc}") from exc
    cfg = dro.WassersteinConfig(
        support_diameter=args.support_diameter,
        confidence=args.confidence,
        risk_level=args.risk_level,
        sigma_max=args.sigma_max,
        bisection_tol=args.tol,
    )
    off = dro.compute_offset(samples, cfg, epsilon=args.epsilon)
    print(f"n_samples = {off.n_samples}")
    print(f"epsilon = {off.epsilon!r}")
    print(f"mean = {off.mean!r}")
    print(f"std = {off.std!r}")
    print(f"sigma = {off.sigma!r}")
    print(f"offset = {off.offset!r}")
    if off.degenerate:
        print("note: zero-variance samples, offset equals the mean")
    if not off.feasible:
        print("note: sigma search infeasible at sigma_max")
    return 0


def _cmd_gradcheck(args) -> int:
    rng = np.random.default_rng(args.seed)
    worst = 0.0
    for _ in range(args.checks):
        n_in = int(rng.integers(1, 6))
        hidden = tuple(int(rng.integers(1, 7)) for _ in range(int(rng.integers(1, 4))))
        spec = nn.LayerSpec((n_in, *hidden, 1))
        params = nn.init_params(
            spec, nn.TrainConfig(init_scale=2.0, seed=int(rng.integers(2**31)))
        )
        x = rng.normal(size=n_in)
        target = float(rng.normal())
        analytic = nn.gradient(params, x, target)
        step = 1e-5
        for layer, (dw, db) in enumerate(analytic):
            for arrays, grad in ((params.weights, dw), (params.biases, db)):
                arr = arrays[layer]
                flat_grad = grad.ravel()
                for k in range(arr.size):
                    orig = arr.flat[k]
                    arr.flat[k] = orig + step
                    up = (nn.forward(params, x) - target) ** 2
                    arr.flat[k] = orig - step
                    down = (nn.forward(params, x) - target) ** 2
                    arr.flat[k] = orig
                    fd = (up - down) / (2 * step)
                    denom = max(abs(fd), abs(flat_grad[k]), 1e-6)
                    worst = max(worst, abs(fd - flat_grad[k]) / denom)
    print(f"gradcheck: {args.checks} random networks, worst relative error {worst:.3e}")
    if worst > 1e-4:
        print("gradcheck FAILED (tolerance 1e-4)")
        return 3
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="drq", description="safe Q-learning battery fast-charging experiments"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute an experiment campaign")
    p_run.add_argument("--config", help="flat key=value config file")
    p_run.add_argument("--out", help="output directory (overrides config)")
    p_run.add_argument("--seed", type=int, help="master seed (overrides config)")
    p_run.add_argument("--workers", type=int, help="parallel run workers")
    p_run.add_argument("--algorithm", choices=["drq", "dqn"], help="override algorithm")
    p_run.set_defaults(func=_cmd_run)

    p_stats = sub.add_parser("stats", help="aggregate an output directory")
    p_stats.add_argument("directory")
    p_stats.add_argument("--json", help="where to write the stats JSON")
    p_stats.set_defaults(func=_cmd_stats)

    p_dro = sub.add_parser("dro-solve", help="offset from a sample file (one value per line)")
    p_dro.add_argument("samples")
    p_dro.add_argument("--support-diameter", type=float, default=0.2)
    p_dro.add_argument("--confidence", type=float, default=0.98)
    p_dro.add_argument("--risk-level", type=float, default=0.02)
    p_dro.add_argument("--sigma-max", type=float, default=10.0)
    p_dro.add_argument("--tol", type=float, default=1e-4)
    p_dro.add_argument(
        "--epsilon", type=float, default=None,
        help="force the Wasserstein radius instead of deriving it from the sample count",
    )
    p_dro.set_defaults(func=_cmd_dro_solve)

    p_grad = sub.add_parser("gradcheck", help="finite-difference gradient self-test")
    p_grad.add_argument("--checks", type=int, default=100)
    p_grad.add_argument("--seed", type=int, default=0)
    p_grad.set_defaults(func=_cmd_gradcheck)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
