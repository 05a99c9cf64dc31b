"""Experiment orchestration: seeded multi-run campaigns for the safe agent
and the DQN baseline on the battery environment, CSV/JSON artifacts, and
safety/performance statistics recomputable from the CSVs alone.

Per-run outputs (all CSVs are byte-deterministic for a fixed config+seed):
    <algo>_run<ii>_steps.csv     one row per environment step
    <algo>_run<ii>_episodes.csv  one row per (episode, phase)
    <algo>_run<ii>_fits.csv      one row per constraint fit (DQN: per fit)
Wall-clock timings are nondeterministic and therefore live only in
summary.json, never in the CSVs.
"""

from __future__ import annotations

import csv
import json
import multiprocessing
import time
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from .agent import DqnAgent, DrqAgent, InputEncoder, run_episode, run_greedy_eval
from .battery import BatteryEnv, EcmParams, load_ocv
from .dro import WassersteinConfig
from .nn import TrainConfig


class ConfigError(ValueError):
    """Invalid or unreadable experiment configuration."""


@dataclass
class ExperimentConfig:
    algorithm: str = "drq"
    runs: int = 10
    episodes: int = 25
    horizon: int = 140
    seed: int = 2024
    workers: int = 1
    out_dir: str = "results"
    gamma: float = 0.5
    explore_prob: float = 0.2
    feasibility_tolerance: float = 0.0
    clamp_d_targets: bool = False
    fit_sweeps: int = 3
    td_scope: str = "episode"
    refit_per_step: bool = False
    grid_size: int = 24
    env: EcmParams = field(default_factory=EcmParams)
    ocv_path: str | None = None
    dro: WassersteinConfig = field(default_factory=WassersteinConfig)
    q_hidden: tuple[int, ...] = (10,)
    d_hidden: tuple[int, ...] = (2, 5, 5, 2)
    dqn_hidden: tuple[int, ...] = (10, 10)
    q_train: TrainConfig = field(default_factory=TrainConfig)
    d_train: TrainConfig = field(default_factory=TrainConfig)
    dqn_train: TrainConfig = field(default_factory=TrainConfig)

    def __post_init__(self):
        if self.algorithm not in ("drq", "dqn"):
            raise ConfigError(f"algorithm must be drq or dqn, got {self.algorithm!r}")
        if self.runs < 1 or self.episodes < 1 or self.horizon < 1:
            raise ConfigError("runs, episodes, and horizon must all be >= 1")
        if self.seed < 0:
            raise ConfigError("seed must be >= 0")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if not 0 < self.gamma <= 1:
            raise ConfigError("gamma must lie in (0, 1]")
        if not 0 <= self.explore_prob <= 1:
            raise ConfigError("explore_prob must lie in [0, 1]")
        if self.fit_sweeps < 1:
            raise ConfigError("fit_sweeps must be >= 1")
        if self.td_scope not in ("episode", "store"):
            raise ConfigError("td_scope must be 'episode' or 'store'")


_BOOL = {"true": True, "1": True, "yes": True, "false": False, "0": False, "no": False}


def _read_kv(path) -> dict[str, str]:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    kv: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        key, value = line.split("=", 1)
        key = key.strip()
        if key in kv:
            raise ConfigError(f"{path}:{lineno}: duplicate key {key!r}")
        kv[key] = value.strip()
    return kv


class _KvReader:
    def __init__(self, kv: dict[str, str]):
        self.kv = dict(kv)
        self.seen: set[str] = set()

    def _take(self, key: str) -> str | None:
        self.seen.add(key)
        return self.kv.get(key)

    def get_int(self, key, default):
        raw = self._take(key)
        if raw is None:
            return default
        try:
            return int(raw)
        except ValueError:
            raise ConfigError(f"{key}: expected integer, got {raw!r}")

    def get_float(self, key, default):
        raw = self._take(key)
        if raw is None:
            return default
        try:
            return float(raw)
        except ValueError:
            raise ConfigError(f"{key}: expected number, got {raw!r}")

    def get_str(self, key, default):
        raw = self._take(key)
        return default if raw is None or raw == "" else raw

    def get_bool(self, key, default):
        raw = self._take(key)
        if raw is None:
            return default
        try:
            return _BOOL[raw.lower()]
        except KeyError:
            raise ConfigError(f"{key}: expected true/false, got {raw!r}")

    def get_ints(self, key, default):
        raw = self._take(key)
        if raw is None:
            return default
        try:
            return tuple(int(p) for p in raw.split(",") if p.strip())
        except ValueError:
            raise ConfigError(f"{key}: expected comma-separated integers, got {raw!r}")

    def unknown(self) -> set[str]:
        return set(self.kv) - self.seen


def _train_cfg(r: _KvReader, prefix: str, base: TrainConfig) -> TrainConfig:
    return TrainConfig(
        learning_rate=r.get_float(f"{prefix}.learning_rate", base.learning_rate),
        epochs=r.get_int(f"{prefix}.epochs", base.epochs),
        batch_size=r.get_int(f"{prefix}.batch_size", base.batch_size),
        init_scale=r.get_float(f"{prefix}.init_scale", base.init_scale),
    )


def parse_config(path) -> ExperimentConfig:
    """Build an ExperimentConfig from a flat 'key = value' file with dotted
    section keys; unknown keys are rejected."""
    r = _KvReader(_read_kv(path))
    d = ExperimentConfig()  # defaults
    try:
        env = EcmParams(
            capacity=r.get_float("env.capacity", d.env.capacity),
            r1=r.get_float("env.r1", d.env.r1),
            c1=r.get_float("env.c1", d.env.c1),
            r0=r.get_float("env.r0", d.env.r0),
            dt=r.get_float("env.dt", d.env.dt),
            v_limit=r.get_float("env.v_limit", d.env.v_limit),
            i_min=r.get_float("env.i_min", d.env.i_min),
            i_max=r.get_float("env.i_max", d.env.i_max),
            soc_init=r.get_float("env.soc_init", d.env.soc_init),
            soc_target=r.get_float("env.soc_target", d.env.soc_target),
            noise_std=r.get_float("env.noise_std", d.env.noise_std),
        )
        dro = WassersteinConfig(
            support_diameter=r.get_float("dro.support_diameter", d.dro.support_diameter),
            confidence=r.get_float("dro.confidence", d.dro.confidence),
            risk_level=r.get_float("dro.risk_level", d.dro.risk_level),
            sigma_max=r.get_float("dro.sigma_max", d.dro.sigma_max),
            bisection_tol=r.get_float("dro.bisection_tol", d.dro.bisection_tol),
        )
        base_train = _train_cfg(r, "train", TrainConfig())
        cfg = ExperimentConfig(
            algorithm=r.get_str("algorithm", d.algorithm),
            runs=r.get_int("runs", d.runs),
            episodes=r.get_int("episodes", d.episodes),
            horizon=r.get_int("horizon", d.horizon),
            seed=r.get_int("seed", d.seed),
            workers=r.get_int("workers", d.workers),
            out_dir=r.get_str("out_dir", d.out_dir),
            gamma=r.get_float("gamma", d.gamma),
            explore_prob=r.get_float("explore_prob", d.explore_prob),
            feasibility_tolerance=r.get_float(
                "feasibility_tolerance", d.feasibility_tolerance
            ),
            clamp_d_targets=r.get_bool("clamp_d_targets", d.clamp_d_targets),
            fit_sweeps=r.get_int("fit_sweeps", d.fit_sweeps),
            td_scope=r.get_str("td_scope", d.td_scope),
            refit_per_step=r.get_bool("refit_per_step", d.refit_per_step),
            grid_size=r.get_int("grid_size", d.grid_size),
            env=env,
            ocv_path=r.get_str("env.ocv_path", None),
            dro=dro,
            q_hidden=r.get_ints("net.q_hidden", d.q_hidden),
            d_hidden=r.get_ints("net.d_hidden", d.d_hidden),
            dqn_hidden=r.get_ints("net.dqn_hidden", d.dqn_hidden),
            q_train=_train_cfg(r, "train.q", base_train),
            d_train=_train_cfg(r, "train.d", base_train),
            dqn_train=_train_cfg(r, "train.dqn", base_train),
        )
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    extra = r.unknown()
    if extra:
        raise ConfigError(f"unknown config keys: {sorted(extra)}")
    return cfg


def config_text(cfg: ExperimentConfig) -> str:
    """Serialize a config back to the flat key=value format."""
    lines = [
        f"algorithm = {cfg.algorithm}",
        f"runs = {cfg.runs}",
        f"episodes = {cfg.episodes}",
        f"horizon = {cfg.horizon}",
        f"seed = {cfg.seed}",
        f"workers = {cfg.workers}",
        f"out_dir = {cfg.out_dir}",
        f"gamma = {cfg.gamma!r}",
        f"explore_prob = {cfg.explore_prob!r}",
        f"feasibility_tolerance = {cfg.feasibility_tolerance!r}",
        f"clamp_d_targets = {str(cfg.clamp_d_targets).lower()}",
        f"fit_sweeps = {cfg.fit_sweeps}",
        f"td_scope = {cfg.td_scope}",
        f"refit_per_step = {str(cfg.refit_per_step).lower()}",
        f"grid_size = {cfg.grid_size}",
    ]
    for name in ("capacity", "r1", "c1", "r0", "dt", "v_limit", "i_min", "i_max",
                 "soc_init", "soc_target", "noise_std"):
        lines.append(f"env.{name} = {getattr(cfg.env, name)!r}")
    if cfg.ocv_path:
        lines.append(f"env.ocv_path = {cfg.ocv_path}")
    for name in ("support_diameter", "confidence", "risk_level", "sigma_max",
                 "bisection_tol"):
        lines.append(f"dro.{name} = {getattr(cfg.dro, name)!r}")
    lines.append("net.q_hidden = " + ",".join(map(str, cfg.q_hidden)))
    lines.append("net.d_hidden = " + ",".join(map(str, cfg.d_hidden)))
    lines.append("net.dqn_hidden = " + ",".join(map(str, cfg.dqn_hidden)))
    for prefix, tc in (("train.q", cfg.q_train), ("train.d", cfg.d_train),
                       ("train.dqn", cfg.dqn_train)):
        lines.append(f"{prefix}.learning_rate = {tc.learning_rate!r}")
        lines.append(f"{prefix}.epochs = {tc.epochs}")
        lines.append(f"{prefix}.batch_size = {tc.batch_size}")
        lines.append(f"{prefix}.init_scale = {tc.init_scale!r}")
    return "\n".join(lines) + "\n"


# -- running -----------------------------------------------------------------


def build_env(cfg: ExperimentConfig, noise_rng=None) -> BatteryEnv:
    table = load_ocv(cfg.ocv_path) if cfg.ocv_path else None
    if cfg.env.noise_std > 0 and noise_rng is None:
        raise ConfigError("env.noise_std > 0 requires a seeded noise stream")
    return BatteryEnv(cfg.env, table, cfg.grid_size, noise_rng)


def build_agent(cfg: ExperimentConfig, env: BatteryEnv, rng: np.random.Generator):
    encoder = InputEncoder.from_env(env)
    if cfg.algorithm == "drq":
        return DrqAgent(
            encoder,
            env.action_values,
            n_constraints=1,
            q_hidden=cfg.q_hidden,
            d_hidden=cfg.d_hidden,
            gamma=cfg.gamma,
            explore_prob=cfg.explore_prob,
            q_train=cfg.q_train,
            d_train=cfg.d_train,
            dro_cfg=cfg.dro,
            feasibility_tolerance=cfg.feasibility_tolerance,
            clamp_d_targets=cfg.clamp_d_targets,
            fit_sweeps=cfg.fit_sweeps,
            td_scope=cfg.td_scope,
            rng=rng,
        )
    return DqnAgent(
        encoder,
        env.action_values,
        n_constraints=1,
        hidden=cfg.dqn_hidden,
        gamma=cfg.gamma,
        explore_prob=cfg.explore_prob,
        train=cfg.dqn_train,
        fit_sweeps=cfg.fit_sweeps,
        rng=rng,
    )


def _fmt(x) -> str:
    if isinstance(x, float):
        return repr(x)
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    return str(x)


def _step_header(n_constraints: int) -> list[str]:
    head = ["run", "episode", "phase", "step", "mode", "action_index", "current",
            "soc", "v_rc", "voltage", "reward"]
    head += [f"g_{i}" for i in range(n_constraints)]
    head += [f"c_{i}" for i in range(n_constraints)]
    head += ["feasible_count", "fallback"]
    return head


EPISODE_HEADER = [
    "run", "episode", "phase", "steps", "episode_return", "cum_violation",
    "max_violation", "violated", "violating_steps", "vanilla_steps",
    "explore_steps", "greedy_steps", "fallback_steps",
]

FIT_HEADER = [
    "run", "episode", "constraint", "n_samples", "epsilon", "mean", "std",
    "sigma", "sigma_feasible", "offset", "d_loss", "q_loss",
]

DQN_FIT_HEADER = ["run", "episode", "q_loss"]


def _episode_row(run_idx: int, episode: int, phase: str, steps) -> list:
    violation = np.array([max(0.0, max(s.g)) for s in steps])
    modes = [s.mode for s in steps]
    return [
        run_idx,
        episode,
        phase,
        len(steps),
        float(sum(s.reward for s in steps)),
        float(violation.sum()),
        float(violation.max()),
        bool(violation.max() > 0),
        int(np.count_nonzero(violation > 0)),
        modes.count("vanilla"),
        modes.count("explore"),
        modes.count("greedy"),
        modes.count("fallback"),
    ]


def _write_step_rows(writer, run_idx, episode, phase, steps):
    for s in steps:
        row = [
            run_idx, episode, phase, s.step, s.mode, s.action_index,
            s.action_value, float(s.state[0]), float(s.state[1]),
            s.info.get("voltage", float("nan")), s.reward,
            *s.g, *s.c, s.feasible_count, s.fallback,
        ]
        writer.writerow([_fmt(v) for v in row])


def run_single(cfg: ExperimentConfig, run_idx: int) -> list[dict]:
    """Execute one seeded run; writes the three per-run CSVs and returns
    per-episode wall-clock timings."""
    out = Path(cfg.out_dir)
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, run_idx]))
    noise_rng = (
        np.random.default_rng(np.random.SeedSequence([cfg.seed, run_idx, 1]))
        if cfg.env.noise_std > 0
        else None
    )
    env = build_env(cfg, noise_rng)
    agent = build_agent(cfg, env, rng)
    prefix = f"{cfg.algorithm}_run{run_idx:02d}"
    timings = []
    with (
        open(out / f"{prefix}_steps.csv", "w", newline="") as f_steps,
        open(out / f"{prefix}_episodes.csv", "w", newline="") as f_eps,
        open(out / f"{prefix}_fits.csv", "w", newline="") as f_fits,
    ):
        w_steps = csv.writer(f_steps, lineterminator="\n")
        w_eps = csv.writer(f_eps, lineterminator="\n")
        w_fits = csv.writer(f_fits, lineterminator="\n")
        w_steps.writerow(_step_header(agent.n_constraints))
        w_eps.writerow(EPISODE_HEADER)
        w_fits.writerow(FIT_HEADER if cfg.algorithm == "drq" else DQN_FIT_HEADER)
        for episode in range(1, cfg.episodes + 1):
            t0 = time.perf_counter()
            steps, report = run_episode(
                agent, env, cfg.horizon, rng, cfg.refit_per_step
            )
            t1 = time.perf_counter()
            eval_steps = run_greedy_eval(agent, env, cfg.horizon)
            t2 = time.perf_counter()
            _write_step_rows(w_steps, run_idx, episode, "exploration", steps)
            _write_step_rows(w_steps, run_idx, episode, "greedy", eval_steps)
            w_eps.writerow(
                [_fmt(v) for v in _episode_row(run_idx, episode, "exploration", steps)]
            )
            w_eps.writerow(
                [_fmt(v) for v in _episode_row(run_idx, episode, "greedy", eval_steps)]
            )
            if cfg.algorithm == "drq":
                for i, off in enumerate(report.offsets):
                    w_fits.writerow(
                        [
                            _fmt(v)
                            for v in [
                                run_idx, episode, i, off.n_samples, off.epsilon,
                                off.mean, off.std, off.sigma, off.feasible,
                                off.offset, report.d_losses[i], report.q_loss,
                            ]
                        ]
                    )
            else:
                w_fits.writerow([_fmt(v) for v in [run_idx, episode, report.q_loss]])
            timings.append(
                {"run": run_idx, "episode": episode,
                 "train_seconds": t1 - t0, "eval_seconds": t2 - t1}
            )
    return timings


def run_experiment(cfg: ExperimentConfig) -> dict:
    """Run the full campaign, write artifacts, and return the summary dict
    (also saved as summary.json in the output directory)."""
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / f"{cfg.algorithm}_config_resolved.cfg").write_text(config_text(cfg))
    if cfg.workers > 1:
        with multiprocessing.Pool(cfg.workers) as pool:
            timing_lists = pool.starmap(
                run_single, [(cfg, i) for i in range(cfg.runs)]
            )
    else:
        timing_lists = [run_single(cfg, i) for i in range(cfg.runs)]
    stats = compute_stats(cfg.out_dir)
    summary = {
        "stats": stats,
        "timings": [t for run in timing_lists for t in run],
    }
    with open(out / "summary.json", "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
    return summary


# -- statistics ---------------------------------------------------------------


def _read_episode_rows(path: Path) -> list[dict]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        rows = list(reader)
    missing = set(EPISODE_HEADER) - set(reader.fieldnames or [])
    if missing:
        raise ValueError(f"{path}: missing episode columns {sorted(missing)}")
    return rows


def _phase_stats(rows: list[dict]) -> dict:
    considered = [r for r in rows if int(r["episode"]) >= 2]
    n = len(considered)
    violating = sum(1 for r in considered if r["violated"] == "1")
    steps = sum(int(r["steps"]) for r in considered)
    violating_steps = sum(int(r["violating_steps"]) for r in considered)
    return {
        "episodes_considered": n,
        "violating_episodes": violating,
        "episode_violation_fraction": violating / n if n else 0.0,
        "steps": steps,
        "violating_steps": violating_steps,
        "timestep_violation_fraction": violating_steps / steps if steps else 0.0,
    }


def compute_stats(out_dir) -> dict:
    """Aggregate safety and performance statistics from the per-run episode
    CSVs in a directory. Violation fractions cover episodes 2..N (the first
    episode of each run is unshielded by construction); performance curves
    cover every greedy evaluation."""
    out = Path(out_dir)
    files = sorted(out.glob("*_run*_episodes.csv"))
    if not files:
        raise ValueError(f"no *_episodes.csv files found under {out}")
    by_algo: dict[str, list[dict]] = {}
    for path in files:
        algo = path.name.split("_run")[0]
        by_algo.setdefault(algo, []).extend(_read_episode_rows(path))

    result: dict = {"algorithms": {}}
    for algo, rows in sorted(by_algo.items()):
        explore = [r for r in rows if r["phase"] == "exploration"]
        greedy = [r for r in rows if r["phase"] == "greedy"]
        episodes = sorted({int(r["episode"]) for r in rows})
        by_episode = []
        for ep in episodes:
            returns = [
                float(r["episode_return"]) for r in greedy if int(r["episode"]) == ep
            ]
            by_episode.append(
                {
                    "episode": ep,
                    "mean": float(np.mean(returns)),
                    "min": float(np.min(returns)),
                    "max": float(np.max(returns)),
                }
            )
        result["algorithms"][algo] = {
            "runs": len({r["run"] for r in rows}),
            "episodes": len(episodes),
            "exploration": _phase_stats(explore),
            "greedy": _phase_stats(greedy),
            "greedy_return_by_episode": by_episode,
            "final_episode_greedy_return": by_episode[-1] if by_episode else None,
        }
    return result
