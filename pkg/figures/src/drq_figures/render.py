"""Regenerate performance and safety plots from harness episode CSVs.

Reads only the documented `*_run*_episodes.csv` schema; never touches the
training code. Two figure kinds:

  performance  per-episode greedy-return distribution (mean line plus
               min/max band) per algorithm, with the no-input reference
  safety       cumulative and maximum constraint violation per episode,
               exploration vs. greedy series, one column per algorithm

Usage:
    drq-figures --input results/ --kind performance --out perf.png
    drq-figures --input results/ --kind safety --out safety.png --algorithm drq
"""

from __future__ import annotations

import argparse
import csv
import sys
from dataclasses import dataclass
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

NO_INPUT_RETURN = -35.0

REQUIRED_COLUMNS = {
    "run", "episode", "phase", "episode_return", "cum_violation",
    "max_violation", "violated",
}

EXPLORATION_STYLE = {"color": "black", "label": "exploration", "s": 14}
GREEDY_STYLE = {"color": "darkcyan", "label": "greedy", "s": 14}


class SchemaError(ValueError):
    """Episode CSV does not match the documented schema."""


@dataclass(frozen=True)
class PlotSpec:
    input_dir: str
    kind: str  # performance | safety
    out_path: str
    algorithm: str | None = None


def load_episodes(input_dir, algorithm: str | None = None) -> dict[str, list[dict]]:
    """Episode rows grouped by algorithm (taken from the file-name prefix)."""
    root = Path(input_dir)
    files = sorted(root.glob("*_run*_episodes.csv"))
    if algorithm:
        files = [f for f in files if f.name.split("_run")[0] == algorithm]
    if not files:
        raise SchemaError(f"no matching *_episodes.csv files under {root}")
    grouped: dict[str, list[dict]] = {}
    for path in files:
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            missing = REQUIRED_COLUMNS - set(reader.fieldnames or [])
            if missing:
                raise SchemaError(f"{path}: missing columns {sorted(missing)}")
            rows = []
            for raw in reader:
                rows.append(
                    {
                        "run": int(raw["run"]),
                        "episode": int(raw["episode"]),
                        "phase": raw["phase"],
                        "episode_return": float(raw["episode_return"]),
                        "cum_violation": float(raw["cum_violation"]),
                        "max_violation": float(raw["max_violation"]),
                        "violated": raw["violated"] == "1",
                    }
                )
        grouped.setdefault(path.name.split("_run")[0], []).extend(rows)
    return grouped


def _episode_series(rows, field):
    episodes = sorted({r["episode"] for r in rows})
    per_ep = [[r[field] for r in rows if r["episode"] == ep] for ep in episodes]
    return (
        np.array(episodes),
        np.array([np.mean(v) for v in per_ep]),
        np.array([np.min(v) for v in per_ep]),
        np.array([np.max(v) for v in per_ep]),
    )


def performance_figure(grouped: dict[str, list[dict]]):
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for algo, rows in sorted(grouped.items()):
        greedy = [r for r in rows if r["phase"] == "greedy"]
        eps, mean, lo, hi = _episode_series(greedy, "episode_return")
        (line,) = ax.plot(eps, mean, marker="o", markersize=3, label=algo)
        ax.fill_between(eps, lo, hi, alpha=0.2, color=line.get_color())
    ax.axhline(NO_INPUT_RETURN, color="gray", linestyle="--", linewidth=1,
               label="no input current")
    ax.set_xlabel("episode")
    ax.set_ylabel("greedy policy return")
    ax.set_title("Greedy policy performance across runs")
    ax.legend()
    fig.tight_layout()
    return fig


def safety_figure(grouped: dict[str, list[dict]]):
    algos = sorted(grouped)
    fig, axes = plt.subplots(
        2, len(algos), figsize=(6 * len(algos), 7), squeeze=False, sharex=True
    )
    for col, algo in enumerate(algos):
        rows = [r for r in grouped[algo] if r["episode"] >= 2]
        for row_idx, field in enumerate(("cum_violation", "max_violation")):
            ax = axes[row_idx][col]
            for phase, style in (
                ("exploration", EXPLORATION_STYLE),
                ("greedy", GREEDY_STYLE),
            ):
                pts = [r for r in rows if r["phase"] == phase]
                ax.scatter(
                    [r["episode"] for r in pts],
                    [r[field] for r in pts],
                    **style,
                )
            ax.set_ylabel(field.replace("_", " ") + " [V]")
            if row_idx == 0:
                ax.set_title(f"{algo}: safety from episode 2")
                ax.legend()
            else:
                ax.set_xlabel("episode")
    fig.tight_layout()
    return fig


def render(spec: PlotSpec) -> Path:
    """Build the requested figure and write it to spec.out_path."""
    grouped = load_episodes(spec.input_dir, spec.algorithm)
    if spec.kind == "performance":
        fig = performance_figure(grouped)
    elif spec.kind == "safety":
        fig = safety_figure(grouped)
    else:
        raise ValueError(f"unknown figure kind {spec.kind!r}")
    out = Path(spec.out_path)
    out.parent.mkdir(parents=True, exist_ok=True)
    with matplotlib.rc_context({"svg.hashsalt": "drq-figures"}):
        fig.savefig(out, dpi=150, metadata=_stable_metadata(out.suffix))
    plt.close(fig)
    return out


def _stable_metadata(suffix: str):
    # strip creation timestamps so identical inputs give identical bytes
    if suffix == ".png":
        return {"Software": "drq-figures"}
    if suffix == ".svg":
        return {"Date": None}
    return None


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="drq-figures", description=__doc__.splitlines()[0]
    )
    parser.add_argument("--input", required=True, help="harness output directory")
    parser.add_argument("--kind", required=True, choices=["performance", "safety"])
    parser.add_argument("--out", required=True, help="image path (.png or .svg)")
    parser.add_argument("--algorithm", help="only plot this algorithm prefix")
    args = parser.parse_args(argv)
    try:
        path = render(PlotSpec(args.input, args.kind, args.out, args.algorithm))
    except (SchemaError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
