from pathlib import Path

import numpy as np
import pytest

from drq_figures.render import (
    PlotSpec,
    SchemaError,
    load_episodes,
    main,
    performance_figure,
    render,
)

FIXTURE_DIR = Path(__file__).resolve().parents[2] / "fixtures" / "sample_logs"


def test_render_performance_from_fixture(tmp_path):
    out = render(PlotSpec(str(FIXTURE_DIR), "performance", str(tmp_path / "perf.png")))
    assert out.exists() and out.stat().st_size > 0


def test_render_safety_from_fixture(tmp_path):
    out = render(PlotSpec(str(FIXTURE_DIR), "safety", str(tmp_path / "safety.png")))
    assert out.exists() and out.stat().st_size > 0


def test_performance_flat_series_sits_at_minus_35():
    grouped = load_episodes(FIXTURE_DIR, algorithm="drq")
    fig = performance_figure(grouped)
    ax = fig.axes[0]
    series = [ln for ln in ax.lines if ln.get_label() == "drq"]
    assert len(series) == 1
    assert np.all(series[0].get_ydata() == -35.0)


def test_two_algorithm_directory_renders_two_series():
    fig = performance_figure(load_episodes(FIXTURE_DIR))
    labels = {ln.get_label() for ln in fig.axes[0].lines}
    assert {"drq", "dqn"} <= labels


def test_algorithm_filter():
    grouped = load_episodes(FIXTURE_DIR, algorithm="dqn")
    assert set(grouped) == {"dqn"}


def test_missing_directory_raises(tmp_path):
    with pytest.raises(SchemaError):
        load_episodes(tmp_path)


def test_schema_mismatch_raises(tmp_path):
    (tmp_path / "x_run00_episodes.csv").write_text("run,episode\n0,1\n")
    with pytest.raises(SchemaError, match="missing columns"):
        load_episodes(tmp_path)


def test_rendering_is_deterministic(tmp_path):
    a = render(PlotSpec(str(FIXTURE_DIR), "performance", str(tmp_path / "a.png")))
    b = render(PlotSpec(str(FIXTURE_DIR), "performance", str(tmp_path / "b.png")))
    assert a.read_bytes() == b.read_bytes()


def test_cli_roundtrip(tmp_path, capsys):
    code = main(
        ["--input", str(FIXTURE_DIR), "--kind", "safety",
         "--out", str(tmp_path / "s.png"), "--algorithm", "drq"]
    )
    assert code == 0
    assert (tmp_path / "s.png").exists()


def test_cli_bad_input_fails(tmp_path, capsys):
    code = main(["--input", str(tmp_path), "--kind", "performance",
                 "--out", str(tmp_path / "x.png")])
    assert code == 1
    assert "error" in capsys.readouterr().err
