from pathlib import Path

import numpy as np
import pytest

from drq.cli import main

FIXTURE_DIR = Path(__file__).parent.parent / "fixtures" / "sample_logs"


def test_run_missing_config_exits_2(capsys):
    code = main(["run", "--config", "definitely_missing.cfg"])
    assert code == 2
    assert "config error" in capsys.readouterr().err


def test_unknown_flag_shows_usage():
    with pytest.raises(SystemExit) as exc:
        main(["run", "--frobnicate"])
    assert exc.value.code == 2


def test_unknown_config_key_exits_2(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("not_a_key = 1\n")
    assert main(["run", "--config", str(cfg)]) == 2
    assert "unknown config keys" in capsys.readouterr().err


def test_run_tiny_campaign(tmp_path, capsys):
    cfg = tmp_path / "exp.cfg"
    cfg.write_text(
        "\n".join(
            [
                "algorithm = drq",
                "runs = 1",
                "episodes = 1",
                "horizon = 6",
                "grid_size = 6",
                "net.q_hidden = 3",
                "net.d_hidden = 3",
                "train.epochs = 2",
                "train.batch_size = 8",
            ]
        )
    )
    out = tmp_path / "results"
    assert main(["run", "--config", str(cfg), "--out", str(out), "--seed", "3"]) == 0
    assert (out / "drq_run00_steps.csv").exists()
    assert "final-episode greedy return" in capsys.readouterr().out


def test_stats_on_fixture(tmp_path, capsys):
    json_out = tmp_path / "stats.json"
    assert main(["stats", str(FIXTURE_DIR), "--json", str(json_out)]) == 0
    out = capsys.readouterr().out
    assert "3/240" in out
    assert "0.0125" in out
    assert json_out.exists()


def test_stats_on_empty_dir_exits_3(tmp_path, capsys):
    assert main(["stats", str(tmp_path)]) == 3
    assert "error" in capsys.readouterr().err


def test_dro_solve_two_sample_example(tmp_path, capsys):
    samples = tmp_path / "samples.txt"
    samples.write_text("1\n3\n")
    code = main(
        ["dro-solve", str(samples), "--epsilon", "0", "--sigma-max", "2",
         "--risk-level", "0.02"]
    )
    assert code == 0
    out = dict(
        line.split(" = ") for line in capsys.readouterr().out.splitlines() if " = " in line
    )
    assert float(out["mean"]) == 2.0
    assert float(out["std"]) == 1.0
    assert float(out["sigma"]) == pytest.approx(1.0, abs=1e-3)
    assert float(out["offset"]) == pytest.approx(3.0, abs=1e-3)


def test_dro_solve_degenerate_samples(tmp_path, capsys):
    samples = tmp_path / "zeros.txt"
    samples.write_text("0\n0\n0\n")
    assert main(["dro-solve", str(samples)]) == 0
    out = capsys.readouterr().out
    assert "offset = 0.0" in out
    assert "zero-variance" in out


def test_dro_solve_missing_file_exits_2(capsys):
    assert main(["dro-solve", "nope.txt"]) == 2


def test_gradcheck_passes(capsys):
    assert main(["gradcheck", "--checks", "5", "--seed", "1"]) == 0
    assert "worst relative error" in capsys.readouterr().out
