import json

import pytest
import yaml
from click.testing import CliRunner

from sandnet.cli import main
from sandnet.config import DEFAULT_CONFIG_ENV


@pytest.fixture
def runner():
    return CliRunner()


@pytest.fixture
def small_config_file(tmp_path):
    p = tmp_path / "config.yaml"
    p.write_text(
        yaml.safe_dump(
            {
                "surface_width_mm": 120.0,
                "surface_height_mm": 60.0,
                "duration_limit_s": 60.0,
                "output_dir": str(tmp_path / "out"),
            }
        )
    )
    return p


def test_plan_command(runner):
    result = runner.invoke(main, ["plan"])
    assert result.exit_code == 0, result.output
    body = json.loads(result.output)
    assert body["path_length_mm"] > 0
    assert len(body["waypoints"]) >= 4


def test_run_command_writes_artifacts(runner, small_config_file, tmp_path):
    result = runner.invoke(
        main,
        ["run", "--config", str(small_config_file), "--delay", "20", "--out", str(tmp_path / "art")],
    )
    assert result.exit_code == 0, result.output
    body = json.loads(result.output)
    assert body["complete"] is True
    assert (tmp_path / "art" / f"run-{body['config_hash']}" / "summary.json").is_file()


def test_config_via_environment(runner, small_config_file, monkeypatch):
    monkeypatch.setenv(DEFAULT_CONFIG_ENV, str(small_config_file))
    result = runner.invoke(main, ["plan"])
    assert result.exit_code == 0, result.output
    body = json.loads(result.output)
    # 120 mm long axis instead of the built-in 200 mm
    assert max(x for x, _ in body["waypoints"]) == 120.0


def test_emd_command(runner, tmp_path):
    mapfile = tmp_path / "dev.txt"
    mapfile.write_text("1.0 -1.0\n0.0 0.0\n")
    result = runner.invoke(main, ["emd", str(mapfile)])
    assert result.exit_code == 0, result.output
    assert json.loads(result.output)["work"] == pytest.approx(1.0, abs=1e-12)


def test_emd_command_missing_file(runner, tmp_path):
    result = runner.invoke(main, ["emd", str(tmp_path / "nope.txt")])
    assert result.exit_code != 0


def test_sweep_command(runner, small_config_file, tmp_path):
    result = runner.invoke(
        main,
        [
            "sweep", "--config", str(small_config_file),
            "--delays", "0,50", "--tools", "12.5",
            "--out", str(tmp_path / "sw"),
        ],
    )
    assert result.exit_code == 0, result.output
    rows = json.loads(result.output)["rows"]
    assert len(rows) == 2
    out_dir = json.loads(result.output)["out_dir"]
    assert (tmp_path / "sw").exists()
    assert any((tmp_path / "sw").glob("sweep-*/calibration.csv"))


def test_demo_loop_command_simple(runner, small_config_file, tmp_path):
    result = runner.invoke(
        main,
        [
            "demo-loop", "--config", str(small_config_file),
            "--mode", "simple", "--out", str(tmp_path / "demo"),
        ],
    )
    assert result.exit_code == 0, result.output
    body = json.loads(result.output)
    assert body["converged"] is True


def test_bad_config_is_graceful(runner, tmp_path):
    p = tmp_path / "bad.yaml"
    p.write_text("loss_rate: 7.0\n")
    result = runner.invoke(main, ["plan", "--config", str(p)])
    assert result.exit_code != 0
    assert "bad config" in result.output
