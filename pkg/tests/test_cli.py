"""CLI tests: run and check subcommands exercised in-process."""

import json

import pytest

from delaybandits.cli import main


@pytest.fixture
def config_path(tmp_path):
    path = tmp_path / "experiment.json"
    path.write_text(
        json.dumps(
            {
                "setting": "partially_concealed",
                "scenario": {
                    "loss_kind": "bernoulli_gap",
                    "delay_kind": "constant",
                    "horizon": 48,
                    "num_arms": 3,
                    "seed": 12,
                    "delay_value": 2,
                },
                "seeds": [1, 2, 3],
            }
        )
    )
    return path


def test_run_writes_outputs_and_exits_zero(config_path, tmp_path, capsys):
    out_dir = tmp_path / "results"
    code = main(["run", "--config", str(config_path), "--out", str(out_dir)])
    assert code == 0
    captured = capsys.readouterr().out
    assert "mean regret" in captured
    assert "[PASS]" in captured
    for name in ("episode_1.csv", "episode_2.csv", "episode_3.csv", "summary.json",
                 "regret_curves.png", "final_marginals.png"):
        assert (out_dir / name).exists(), name
    summary = json.loads((out_dir / "summary.json").read_text())
    assert summary["passed"] is True
    assert summary["seeds"] == [1, 2, 3]


def test_run_seed_count_override(config_path, tmp_path):
    out_dir = tmp_path / "override"
    code = main(
        ["run", "--config", str(config_path), "--out", str(out_dir), "--seeds", "2"]
    )
    assert code == 0
    assert (out_dir / "episode_1.csv").exists()
    assert (out_dir / "episode_2.csv").exists()
    assert not (out_dir / "episode_3.csv").exists()
    summary = json.loads((out_dir / "summary.json").read_text())
    assert summary["seeds"] == [1, 2]


def test_run_full_distribution_flag(config_path, tmp_path):
    out_dir = tmp_path / "dist"
    code = main(
        [
            "run", "--config", str(config_path), "--out", str(out_dir),
            "--seeds", "1", "--csv-full-dist",
        ]
    )
    assert code == 0
    header = (out_dir / "episode_1.csv").read_text().splitlines()[0]
    assert header == "round,action,loss,cum_regret,q_1,q_2,q_3"


def test_run_rejects_bad_seed_count(config_path):
    assert main(["run", "--config", str(config_path), "--seeds", "0"]) == 2


def test_run_missing_config_raises_with_context(tmp_path):
    with pytest.raises(ValueError, match="cannot read config"):
        main(["run", "--config", str(tmp_path / "absent.json")])


def test_check_requires_known_suite():
    with pytest.raises(SystemExit):
        main(["check", "--suite", "everything"])


def test_check_drift_quick_passes(capsys):
    code = main(["check", "--suite", "drift", "--quick"])
    assert code == 0
    out = capsys.readouterr().out
    assert out.count("[PASS]") == 8
    assert "FAIL" not in out


def test_check_solver_quick_passes(capsys):
    code = main(["check", "--suite", "solver", "--quick"])
    assert code == 0
    out = capsys.readouterr().out
    assert "FAIL" not in out
    assert "stationarity" in out
