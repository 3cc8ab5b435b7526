import json
import os
import subprocess
import sys

import pytest

from bvmlab.cli import main

CONFIGS = os.path.join(os.path.dirname(__file__), os.pardir, "configs")


def _write(tmp_path, cfg, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(cfg))
    return str(p)


TV = {"experiment": "tv", "family": "multinomial", "sweep": [{"d": 1, "n": 100}],
      "metrics": ["tv", {"alpha-moment": {"alpha": 2}}], "seed": 0, "params": {"data": "centered"}}


def test_tv_sweep_writes_csv_and_plot(tmp_path, capsys):
    out = tmp_path / "out"
    code = main(["tv-sweep", "--config", _write(tmp_path, TV), "--out", str(out), "--plot", "tv"])
    assert code == 0
    assert (out / "tv.csv").exists() and (out / "tv-tv.dat").exists()
    assert "tv = " in capsys.readouterr().out


def test_bad_config_exit_code(tmp_path, capsys):
    code = main(["tv-sweep", "--config", _write(tmp_path, {"experiment": "x", "family": "nope"})])
    assert code == 1
    err = capsys.readouterr().err
    assert "family" in err and "seed" in err


def test_subcommand_without_its_metrics_is_config_error(tmp_path):
    assert main(["diagnose", "--config", _write(tmp_path, TV)]) == 1
    assert main(["curved-sweep", "--config", _write(tmp_path, TV)]) == 1


def test_error_rows_exit_code(tmp_path):
    cfg = {"experiment": "a", "family": "multinomial", "sweep": [{"d": 1, "n": 100}],
           "metrics": [{"lemma-audits": {"C1": 0.001}}], "seed": 0}
    assert main(["audit", "--config", _write(tmp_path, cfg)]) == 3


def test_seed_override_and_workers_validation(tmp_path):
    path = _write(tmp_path, TV)
    assert main(["tv-sweep", "--config", path, "--seed", "-3"]) == 1
    assert main(["tv-sweep", "--config", path, "--workers", "0"]) == 1


def test_el_solve_flags_and_infeasible(capsys):
    assert main(["el-solve", "--support", "0", "1", "--eta", "0.3"]) == 0
    out = capsys.readouterr().out
    assert "0.7 0.3" in out and "stationarity" in out
    assert main(["el-solve", "--support", "0", "1", "--eta", "1.5"]) == 2
    assert "Infeasible" in capsys.readouterr().err


def test_growth_subcommand(tmp_path, capsys):
    assert main(["growth", "--config", os.path.join(CONFIGS, "growth.json"), "--out", str(tmp_path)]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["verdicts"]["d^4/n"] == "decreasing"


def test_shipped_configs_validate():
    from bvmlab.harness import ExperimentConfig

    for name in ("tv-sweep", "diagnose", "curved-sweep", "audit", "growth"):
        ExperimentConfig.load(os.path.join(CONFIGS, f"{name}.json"))


def test_console_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "bvmlab.cli", "el-solve", "--config",
                          os.path.join(CONFIGS, "el-solve.json")], capture_output=True, text=True)
    assert res.returncode == 0
    assert "converged" in res.stdout
