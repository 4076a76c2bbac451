import subprocess
import sys

import numpy as np
import pytest

from polyak_pg.cli import main
from polyak_pg.harness import read_metrics_csv
from polyak_pg.policies import TreePolicy, save_checkpoint

INI = """
[experiment]
env = twostep
policy = tree
train_seeds = 0, 1
eval_seeds = 100, 101, 102
[polyak]
m = 10
max_iters = 20
"""


@pytest.fixture
def ini(tmp_path):
    path = tmp_path / "exp.ini"
    path.write_text(INI)
    return path


def test_train_compare_eval_round_trip(ini, tmp_path, capsys):
    out = tmp_path / "runs"
    assert main(["train-rl", "--config", str(ini), "--out", str(out)]) == 0
    metrics = sorted(out.rglob("seed_*.csv"))
    assert len(metrics) == 2
    assert all(len(read_metrics_csv(p)) <= 20 for p in metrics)
    assert main(["compare", "--config", str(ini), "--set", f"experiment.out={out}"]) == 0
    assert (out / "report" / "eval_curves.csv").is_file()
    assert main(["eval", "--config", str(ini), "--out", str(out)]) == 0
    lines = (out / "eval_results.csv").read_text().splitlines()
    assert lines[0] == "checkpoint,eval_seed,return" and len(lines) == 1 + 2 * 3
    assert "mean greedy return" in capsys.readouterr().out


def test_single_seed_and_compare_filter(ini, tmp_path):
    out = tmp_path / "runs"
    assert main(["train-rl", "--config", str(ini), "--out", str(out), "--seed", "1"]) == 0
    assert [p.name for p in out.rglob("seed_*.csv")] == ["seed_1.csv"]
    rep = tmp_path / "rep"
    assert main(["compare", "--config", str(ini), "--set", f"experiment.out={out}",
                 "--seed", "1", "--out", str(rep)]) == 0
    assert (rep / "summary.csv").is_file()


def test_eval_explicit_checkpoint(ini, tmp_path):
    ck = tmp_path / "best.policy"
    save_checkpoint(TreePolicy(-30.0, 0.0, -30.0), ck)
    out = tmp_path / "ev"
    assert main(["eval", "--config", str(ini), "--checkpoint", str(ck), "--seed", "7",
                 "--out", str(out)]) == 0
    row = (out / "eval_results.csv").read_text().splitlines()[1].split(",")
    assert row[1:] == ["7", "1.0"]


def test_train_opt(tmp_path, capsys):
    out = tmp_path / "opt"
    code = main(["train-opt", "--seed", "0", "--out", str(out), "--set", "finite_sum.n=40",
                 "--set", "finite_sum.d=3", "--set", "finite_sum.iters=30"])
    assert code == 0
    assert (out / "dataset.csv").is_file() and (out / "loss_series_seed_0.csv").is_file()
    assert "twin" in capsys.readouterr().out


@pytest.mark.parametrize("argv", [
    ["train-rl", "--set", "experiment.env=pong"],
    ["train-rl", "--seed", "1000"],                  # collides with an eval seed
    ["eval", "--set", "experiment.out=/nonexistent/dir/x"],
    ["compare", "--set", "experiment.out=/nonexistent/dir/x"],
    ["train-opt", "--set", "finite_sum.methods=adagrad"],
])
def test_errors_exit_nonzero(argv, capsys):
    assert main(argv) != 0
    assert capsys.readouterr().err.startswith("error:")


def test_module_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "polyak_pg", "train-rl", "--set",
                          "polyak.c=0"], capture_output=True, text=True)
    assert res.returncode == 2 and "c must be positive" in res.stderr
    res = subprocess.run([sys.executable, "-m", "polyak_pg", "--help"], capture_output=True,
                         text=True)
    assert res.returncode == 0
    for sub in ("train-rl", "train-opt", "eval", "compare"):
        assert sub in res.stdout
