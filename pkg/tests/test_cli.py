import subprocess
import sys

import pytest

from softpg.cli import main
from softpg.envs import chain3, format_mdp

SMALL = """\
env = chain
hidden =
horizon = 64
minibatch = 32
epochs = 2
total_steps = 128
eval_episodes = 2
env_max_steps = 20
"""


@pytest.fixture
def small_config(tmp_path):
    path = tmp_path / "small.txt"
    path.write_text(SMALL)
    return path


def test_train_then_eval(tmp_path, small_config, capsys):
    out = tmp_path / "run"
    assert main(["train", "--config", str(small_config), "--alpha", "0.05", "--seed", "2",
                 "--out", str(out)]) == 0
    assert "eval" in capsys.readouterr().out
    assert "alpha = 0.05" in (out / "config.txt").read_text()
    assert main(["eval", "--policy", str(out / "policy.bin"), "--env", "chain",
                 "--episodes", "3"]) == 0
    assert "mean" in capsys.readouterr().out


def test_train_rejects_unknown_config_key(tmp_path, capsys):
    bad = tmp_path / "bad.txt"
    bad.write_text("algo = sppo\nclip_range = 0.1\n")
    assert main(["train", "--config", str(bad), "--out", str(tmp_path / "x")]) == 2
    assert "unknown config key" in capsys.readouterr().err


def test_compare(tmp_path, small_config, capsys):
    assert main(["compare", "--config-a", str(small_config), "--config-b", str(small_config),
                 "--seeds", "3", "--out", str(tmp_path / "cmp")]) == 0
    assert "no difference" in capsys.readouterr().out


def test_oracle(tmp_path, capsys):
    path = tmp_path / "chain.mdp"
    path.write_text(format_mdp(chain3()))
    assert main(["oracle", "--mdp", str(path), "--alpha", "0.5", "--samples", "20000"]) == 0
    out = capsys.readouterr().out
    assert "finite-difference gradient" in out and "J =" in out


def test_gradcheck_small(capsys):
    assert main(["gradcheck", "--points", "2"]) == 0
    assert "all passed" in capsys.readouterr().out


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "softpg", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0
    for cmd in ("train", "eval", "compare", "oracle", "gradcheck"):
        assert cmd in proc.stdout
