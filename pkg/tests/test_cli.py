from __future__ import annotations

import subprocess
import sys

import pytest

from twoch import cli
from twoch.modulation import ModulationError, ModulationModel

FAST = ["--override", "grid.n=2048", "--override", "stepper.dt=2e-3",
        "--override", "stepper.t_end=0.4", "--override", "stepper.checkpoint_stride=100"]


def test_propagate_writes_outputs(tmp_path, capsys):
    code = cli.main(["propagate", "--out", str(tmp_path), "--override", "stepper.t_end=0.5"])
    assert code == 0
    out = capsys.readouterr().out
    assert "status: ok" in out and "shape_error:" in out
    assert (tmp_path / "config.txt").exists()
    assert (tmp_path / "diagnostics.csv").exists()


def test_config_file_and_seed(tmp_path, capsys):
    cfgfile = tmp_path / "run.cfg"
    cfgfile.write_text("grid.n = 2048\nstepper.dt = 2e-3\nstepper.t_end = 0.4\n"
                       "stepper.checkpoint_stride = 100\nsweep.eps = 1e-4, 4e-4\n")
    code = cli.main(["stability", "--config", str(cfgfile), "--seed", "18446744073709551615",
                     "--out", str(tmp_path / "o")])
    assert code == 0
    assert "perturb.seed = 18446744073709551615" in (tmp_path / "o" / "config.txt").read_text()
    assert "statuses: ok,ok,ok" in capsys.readouterr().out


@pytest.mark.parametrize("args", [
    ["stability", "--override", "bogus.key=1"],
    ["stability", "--override", "perturb.eps=-1"],
    ["stability", "--seed", "-3"],
    ["stability", "--config", "/nonexistent.cfg"],
    ["propagate", "--override", "train.speeds=2,3"],
])
def test_config_errors_exit_2(args, tmp_path):
    assert cli.main(args + ["--out", str(tmp_path)]) == 2


def test_cfl_violation_exits_3(tmp_path):
    code = cli.main(["propagate", "--out", str(tmp_path), "--override", "stepper.dt=0.2",
                     "--override", "stepper.t_end=1"])
    assert code == 3


def test_fit_failure_exits_4(tmp_path, monkeypatch):
    def refuse(self, s, guess, **kw):
        raise ModulationError("forced")

    monkeypatch.setattr(ModulationModel, "fit", refuse)
    assert cli.main(["monotonicity", "--out", str(tmp_path)] + FAST) == 4


def test_coercivity_and_profile_dump(tmp_path, capsys):
    code = cli.main(["coercivity", "--out", str(tmp_path / "c"), "--override", "coercivity.speeds=2",
                     "--override", "coercivity.n=768", "--override", "coercivity.refine=false"])
    assert code == 0
    assert "all_positive: True" in capsys.readouterr().out
    assert cli.main(["profile-dump", "--out", str(tmp_path / "p")]) == 0
    assert (tmp_path / "p" / "profile.txt").exists()
    assert cli.main(["coercivity", "--out", str(tmp_path), "--override", "coercivity.speeds=1"]) == 2


def test_unknown_subcommand():
    with pytest.raises(SystemExit) as exc:
        cli.main(["explode"])
    assert exc.value.code == 2


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "twoch", "profile-dump", "--out", str(tmp_path),
                           "--override", "grid.n=256", "--override", "grid.length=60"],
                          capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert proc.stdout.strip().endswith("profile.txt")
