import json
import subprocess
import sys

import pytest

from kcbo.admissibility import CenteredDecay, PoC, Stability
from kcbo.cli import main, parse_profile

FAST = """
J = 8
J_list = [8, 16, 32]
R = 2
T = 0.1
record_stride = 20
N_ref = 512
control_J = 8
proxy_size = 2000
"""


@pytest.fixture
def config(tmp_path):
    path = tmp_path / "fast.toml"
    path.write_text(FAST)
    return str(path)


def run(capsys, *argv):
    code = main(list(argv))
    return code, capsys.readouterr()


def test_parse_profile():
    assert parse_profile("decay:8") == CenteredDecay(8)
    assert parse_profile("poc:4") == PoC(4)
    assert parse_profile("stab:1") == Stability(1)
    with pytest.raises(Exception):
        parse_profile("nope")


def test_check_default_passes(capsys):
    code, out = run(capsys, "check", "--json")
    assert code == 0
    payload = json.loads(out.out)
    assert payload["passed"] and payload["params"]["alpha"] == 1.0


def test_check_inadmissible_exit_code(tmp_path, capsys):
    path = tmp_path / "bad.toml"
    path.write_text("[params]\nm = 1.0\ngamma = 1.0\nsigma = 0.0\nalpha = 0.0\ndt = 0.001\n")
    code, out = run(capsys, "check", "--config", str(path), "--profile", "poc:4")
    assert code == 2
    assert "poc(i)" in out.out and "FAIL" in out.out


def test_experiment_needing_admissibility_exits_2(tmp_path, capsys):
    path = tmp_path / "bad.toml"
    path.write_text("J = 4\nR = 1\nT = 0.01\n[params]\nm = 1.0\ngamma = 1.0\nsigma = 0.0\nalpha = 0.0\ndt = 0.001\n")
    code, out = run(capsys, "decay", "--config", str(path), "--out", str(tmp_path / "o"))
    assert code == 2 and "admissibility failure" in out.err


@pytest.mark.parametrize("command", ["simulate", "decay", "poc", "stability", "contrast", "concentration", "optimize"])
def test_subcommands_write_outputs(command, config, tmp_path, capsys):
    out_dir = tmp_path / command
    code, out = run(capsys, command, "--config", config, "--out", str(out_dir), "--json")
    assert code in (0, 1)
    payload = json.loads(out.out)
    assert payload["experiment"] == command
    assert (out_dir / "series.csv").exists() and (out_dir / "summary.json").exists()


def test_wm_rate_and_plot(tmp_path, capsys):
    cfg = tmp_path / "wm.toml"
    cfg.write_text("R = 20\nproxy_size = 20000\nJ_list = [20, 200, 2000, 20000]\nalpha = 0.0\n")
    out_dir = tmp_path / "wm"
    code, out = run(capsys, "wm-rate", "--config", str(cfg), "--out", str(out_dir))
    assert code == 0 and "wm-rate: PASS" in out.out
    code, out = run(capsys, "plot", "--out", str(out_dir), "--json")
    assert code == 0
    written = json.loads(out.out)["written"]
    assert written and all(p.endswith(".svg") for p in written)


def test_seed_override_changes_output(config, tmp_path, capsys):
    runs = []
    for seed in (1, 1, 2):
        out_dir = tmp_path / f"s{len(runs)}"
        run(capsys, "simulate", "--config", config, "--seed", str(seed), "--out", str(out_dir))
        runs.append((out_dir / "series.csv").read_text())
    assert runs[0] == runs[1] != runs[2]


def test_console_script_help():
    proc = subprocess.run([sys.executable, "-m", "kcbo.cli", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0 and "stability" in proc.stdout
