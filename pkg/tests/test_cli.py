import json
import math
import subprocess
import sys

import pytest

from ymtorus import cli, flow, moduli


def run(args, tmp_path, capsys):
    code = cli.dispatch(args)
    out, err = capsys.readouterr()
    return code, out, err


def test_selftest(capsys):
    code = cli.dispatch(["selftest"])
    out = capsys.readouterr().out
    assert code == 0
    for suite in ("lie", "lattice", "gaugefield", "flow", "moduli", "kuranishi", "lojasiewicz"):
        assert suite in out and "passed" in out


def test_flow_deterministic(tmp_path, capsys):
    args = ["flow", "--grid", "16", "--base", "1.5707963,1.5707963", "--init", "random:0.05",
            "--seed", "7"]
    out1, out2 = tmp_path / "a.csv", tmp_path / "b.csv"
    assert cli.dispatch(args + ["--out", str(out1)]) == 0
    assert cli.dispatch(args + ["--out", str(out2)]) == 0
    capsys.readouterr()
    assert out1.read_bytes() == out2.read_bytes()
    assert out1.read_text().splitlines()[0] == ",".join(flow.CSV_HEADER)
    summary = json.loads((tmp_path / "a.json").read_text())
    assert summary["converged"] and summary["energy_equality_residual"] < 1e-6


def test_console_script_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-c", "from ymtorus.cli import main; main()",
                           "flow", "--grid", "9"], capture_output=True, text=True)
    assert proc.returncode == 2
    assert "grid" in proc.stderr


@pytest.mark.parametrize("text,value", [
    ("pi", math.pi), ("pi/2", math.pi / 2), ("-pi/2", -math.pi / 2), ("3pi/2", 1.5 * math.pi),
    ("2*pi", 2 * math.pi), ("1.25", 1.25), ("1e-3", 1e-3), ("0", 0.0),
])
def test_parse_angle(text, value):
    assert cli.parse_angle(text) == pytest.approx(value, rel=1e-15)


@pytest.mark.parametrize("text", ["", "tau", "pi/", "1,2", "pipi"])
def test_parse_angle_rejects(text):
    with pytest.raises(ValueError):
        cli.parse_angle(text)


def test_corner_base_is_exact(capsys):
    assert cli.dispatch(["pillowcase", "--base", "pi,pi"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["stratum"] == "central" and out["zariski_dim"] == 6


def test_config_unknown_key(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"grid": 8, "bogus_key": 1}))
    assert cli.dispatch(["flow", "--config", str(cfg)]) == 2
    assert "bogus_key" in capsys.readouterr().err


def test_config_bad_value_names_key(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"grid": "sixteen"}))
    assert cli.dispatch(["flow", "--config", str(cfg)]) == 2
    assert "'grid'" in capsys.readouterr().err


def test_config_malformed_json(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text('{"grid": 8,')
    assert cli.dispatch(["flow", "--config", str(cfg)]) == 2
    assert "malformed" in capsys.readouterr().err


def test_config_values_and_override(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"grid": 8, "base": "pi/2,pi/2", "t_max": 0.01, "init": "ray:0.01",
                               "tol": 1e-30}))
    assert cli.dispatch(["flow", "--config", str(cfg), "--t-max", "0.02"]) == 1
    out = json.loads(capsys.readouterr().out)
    assert out["t_final"] == pytest.approx(0.02)


def test_flow_not_converged_exit_1(capsys):
    assert cli.dispatch(["flow", "--grid", "8", "--init", "ray:0.1", "--t-max", "0.01"]) == 1


def test_bad_flag_exit_2(capsys):
    assert cli.dispatch(["flow", "--no-such-flag"]) == 2
    assert cli.dispatch(["flow", "--init", "banana"]) == 2
    assert cli.dispatch([]) == 2


def test_retract(tmp_path, capsys):
    out = tmp_path / "r.csv"
    code = cli.dispatch(["retract", "--init", "random:0.05", "--base", "0.4,1.3", "--seed", "3",
                         "--t-max", "200", "--tol", "1e-8", "--out", str(out)])
    summary = json.loads(capsys.readouterr().out)
    assert code == 0
    assert summary["terminal_curvature"] <= 1e-6 and summary["commutator"] <= 1e-4
    assert moduli.pillowcase_dist((summary["alpha"], summary["beta"]), (0.4, 1.3)) < 0.1
    assert (tmp_path / "r.json").exists()


def test_retract_far_data_exit_1(capsys):
    assert cli.dispatch(["retract", "--grid", "8", "--init", "ray:1"]) == 1
    assert "NotNearFlat" in capsys.readouterr().err


def test_snapshot_init(tmp_path, capsys):
    snap = tmp_path / "s.json"
    assert cli.dispatch(["flow", "--grid", "8", "--init", "random:0.05", "--base", "pi/2,pi/3",
                         "--t-max", "5",
                         "--snapshot-out", str(snap)]) == 0
    capsys.readouterr()
    assert cli.dispatch(["pillowcase", "--init", f"snapshot:{snap}", "--nearest"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["commutator"] < 1e-6 and out["nearest"]["dist"] < 1e-6


def test_missing_snapshot_exit_2(tmp_path, capsys):
    assert cli.dispatch(["pillowcase", "--init", f"snapshot:{tmp_path / 'nope.json'}"]) == 2


def test_scan_lambda(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv("YM_THREADS", "2")
    out = tmp_path / "scan.csv"
    assert cli.dispatch(["scan-lambda", "--p", "3", "--points", "8", "--out", str(out)]) == 0
    summary = json.loads(capsys.readouterr().out)
    assert summary["lambda"] == pytest.approx(0.5, abs=0.005)
    assert out.read_text().splitlines()[0] == ",".join(moduli.SCAN_HEADER)
    assert json.loads((tmp_path / "scan.json").read_text()) == summary


def test_bad_threads(monkeypatch, capsys):
    monkeypatch.setenv("YM_THREADS", "0")
    assert cli.dispatch(["scan-lambda", "--points", "3"]) == 2
    assert "YM_THREADS" in capsys.readouterr().err


def test_kuranishi(tmp_path, capsys):
    out = tmp_path / "k.csv"
    assert cli.dispatch(["kuranishi", "--samples", "4", "--constants", "--out", str(out)]) == 0
    summary = json.loads(capsys.readouterr().out)
    assert summary["dim"] == 6 and summary["max_residual"] <= 1e-12
    assert len(out.read_text().splitlines()) == 5


def test_loja(tmp_path, capsys):
    out = tmp_path / "l.csv"
    assert cli.dispatch(["loja", "--function", "quadratic", "--x0", "0.3,0.4", "--out",
                         str(out)]) == 0
    summary = json.loads(capsys.readouterr().out)
    assert summary["arc_length"] == pytest.approx(0.5, abs=1e-9)
    assert cli.dispatch(["loja", "--function", "quartic", "--x0", "1,2"]) == 2
