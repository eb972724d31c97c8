import json
import subprocess
import sys

import pytest

from adaptqec.cli import main


def run(*args):
    return subprocess.run([sys.executable, "-m", "adaptqec", *args], capture_output=True, text=True)


def test_calibrate_prints_parameters(capsys):
    assert main(["calibrate", "0.02", "0.01"]) == 0
    out = capsys.readouterr().out
    f0 = float(out.split()[0].split("=")[1])
    assert abs(f0 + 4.0045) < 5e-4


def test_exit_codes(tmp_path, capsys):
    assert main(["calibrate", "0.02", "0.3"]) == 1
    assert main(["simulate", "--set", "code=surface:4", "--out", str(tmp_path)]) == 1
    assert main(["fit", str(tmp_path / "missing.json")]) == 1


def test_simulate_and_sweep_outputs_are_reproducible(tmp_path):
    sets = ["--set", "rounds=400", "--set", "warmup_rounds=100", "--set", "weights=static,adaptive-sp",
            "--set", "record=true", "--set", "shards=2"]
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["simulate", *sets, "--out", str(a)]) == 0
    assert main(["simulate", *sets, "--set", "workers=2", "--out", str(b)]) == 0
    for name in ("summary.json", "rates.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
    sweep_sets = sets[:6] + ["--set", "distances=3,5", "--set", "failure_target=1"]
    assert main(["sweep", *sweep_sets, "--out", str(a)]) == 0
    sweep = json.loads((a / "sweep.json").read_text())
    assert [r["d"] for r in sweep["modes"]["static"]] == [3, 5]
    fit_path = tmp_path / "fit.json"
    rc = main(["fit", str(a / "sweep.json"), "--mode", "static", "--output", str(fit_path)])
    if rc == 0:
        assert set(json.loads(fit_path.read_text())) == {"alpha", "delta", "sigma_alpha", "sigma_delta"}
    else:
        # Tiny runs can see zero failures at d = 5, leaving a single usable point.
        assert rc == 1


def test_fit_on_synthetic_sweep(tmp_path):
    rows = [{"d": d, "rounds": 10**6, "failures": 1, "p_log": p, "stderr": p / 10}
            for d, p in [(3, 2e-3), (5, 4e-4), (7, 8e-5)]]
    path = tmp_path / "sweep.json"
    path.write_text(json.dumps({"modes": {"static": rows, "adaptive-sp": rows}}))
    out = tmp_path / "fit.json"
    assert main(["fit", str(path), "--output", str(out)]) == 0
    fits = json.loads(out.read_text())
    assert set(fits) == {"static", "adaptive-sp"}
    assert main(["fit", str(path), "--mode", "oracle-true-rates", "--output", str(out)]) == 1


def test_track_command(tmp_path):
    rc = main(["track", "--set", "code=steane", "--set", "rounds=800", "--set", "warmup_rounds=100",
               "--set", "weights=adaptive-co", "--out", str(tmp_path)])
    assert rc == 0
    assert (tmp_path / "rates.csv").exists() and (tmp_path / "track.json").exists()


@pytest.mark.slow
def test_module_entry_point():
    proc = run("calibrate", "0.02", "0.02")
    assert proc.returncode == 0 and "sigma_f=0.884" in proc.stdout
    proc = run("calibrate", "0.6", "0.1")
    assert proc.returncode == 1 and "input error" in proc.stderr


@pytest.mark.parametrize("exc,code", [("NumericalError", 2), ("InvariantError", 3)])
def test_numerical_and_invariant_exit_codes(monkeypatch, exc, code):
    from adaptqec import cli, errors

    def boom(mean, sd):
        raise getattr(errors, exc)("forced")

    monkeypatch.setattr(cli, "calibrate_prior", boom)
    assert main(["calibrate", "0.02", "0.01"]) == code
