import json
import subprocess
import sys

import numpy as np
import pytest

from l0fourier import _fallback, cli, io, operators, regularization
from l0fourier.evaluation import TABLE2_EL0M, _params


def run(args, capsys):
    code = cli.main([str(a) for a in args])
    return code, capsys.readouterr()


def test_selftest_clean(capsys):
    code, out = run(["selftest"], capsys)
    assert code == 0
    assert "operators: 21/21 passed" in out.out and "prox: 200/200 passed" in out.out


def test_selftest_detects_filter_sign_error(capsys, monkeypatch):
    monkeypatch.setattr(operators, "kernels", _fallback)
    monkeypatch.setattr(regularization, "kernels", _fallback)
    a = _fallback.BAND[0]
    monkeypatch.setattr(_fallback, "BAND", (a, 0.0, a))
    code, out = run(["selftest"], capsys)
    assert code != 0 and "FAIL" in out.out


def test_exit_codes(tmp_path, capsys):
    assert run(["bogus"], capsys)[0] == 1
    assert run(["experiment", "table9"], capsys)[0] == 1
    assert run(["solve", "--M", 8], capsys)[0] == 1
    assert run(["solve", "--input", tmp_path / "missing.csv", "--M", 8, "--T", 1], capsys)[0] == 3
    (tmp_path / "cfg.json").write_text('{"colour": 1}')
    assert run(["selftest", "--config", tmp_path / "cfg.json"], capsys)[0] == 1
    assert run(["helmholtz", "--frequency", 80, "--nx", 21, "--nz", 21,
                "--source", "100,100", "--out", tmp_path], capsys)[0] == 1


def test_config_precedence(tmp_path):
    (tmp_path / "c.json").write_text(json.dumps({"seed": 5, "tol": 1e-3}))
    args = cli.build_parser().parse_args(["selftest", "--config", str(tmp_path / "c.json"),
                                          "--seed", "9"])
    cfg = cli.effective_config(args)
    assert cfg["seed"] == 9 and cfg["tol"] == 1e-3 and cfg["mode"] == "fast"


def _measurements(tmp_path, rows_text):
    p = tmp_path / "m.csv"
    p.write_text("row_index,re,im\n" + rows_text)
    return p


def test_solve_zero_measurements(tmp_path, capsys):
    p = _measurements(tmp_path, "2,0,0\n3,0,0\n")
    code, _ = run(["solve", "--input", p, "--M", 16, "--T", 1, "--beta", 0.01, "--gamma", 0.05,
                   "--out", tmp_path / "o", "--svg", "r.svg"], capsys)
    assert code == 0
    t, u = io.read_signal(tmp_path / "o" / "reconstruction.csv")
    assert not u.any() and len(t) == 16
    assert (tmp_path / "o" / "trace.csv").exists() and (tmp_path / "o" / "r.svg").exists()


def test_solve_nonconvergence_exit(tmp_path, capsys):
    p = _measurements(tmp_path, "2,1,0\n3,0,1\n")
    base = ["solve", "--input", p, "--M", 16, "--T", 1, "--beta", 1e-5, "--gamma", 5e-5,
            "--tol", 1e-15, "--max_iter", 2, "--out", tmp_path]
    assert run(base, capsys)[0] == 2
    assert run(base + ["--allow_nonconverged", 1], capsys)[0] == 0


@pytest.mark.parametrize("method,extra", [("idft", []), ("l1m", ["--gamma", 1e-3])])
def test_solve_other_methods(tmp_path, capsys, method, extra):
    p = _measurements(tmp_path, "2,1,0\n3,0,1\n")
    code, _ = run(["solve", "--input", p, "--M", 16, "--T", 1, "--method", method,
                   "--out", tmp_path] + extra, capsys)
    assert code == 0


def test_table2_inputs_solve_and_score_roundtrip(tmp_path, capsys):
    out = tmp_path / "t2"
    code, res = run(["experiment", "table2", "--fmax", 7.5, "--out", out], capsys)
    assert code == 0 and res.out.startswith("case,")
    report = io.read_csv(out / "table2_report.csv", ["method", "snr_db"])
    logged = float(report["snr_db"][report["method"].index("EL0M")])
    p = _params(*TABLE2_EL0M[7.5])
    code, _ = run(["solve", "--input", out / "table2_fmax7.5_measurements.csv", "--M", 129,
                   "--T", 2, "--levels", 3, "--beta", repr(p.beta), "--gamma", repr(p.gamma),
                   "--max_iter", 60000, "--out", tmp_path / "s"], capsys)
    assert code == 0
    code, res = run(["score", "--input", tmp_path / "s" / "reconstruction.csv",
                     "--reference", "gaussian"], capsys)
    assert code == 0
    scored = float(res.out.split()[1])
    assert abs(scored - 39.07) <= 3.0
    assert scored == pytest.approx(logged, abs=1e-9)
    cfg = json.loads((out / "table2_config.json").read_text())
    assert cfg["fmax"] == "7.5" and cfg["command"] == "experiment"
    assert (out / "table2_7.5.svg").exists()


def test_table3_sigma_zero_matches_table2(tmp_path, capsys):
    assert run(["experiment", "table2", "--fmax", "7.5,3", "--out", tmp_path / "a"], capsys)[0] == 0
    assert run(["experiment", "table3", "--sigma", 0, "--fmax", "7.5,3",
                "--out", tmp_path / "b"], capsys)[0] == 0
    a = io.read_csv(tmp_path / "a" / "table2_report.csv", ["snr_db"])
    b = io.read_csv(tmp_path / "b" / "table3_report.csv", ["snr_db"])
    assert a["snr_db"] == b["snr_db"] and a["iterations"] == b["iterations"]


def test_helmholtz_command(tmp_path, capsys):
    args = ["helmholtz", "--frequency", 10, "--nx", 101, "--nz", 101, "--source", "500,500",
            "--out", tmp_path]
    code, res = run(args, capsys)
    assert code == 0 and "max relative magnitude error" in res.out
    assert io.read_pgm(tmp_path / "field_magnitude.pgm").shape == (101, 101)
    real = (tmp_path / "field_real.csv").read_bytes()
    run(args, capsys)
    assert (tmp_path / "field_real.csv").read_bytes() == real


def test_helmholtz_zero_source(tmp_path, capsys):
    code, _ = run(["helmholtz", "--amplitude", 0, "--nx", 21, "--nz", 21, "--source", "100,100",
                   "--out", tmp_path], capsys)
    assert code == 0
    vals = np.loadtxt(tmp_path / "field_real.csv", delimiter=",", skiprows=1)[:, 1:]
    assert not vals.any()
    assert not io.read_pgm(tmp_path / "field_magnitude.pgm").any()


def test_console_script_entry():
    res = subprocess.run([sys.executable, "-m", "l0fourier.cli", "selftest"],
                         capture_output=True, text=True)
    assert res.returncode == 0 and "passed" in res.stdout


def test_experiment_homogeneous_gaussian(tmp_path, capsys):
    code, res = run(["experiment", "homogeneous-gaussian", "--fmax", 9, "--out", tmp_path], capsys)
    assert code == 0 and "oracle=exact2d" in res.out
    assert (tmp_path / "homogeneous-gaussian_report.csv").exists()
    assert list(tmp_path.glob("*.svg"))


def test_experiment_layered_outputs(tmp_path, capsys, monkeypatch):
    from l0fourier.evaluation import ExperimentReport, LayeredResult
    from l0fourier.seismic import ShotRecord, TimeGrid

    def fake(f_max, methods):
        g = TimeGrid(2.24, 280)
        recs = {m: ShotRecord([(0.0, 0.0), (10.0, 0.0)], g, np.ones((280, 2))) for m in methods}
        return LayeredResult(recs, ExperimentReport("layered"), [], True)

    monkeypatch.setattr(cli, "run_layered", fake)
    code, _ = run(["experiment", "layered", "--fmax", 30, "--method", "el0m", "--out", tmp_path],
                  capsys)
    assert code == 0
    assert io.read_pgm(tmp_path / "layered_f30_el0m.pgm").shape == (280, 2)
    assert (tmp_path / "layered_f30_el0m.pgm.txt").exists()
    assert (tmp_path / "layered_f30_el0m.csv").exists()
    assert run(["experiment", "layered", "--method", "fft", "--out", tmp_path], capsys)[0] == 1
