import json

import pytest

from slip_lds import battery
from slip_lds.cli import main
from slip_lds.harness import preset


def test_run_and_outputs(tmp_path, capsys):
    code = main(["run", "--preset", "fig2-system1", "--T", "60", "--trials", "2", "--k", "4", "--lookback", "4", "--out", str(tmp_path), "--svg"])
    assert code == 0
    for name in ("trials.csv", "summary.csv", "summary.json", "summary.svg"):
        assert (tmp_path / name).exists()
    assert "slip" in capsys.readouterr().out


def test_config_file(tmp_path):
    cfg = preset("fig2-system2", T=50, trials=2, k=3, lookback=3)
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg.to_dict()))
    assert main(["run", "--config", str(path), "--out", str(tmp_path / "o"), "--predictors", "slip,kalman"]) == 0
    header, first = (tmp_path / "o" / "trials.csv").read_text().splitlines()[:2]
    assert first.split(",")[2] == "slip"


@pytest.mark.parametrize(
    "argv",
    [
        ["run", "--preset", "fig2-system1", "--trials", "0"],
        ["run", "--preset", "fig2-system1", "--predictors", "slip,oracle"],
        ["run", "--config", "/nonexistent/cfg.json"],
        ["sweep", "--preset", "scalar-robustness", "--T", "20", "--k-values", "5,x"],
        ["spectra", "--T", "5"],
    ],
)
def test_config_errors(argv, tmp_path):
    assert main(argv + (["--out", str(tmp_path)] if argv[0] != "spectra" else [])) == 1


def test_simulate(tmp_path):
    assert main(["simulate", "--preset", "fig2-system3", "--T", "15", "--seed", "3", "--out", str(tmp_path)]) == 0
    lines = (tmp_path / "trajectory.csv").read_text().splitlines()
    assert lines[0] == "t,x0,y0,y1,m0,m1,e0,e1" and len(lines) == 16


def test_sweep(tmp_path, capsys):
    assert main(["sweep", "--preset", "scalar-robustness", "--T", "40", "--trials", "2", "--k-values", "3,5", "--out", str(tmp_path)]) == 0
    assert (tmp_path / "sweep.csv").read_text().splitlines()[0] == "k,mean,ci_lo,ci_hi,trials"


def test_spectra(capsys):
    assert main(["spectra", "--T", "100", "--k", "6"]) == 0
    out = capsys.readouterr().out
    assert out.splitlines()[0] == "j,sigma,decay_bound,margin"
    assert "holds" in out


def test_verify_pass_and_fail(monkeypatch, capsys):
    assert main(["verify"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "check,value,bound,margin,passed"
    assert len(lines) == 1 + len(battery.CHECKS)
    monkeypatch.setattr(battery, "CHECKS", [lambda: battery.Check("forced", 2.0, 1.0)])
    assert main(["verify"]) == 2
