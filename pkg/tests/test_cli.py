import json
import subprocess
import sys

import pytest

from quasitrace.cli import ConfigError, RunConfig, main, parse_theta
from quasitrace.phase import PhasePoint, omega


def run_cli(args, cwd=None):
    return subprocess.run(
        [sys.executable, "-m", "quasitrace", *args],
        capture_output=True, text=True, cwd=cwd,
    )


# ---------------------------------------------------------------------------
# phase parsing and configuration
# ---------------------------------------------------------------------------

def test_parse_theta_decimal_and_fraction():
    assert parse_theta("0.25") == PhasePoint.from_fraction(1, 4)
    assert parse_theta("1/3") == PhasePoint.from_fraction(1, 3)
    assert parse_theta("0") == PhasePoint.zero()


def test_parse_theta_omega_forms():
    om = omega()
    assert parse_theta("omega") == om
    assert parse_theta("omega/2") == PhasePoint(om.raw // 2)
    assert parse_theta("3omega/4") == PhasePoint((om.raw * 3) // 4)
    assert parse_theta("3*omega/4") == parse_theta("3omega/4")


@pytest.mark.parametrize("bad", ["", "x", "1/0", "omega/0", "-0.5", "1..2"])
def test_parse_theta_rejects_garbage(bad):
    with pytest.raises(ConfigError):
        parse_theta(bad)


def test_config_round_trip():
    cfg = RunConfig(lam=5.0, thetas=("0", "1/2"), k_max=10,
                    energies=(-2.0, 8.0, 32), T_grid=(10.0, 100.0))
    again = RunConfig.from_dict(json.loads(json.dumps(cfg.to_dict())))
    assert again == cfg


@pytest.mark.parametrize("field,value", [
    ("lam", -1.0),
    ("k_max", 99),
    ("energies", (3.0, -3.0, 64)),
    ("T_grid", (0.0,)),
    ("C1", 0.0),
    ("p", 1.5),
    ("thetas", ("nope",)),
])
def test_config_validation(field, value):
    with pytest.raises(ConfigError):
        RunConfig(**{field: value})


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def test_words_command(tmp_path):
    code = main(["words", "--k-max", "8", "--subword-max", "30",
                 "--theta", "0.25", "--out", str(tmp_path)])
    assert code == 0
    rows = (tmp_path / "words.csv").read_text().splitlines()
    assert rows[0] == "k,fib,height,suffix,b_first,b_last,identity,distinct_rotations,census"
    assert len(rows) == 10
    payload = json.loads((tmp_path / "parity.json").read_text())
    assert payload["pass"] is True
    assert payload["classifications"][0]["theta"] == "0.25"


def test_words_degenerate_level_zero(tmp_path):
    code = main(["words", "--k-max", "0", "--subword-max", "5",
                 "--out", str(tmp_path)])
    assert code == 0
    rows = (tmp_path / "words.csv").read_text().splitlines()
    assert len(rows) == 2  # header plus the single level


def test_traces_command(tmp_path):
    code = main(["traces", "--lambda", "10", "--k-max", "8",
                 "--energies=-3:13:6", "--theta", "0", "--theta", "1/2",
                 "--out", str(tmp_path)])
    assert code == 0
    header = (tmp_path / "traces.csv").read_text().splitlines()[0]
    assert header == "k,E,lambda,theta,x,dx"
    assert (tmp_path / "norms.csv").read_text().splitlines()[0] == \
        "L,E,lambda,theta,norm_sq"
    assert (tmp_path / "margins.csv").read_text().splitlines()[0] == \
        "k,E,lambda,theta,margin"
    summary = json.loads((tmp_path / "traces_summary.json").read_text())
    assert summary["pass"] is True


def test_traces_free_case_all_parities(tmp_path):
    code = main(["traces", "--lambda", "0", "--k-max", "6",
                 "--energies=-2:2:5", "--theta", "0.37", "--out", str(tmp_path)])
    assert code == 0
    summary = json.loads((tmp_path / "traces_summary.json").read_text())
    parity = summary["parity"][0]
    assert parity["x"]["even_ok"] and parity["x"]["odd_ok"]
    assert parity["y"]["even_ok"] and parity["y"]["odd_ok"]


def test_spectrum_command(tmp_path):
    code = main(["spectrum", "--lambda", "10", "--k-max", "8",
                 "--growth", "6:12", "--out", str(tmp_path)])
    assert code == 0
    bands = (tmp_path / "bands.csv").read_text().splitlines()
    assert bands[0] == "k,lambda,band_index,E_lo,E_hi"
    payload = json.loads((tmp_path / "spectrum.json").read_text())
    assert payload["pass"] is True
    assert 5.0 <= payload["growth_fit"]["xi_hat"] <= 40.0


def test_spectrum_free_case(tmp_path):
    code = main(["spectrum", "--lambda", "0", "--k-max", "4",
                 "--out", str(tmp_path)])
    assert code == 0
    payload = json.loads((tmp_path / "spectrum.json").read_text())
    assert payload["band_counts"] == {str(k): 1 for k in range(5)}


def test_dynamics_command(tmp_path):
    code = main(["dynamics", "--lambda", "10", "--theta-list", "0,1/2",
                 "--T-grid", "10,50", "--p", "0.2", "--N", "300",
                 "--out", str(tmp_path)])
    assert code == 0
    rows = (tmp_path / "dynamics.csv").read_text().splitlines()
    assert rows[0] == "lambda,theta,T,L,mass,edge_mass,valid"
    assert len(rows) == 5
    payload = json.loads((tmp_path / "bound_report.json").read_text())
    assert payload["G_emp"] > 0
    assert payload["pass"] is True


def test_dynamics_auto_p_needs_strong_coupling(tmp_path):
    code = main(["dynamics", "--lambda", "2", "--T-grid", "10",
                 "--out", str(tmp_path)])
    assert code == 2


def test_report_command(tmp_path):
    main(["words", "--k-max", "4", "--subword-max", "10", "--out", str(tmp_path)])
    code = main(["report", "--out", str(tmp_path)])
    assert code == 0
    payload = json.loads((tmp_path / "report.json").read_text())
    assert payload["parity.json"]["pass"] is True
    assert payload["bound_report.json"]["missing"] is True


# ---------------------------------------------------------------------------
# exit-code contract via real subprocesses
# ---------------------------------------------------------------------------

def test_exit_code_usage_error(tmp_path):
    proc = run_cli(["words", "--theta", "bogus", "--out", str(tmp_path)])
    assert proc.returncode == 2
    assert "cannot parse phase" in proc.stderr


def test_exit_code_unknown_command():
    proc = run_cli(["frobnicate"])
    assert proc.returncode == 2


def test_exit_code_success(tmp_path):
    proc = run_cli(["words", "--k-max", "3", "--subword-max", "5",
                    "--out", str(tmp_path)])
    assert proc.returncode == 0
    assert "words: ok" in proc.stdout


def test_byte_identical_reruns(tmp_path):
    out_a = tmp_path / "a"
    out_b = tmp_path / "b"
    args = ["words", "--k-max", "8", "--subword-max", "20",
            "--random-thetas", "5", "--seed", "99"]
    assert main(args + ["--out", str(out_a)]) == 0
    assert main(args + ["--out", str(out_b)]) == 0
    for name in ("words.csv", "parity.json"):
        assert (out_a / name).read_bytes() == (out_b / name).read_bytes()


def test_jobs_flag_does_not_change_output(tmp_path):
    out_a = tmp_path / "serial"
    out_b = tmp_path / "parallel"
    args = ["words", "--k-max", "8", "--subword-max", "10",
            "--random-thetas", "6", "--seed", "7"]
    assert main(args + ["--jobs", "1", "--out", str(out_a)]) == 0
    assert main(args + ["--jobs", "2", "--out", str(out_b)]) == 0
    assert (out_a / "parity.json").read_bytes() == (out_b / "parity.json").read_bytes()
