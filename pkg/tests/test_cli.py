import json

import pytest

from hgtlab.cli import main, parse_config, read_config_file
from hgtlab.errors import ConfigurationError

from oracles import REF_ROWS


def run_cli(tmp_path, *args):
    out = tmp_path / "out"
    code = main([*args, "--out", str(out)])
    return code, out


def test_minimal_ess_config_fills_defaults():
    cfg = parse_config("ess", overrides={"tau": "0.5", "g": "1"})
    assert cfg.echo() == {"mode": "ess", "kernel": "tanh", "tau": 0.5, "g": 1.0, "fitness_step": 1e-3}


def test_negative_g_names_field():
    with pytest.raises(ConfigurationError) as exc:
        parse_config("ess", overrides={"tau": "0.5", "g": "-1"})
    assert exc.value.field == "g" and "> 0" in str(exc.value)


def test_unknown_kernel_lists_supported():
    with pytest.raises(ConfigurationError) as exc:
        parse_config("verify-kernel", overrides={"kernel": "gauss"})
    assert "tanh" in str(exc.value) and "arctan" in str(exc.value)


def test_missing_required_field():
    with pytest.raises(ConfigurationError) as exc:
        parse_config("simulate", overrides={"tau": "0.5", "g": "1"})
    assert exc.value.field == "epsilon"


def test_bad_type():
    with pytest.raises(ConfigurationError) as exc:
        parse_config("ess", overrides={"tau": "half", "g": "1"})
    assert exc.value.field == "tau"


def test_config_file_and_flag_override(tmp_path):
    f = tmp_path / "run.cfg"
    f.write_text("# figure 1\ntau = 0.5\ng = 2\nepsilon = 1e-2\nzmin = -2\ndz = 0.02\n")
    vals = read_config_file(f)
    cfg = parse_config("simulate", vals, {"g": "1"})
    assert cfg["g"] == 1.0 and cfg["z_min"] == -2.0 and cfg["dz"] == 0.02


def test_config_file_unknown_key(tmp_path):
    f = tmp_path / "bad.cfg"
    f.write_text("tau = 0.5\ncolour = red\n")
    with pytest.raises(ConfigurationError):
        read_config_file(f)


def test_ess_mode_outputs(tmp_path):
    code, out = run_cli(tmp_path, "ess", "--tau", "0.5", "--g", "1")
    assert code == 0
    d = json.loads((out / "ess.json").read_text())
    assert d["points"] == [0.25] and d["rho0"] == 0.9375 and d["valid"]
    assert "max_fitness_excursion" in d
    assert (out / "fitness.csv").read_text().startswith("z,F\n")
    assert json.loads((out / "config.json").read_text())["kernel"] == "tanh"


def test_config_error_exit_and_record(tmp_path):
    code, out = run_cli(tmp_path, "ess", "--tau", "0.5", "--g", "-1")
    assert code == 2
    rec = json.loads((out / "error.json").read_text())
    assert rec["field"] == "g" and rec["exit_status"] == 2


def test_numerical_error_exit(tmp_path):
    code, out = run_cli(
        tmp_path, "simulate", "--tau", "0.5", "--g", "1", "--epsilon", "0.01", "--dz", "0.02", "--dt", "0.5", "--A", "5"
    )
    assert code == 3
    assert json.loads((out / "error.json").read_text())["error"] == "numerical"


def test_verify_kernel(tmp_path):
    code, out = run_cli(tmp_path, "verify-kernel", "--kernel", "arctan")
    assert code == 0
    d = json.loads((out / "h1_report.json").read_text())
    assert d["passed"] and len(d["clauses"]) == 3


def test_eigen(tmp_path):
    code, out = run_cli(tmp_path, "eigen", "--g", "1", "--epsilon", "0.1")
    assert code == 0
    d = json.loads((out / "eigen.json").read_text())
    assert d["lambda"] == pytest.approx(0.9, abs=1e-3)


def test_sweep_reference_rows_and_determinism(tmp_path):
    mus = ",".join(str(r[0]) for r in REF_ROWS)
    code, out = run_cli(tmp_path, "sweep", "--tau", "0.5", "--mu-values", mus)
    assert code == 0
    text = (out / "sweep.csv").read_text()
    lines = text.splitlines()
    assert lines[0] == "mu,g,regime,morphism,z1,z2,z3,a1_over_rho0,a2_over_rho0,a3_over_rho0,rho0,verified"
    assert len(lines) == 9
    code2 = main(["sweep", "--tau", "0.5", "--mu-values", mus, "--out", str(tmp_path / "again")])
    assert code2 == 0 and (tmp_path / "again" / "sweep.csv").read_text() == text
    regimes = [line.split(",")[2] for line in lines[1:]]
    assert regimes == ["di", "tri", "tri", "tri", "tri", "tri", "tri", "none"]


def test_sweep_range(tmp_path):
    code, out = run_cli(tmp_path, "sweep", "--tau", "0.5", "--mu-min", "0.5", "--mu-max", "1.5", "--mu-step", "0.5")
    assert code == 0
    rows = (out / "sweep.csv").read_text().splitlines()[1:]
    assert [r.split(",")[0] for r in rows] == ["0.5", "1.0", "1.5"]


def test_simulate_outputs_deterministic(tmp_path):
    args = ["simulate", "--tau", "0.5", "--g", "1", "--epsilon", "0.01", "--dz", "0.02", "--tmax", "0.5"]
    assert main([*args, "--out", str(tmp_path / "a")]) == 0
    assert main([*args, "--out", str(tmp_path / "b")]) == 0
    for name in ("mass.csv", "profile.csv", "report.json", "config.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    assert (tmp_path / "a" / "mass.csv").read_text().startswith("t,rho\n0.0,")
    assert (tmp_path / "a" / "profile.csv").read_text().startswith("z,u,n_rescaled\n")


def test_shortest_round_trip_floats(tmp_path):
    code, out = run_cli(tmp_path, "ess", "--tau", "0.5", "--g", "1", "--fitness-step", "0.1")
    first = (out / "fitness.csv").read_text().splitlines()[1].split(",")
    assert first[0] == "-2.0" and float(first[1]) == float(repr(float(first[1])))
