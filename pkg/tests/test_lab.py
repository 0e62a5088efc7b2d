import json

import pytest

from parawave.errors import ConfigInvalid, GoldenMismatch
from parawave.lab.cli import main
from parawave.lab.config import EXPERIMENTS, load_config, parse_value, read_config_file
from parawave.lab.experiments import probe_ladder, run
from parawave.lab.report import RunReport, compare_golden, flatten


def cfg_for(experiment, out, *sets):
    return load_config(experiment, None, list(sets) + [f"run.output_dir={out}"], env={})


# --- configuration ------------------------------------------------------------------


def test_parse_value():
    assert parse_value(" 128 ") == 128 and isinstance(parse_value("128"), int)
    assert parse_value("1e-10") == 1e-10
    assert parse_value("true") is True and parse_value("False") is False
    assert parse_value("[1, 2, 4]") == [1, 2, 4] and parse_value("[]") == []
    assert parse_value('"flat_bottom"') == "flat_bottom" and parse_value("auto") == "auto"


def test_config_file_and_overrides(tmp_path):
    p = tmp_path / "run.cfg"
    p.write_text("# comment\ngrid.n = 64   # trailing\nphysics.h = 2.0\n\nnumerics.delta = 0.05\n")
    assert read_config_file(p) == [("grid.n", 64), ("physics.h", 2.0), ("numerics.delta", 0.05)]
    cfg = load_config("dn_check", p, ["grid.n=256"], env={})
    assert cfg.get("grid.n") == 256 and cfg.get("physics.h") == 2.0
    again = load_config("dn_check", None, cfg.to_lines(), env={})
    assert again.values == cfg.values


@pytest.mark.parametrize(
    "setting,field",
    [
        ("grid.n=100", "grid.n"),
        ("grid.n=8", "grid.n"),
        ("grid.dim=3", "grid.dim"),
        ("physics.h=-1", "physics.h"),
        ("physics.bottom_kind=sloping", "physics.bottom_kind"),
        ("numerics.krylov_tol=2", "numerics.krylov_tol"),
        ("numerics.delta=fast", "numerics.delta"),
        ("run.seed=-3", "run.seed"),
        ("grid.colour=red", "grid.colour"),
        ("dn_check.modes=[1, 64]", "dn_check.modes"),
        ("nodot=1", "nodot"),
    ],
)
def test_config_validation_names_field(setting, field):
    with pytest.raises(ConfigInvalid) as exc:
        load_config("dn_check", None, [setting], env={})
    assert exc.value.field == field and str(exc.value).startswith(field)


def test_unknown_experiment_and_scenario():
    with pytest.raises(ConfigInvalid):
        load_config("nonsense", env={})
    with pytest.raises(ConfigInvalid) as exc:
        load_config("evolve", None, ["evolve.scenario=tsunami"], env={})
    assert exc.value.field == "evolve.scenario"


def test_env_overrides_output_dir(tmp_path):
    cfg = load_config("dn_check", None, ["run.output_dir=elsewhere"], env={"PARAWAVE_OUT": str(tmp_path)})
    assert cfg.output_dir == tmp_path


def test_every_experiment_has_valid_defaults():
    for e in EXPERIMENTS:
        assert load_config(e, env={}).experiment == e


def test_probe_ladder():
    assert probe_ladder(8, 64) == [8, 11, 16, 23, 32, 45, 64]


# --- run and report -------------------------------------------------------------------------


def test_dn_check_default_run(tmp_path):
    rep = run(cfg_for("dn_check", tmp_path))
    assert rep.passed and rep.measured["max_rel_error"] <= 1e-6
    d = json.loads((tmp_path / "dn_check_report.json").read_text())
    assert d["passed"] and d["config"]["grid"]["n"] == 128
    assert {"modes.csv", "potential.csv", "solver.json", "report.json"} <= {p.split("dn_check_")[-1] for p in d["artifacts"]}
    # self-contained: the echoed config reproduces the measurements
    echoed = {k: v for k, v in d["config"].items() if k != "experiment"}
    sets = [f"{s}.{k}={v}" for s, vals in echoed.items() for k, v in vals.items() if not isinstance(v, list)]
    rerun = run(load_config("dn_check", None, sets, env={}))
    assert rerun.measured == rep.measured


def test_evolve_rest_100_steps(tmp_path):
    rep = run(cfg_for("evolve", tmp_path, "evolve.scenario=rest", "evolve.steps=100"))
    assert rep.passed
    for k in ("max_abs_eta", "max_abs_psi", "H_drift", "mean_drift"):
        assert rep.measured[k] <= 1e-12
    lines = (tmp_path / "evolve_rest_trajectory.csv").read_text().splitlines()
    assert len(lines) == 102


def test_determinism_byte_identical(tmp_path):
    a, b, c = tmp_path / "a", tmp_path / "b", tmp_path / "c"
    run(cfg_for("taylor_check", a, "taylor_check.states=3", "grid.n=64"))
    run(cfg_for("taylor_check", b, "taylor_check.states=3", "grid.n=64"))
    run(cfg_for("taylor_check", c, "taylor_check.states=3", "grid.n=64", "run.workers=2"))
    for name in ("taylor_check_states.csv", "taylor_check_profile.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes() == (c / name).read_bytes()
    d = run(cfg_for("taylor_check", tmp_path / "d", "taylor_check.states=3", "grid.n=64", "run.seed=1"))
    assert (tmp_path / "d" / "taylor_check_states.csv").read_bytes() != (a / "taylor_check_states.csv").read_bytes()
    assert d.passed


def test_floats_round_trip(tmp_path):
    run(cfg_for("paralin_order", tmp_path))
    rows = (tmp_path / "paralin_order_probes.csv").read_text().splitlines()[1:]
    for r in rows:
        for v in r.split(",")[1:]:
            assert repr(float(v)) == v


# --- golden files ----------------------------------------------------------------------------


@pytest.fixture(scope="module")
def paralin_report(tmp_path_factory):
    return run(cfg_for("paralin_order", tmp_path_factory.mktemp("golden")))


def test_golden_identical(tmp_path, paralin_report):
    g = tmp_path / "g.json"
    assert compare_golden(paralin_report, g, bless=True) == {}
    assert compare_golden(paralin_report, g) == {}


def test_golden_perturbed_slope(tmp_path, paralin_report):
    g = tmp_path / "g.json"
    compare_golden(paralin_report, g, bless=True)
    bad = RunReport(paralin_report.experiment, paralin_report.config, json.loads(json.dumps(paralin_report.measured)))
    bad.measured["fitted_slope"] += 0.5
    with pytest.raises(GoldenMismatch) as exc:
        compare_golden(bad, g)
    assert exc.value.fields == ["fitted_slope"]


def test_golden_within_tolerance(tmp_path, paralin_report):
    g = tmp_path / "g.json"
    compare_golden(paralin_report, g, bless=True)
    near = RunReport(paralin_report.experiment, paralin_report.config, json.loads(json.dumps(paralin_report.measured)))
    near.measured["fitted_slope"] += 1e-4
    near.measured["remainder"]["norms"][0] *= 1 + 1e-9
    diff = compare_golden(near, g)
    assert set(diff) == {"fitted_slope", "remainder.norms.0"}
    with pytest.raises(GoldenMismatch):
        compare_golden(near, g, tolerances={"fitted_slope": (0.0, 1e-6)})


def test_golden_missing_field_and_file(tmp_path, paralin_report):
    with pytest.raises(FileNotFoundError):
        compare_golden(paralin_report, tmp_path / "none.json")
    g = tmp_path / "g.json"
    compare_golden(paralin_report, g, bless=True)
    fewer = RunReport(paralin_report.experiment, paralin_report.config, dict(paralin_report.measured))
    del fewer.measured["dn"]
    with pytest.raises(GoldenMismatch) as exc:
        compare_golden(fewer, g)
    assert all(f.startswith("dn.") for f in exc.value.fields)


def test_flatten():
    assert flatten({"a": {"b": 1, "c": [2, {"d": 3}]}}) == {"a.b": 1, "a.c.0": 2, "a.c.1.d": 3}


# --- CLI -----------------------------------------------------------------------------------------


def test_cli_pass_bless_and_compare(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("PARAWAVE_OUT", str(tmp_path))
    assert main(["dn_check", "--bless"]) == 0
    assert (tmp_path / "golden" / "dn_check.json").exists()
    out = capsys.readouterr().out
    assert "PASS max_rel_error" in out and "blessed" in out
    assert main(["dn_check"]) == 0
    assert "golden ok" in capsys.readouterr().out


def test_cli_assertion_failure(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("PARAWAVE_OUT", str(tmp_path))
    assert main(["dn_check", "--set", "numerics.nz=4"]) == 1
    assert "FAIL max_rel_error" in capsys.readouterr().out


def test_cli_golden_mismatch(tmp_path, monkeypatch):
    monkeypatch.setenv("PARAWAVE_OUT", str(tmp_path))
    golden = tmp_path / "custom.json"
    assert main(["paralin_order", "--golden", str(golden), "--bless"]) == 0
    data = json.loads(golden.read_text())
    data["measured"]["fitted_slope"] += 0.5
    golden.write_text(json.dumps(data))
    assert main(["paralin_order", "--golden", str(golden)]) == 1


def test_cli_config_error(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("PARAWAVE_OUT", str(tmp_path))
    assert main(["dn_check", "--set", "grid.n=100"]) == 2
    assert "grid.n" in capsys.readouterr().err
    assert main(["dn_check", "--config", str(tmp_path / "missing.cfg")]) == 2


def test_cli_solver_error(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("PARAWAVE_OUT", str(tmp_path))
    code = main(["dn_check", "--set", "dn_check.amplitude=2.0", "--set", "numerics.delta=1.0"])
    assert code == 3
    assert "DegenerateMap" in capsys.readouterr().err


def test_cli_config_file(tmp_path, monkeypatch):
    monkeypatch.setenv("PARAWAVE_OUT", str(tmp_path))
    p = tmp_path / "c.cfg"
    p.write_text("grid.n = 64\ndn_check.modes = [1, 2]\n")
    assert main(["dn_check", "--config", str(p)]) == 0
    rep = json.loads((tmp_path / "dn_check_report.json").read_text())
    assert rep["config"]["grid"]["n"] == 64 and set(rep["measured"]["rel_error"]) == {"1", "2"}
