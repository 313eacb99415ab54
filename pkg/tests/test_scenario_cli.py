"""Scenario configs, report emission, and the command line interface."""

import json
import os
import subprocess
import sys

import pytest

from bmcheck import (BUILTIN_SCENARIOS, ConfigInvalid, UnsupportedFormat,
                     builtin_scenario, emit_report, run_scenario,
                     validate_config)
from bmcheck.scenario import expectation_satisfied

TINY = {
    "schema_version": 1,
    "name": "tiny",
    "law": {"n": 2},
    "grid": {"T": 2.0, "K": 100},
    "paths": 400,
    "seed": 77,
    "alpha": 0.01,
    "tests": {"conformance": {}},
}


def tiny(**extra):
    cfg = json.loads(json.dumps(TINY))
    cfg.update(extra)
    return cfg


def test_validate_minimal_defaults():
    cfg = validate_config({"schema_version": 1})
    assert cfg.law.n == 2
    assert cfg.paths == 100000
    assert cfg.alpha == 0.01
    assert cfg.transform_spec == "identity(2)"
    assert len(cfg.grid.times) == 1001


@pytest.mark.parametrize("raw,fragment", [
    ({"schema_version": 1, "bogus": 1}, "bogus"),
    ({"schema_version": 1, "law": {"n": 2, "mean": []}}, "law.mean"),
    ({"schema_version": 1, "grid": {"T": 2, "step": 1}}, "grid.step"),
    ({"schema_version": 1, "tests": {"conformal": {}}}, "tests.conformal"),
    ({"schema_version": 1,
      "tests": {"conformance": {"marginal_tmes": []}}}, "marginal_tmes"),
    ({"schema_version": 1,
      "tests": {"conformance": {"stationarity": {"tau": 1}}}}, "tau"),
])
def test_unknown_keys_are_named(raw, fragment):
    with pytest.raises(ConfigInvalid) as err:
        validate_config(raw)
    assert fragment in str(err.value)


def test_field_range_validation():
    with pytest.raises(ConfigInvalid):
        validate_config(tiny(alpha=1.5))
    with pytest.raises(ConfigInvalid):
        validate_config(tiny(paths=50))
    with pytest.raises(ConfigInvalid):
        validate_config(tiny(seed=-1))
    with pytest.raises(ConfigInvalid):
        validate_config(tiny(schema_version=2))
    with pytest.raises(ConfigInvalid):
        validate_config(tiny(name=4))
    with pytest.raises(ConfigInvalid):
        validate_config(tiny(expect_reject="stationarity"))


def test_referenced_times_must_sit_on_grid():
    bad = tiny(grid={"T": 2.0, "K": 10})
    bad["tests"] = {"conformance": {"marginal_times": [0.5, 1.0, 2.0]}}
    with pytest.raises(ConfigInvalid) as err:
        validate_config(bad)
    assert "marginal_times" in str(err.value)


def test_grid_times_and_tk_are_exclusive():
    with pytest.raises(ConfigInvalid):
        validate_config(tiny(grid={"T": 2.0, "times": [0.0, 1.0]}))


def test_transform_must_match_law_dimension():
    with pytest.raises(ConfigInvalid):
        validate_config(tiny(law={"n": 1},
                             transform="radial_lift(angle_multiply(2))"))
    with pytest.raises(ConfigInvalid):
        validate_config(tiny(transform="affine(P=[[1]], q=[0"))
    with pytest.raises(ConfigInvalid):
        validate_config(tiny(origin=[0.0, 0.0, 0.0]))


def test_builtin_scenarios_all_validate():
    assert set(BUILTIN_SCENARIOS) == {"affine-sanity", "bm-null",
                                      "counterexample", "pde-gallery"}
    for name in BUILTIN_SCENARIOS:
        cfg = validate_config(builtin_scenario(name))
        assert cfg.name == name
    with pytest.raises(ConfigInvalid):
        builtin_scenario("no-such-scenario")


def test_counterexample_builtin_expects_process_level_rejections():
    cfg = validate_config(builtin_scenario("counterexample"))
    assert set(cfg.expect_reject) == {
        "stationarity", "increment_independence", "conditional_mean",
        "qv_linearity"}
    assert cfg.transform_spec == "radial_lift(angle_multiply(2))"


def test_run_scenario_null_report_shape():
    rep = run_scenario(tiny())
    assert rep.overall["verdict"] == "pass"
    assert rep.overall["corrected_rejections"] == []
    assert rep.meta["seed"] == 77
    assert rep.meta["duration_ms"] is None
    assert rep.meta["throughput_paths_per_s"] is None
    names = [e["name"] for e in rep.reports]
    assert "qv_linearity" in names
    stat_entries = [e for e in rep.reports if e["kind"] == "statistical"]
    assert all("p_value" in e for e in stat_entries)


def test_run_scenario_timing_fields():
    rep = run_scenario(tiny(), timing=True)
    assert rep.meta["duration_ms"] > 0
    assert rep.meta["throughput_paths_per_s"] > 0


def test_run_scenario_vacuous_pass():
    rep = run_scenario(tiny(tests={}))
    assert rep.reports == []
    assert rep.overall["verdict"] == "vacuous-pass"


def test_emit_json_is_stable_and_parses():
    rep = run_scenario(tiny())
    a = emit_report(rep, "json")
    b = emit_report(rep, "json")
    assert a == b
    doc = json.loads(a)
    assert list(doc) == ["schema_version", "config", "reports", "overall",
                         "meta"]
    assert doc["schema_version"] == 1
    assert doc["config"]["name"] == "tiny"


def test_emit_csv_and_summary():
    rep = run_scenario(tiny())
    csv = emit_report(rep, "csv").decode()
    lines = csv.strip().split("\n")
    assert lines[0] == "name,kind,statistic,p_value,residual,threshold,verdict"
    assert len(lines) == 1 + len(rep.reports)
    summary = emit_report(rep, "summary").decode()
    assert "overall: pass" in summary
    with pytest.raises(UnsupportedFormat):
        emit_report(rep, "yaml")


def test_expectation_satisfied_matching():
    class R:
        pass
    rep = R()
    rep.reports = [
        {"name": "stationarity[d=1,t1=0,t2=1]", "verdict": "reject"},
        {"name": "gaussian_marginal[t=1]", "verdict": "pass"},
    ]
    assert expectation_satisfied(rep, ["stationarity"])
    assert not expectation_satisfied(rep, [])
    assert not expectation_satisfied(rep, ["stationarity",
                                           "gaussian_marginal"])


# ---------------------------------------------------------------------------
# command line

def run_cli(*args, env_extra=None):
    env = dict(os.environ)
    if env_extra:
        env.update(env_extra)
    return subprocess.run([sys.executable, "-m", "bmcheck.cli", *args],
                          capture_output=True, text=True, env=env)


def write_cfg(tmp_path, cfg, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(cfg))
    return str(p)


def test_cli_run_null_scenario(tmp_path):
    out = tmp_path / "report.json"
    r = run_cli("run", "--config", write_cfg(tmp_path, tiny()),
                "--out", str(out))
    assert r.returncode == 0, r.stderr
    doc = json.loads(out.read_text())
    assert doc["overall"]["verdict"] == "pass"
    assert doc["meta"]["duration_ms"] is None


def test_cli_exit_codes_for_config_errors(tmp_path):
    r = run_cli("run", "--config", str(tmp_path / "absent.json"))
    assert r.returncode == 2
    r = run_cli("run")
    assert r.returncode == 2
    bad = write_cfg(tmp_path, {"schema_version": 1, "nope": True})
    r = run_cli("run", "--config", bad)
    assert r.returncode == 2
    assert "nope" in r.stderr


def test_cli_exit_one_when_expectation_unmet(tmp_path):
    cfg = tiny(expect_reject=["stationarity"])
    r = run_cli("run", "--config", write_cfg(tmp_path, cfg))
    assert r.returncode == 1


def test_cli_overrides_apply(tmp_path):
    out = tmp_path / "r.json"
    cfg = write_cfg(tmp_path, tiny())
    r = run_cli("run", "--config", cfg, "--seed", "123", "--paths", "500",
                "--alpha", "0.02", "--out", str(out))
    assert r.returncode == 0, r.stderr
    doc = json.loads(out.read_text())
    assert doc["meta"]["seed"] == 123
    assert doc["config"]["paths"] == 500
    assert doc["config"]["alpha"] == 0.02


def test_cli_simulate_roundtrip(tmp_path):
    out = tmp_path / "paths.bin"
    r = run_cli("simulate", "--paths", "200", "--seed", "5",
                "--out", str(out))
    assert r.returncode == 0, r.stderr
    from bmcheck import load_ensemble
    ens = load_ensemble(str(out))
    assert ens.paths.shape == (200, 1001, 2)
    r = run_cli("simulate", "--paths", "200")
    assert r.returncode == 2


def test_cli_summary_format_with_timing(tmp_path):
    cfg = write_cfg(tmp_path, tiny())
    r = run_cli("run", "--config", cfg, "--format", "summary", "--timing")
    assert r.returncode == 0, r.stderr
    assert "overall: pass" in r.stdout
    assert "elapsed" in r.stdout


def test_cli_thread_count_does_not_change_bytes(tmp_path):
    cfg = write_cfg(tmp_path, tiny())
    outs = []
    for args, env in (
            (("--threads", "1"), None),
            (("--threads", "4"), None),
            ((), {"BMCHECK_THREADS": "2"})):
        out = tmp_path / f"r{len(outs)}.json"
        r = run_cli("run", "--config", cfg, *args, "--out", str(out),
                    env_extra=env)
        assert r.returncode == 0, r.stderr
        outs.append(out.read_bytes())
    assert outs[0] == outs[1] == outs[2]


def test_cli_rejects_bad_thread_count(tmp_path):
    cfg = write_cfg(tmp_path, tiny())
    r = run_cli("run", "--config", cfg, "--threads", "0")
    assert r.returncode == 2
    r = run_cli("run", "--config", cfg, env_extra={"BMCHECK_THREADS": "soup"})
    assert r.returncode == 2
