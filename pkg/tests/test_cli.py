import csv
import json
import os

import numpy as np
import pytest
from numpy.testing import assert_allclose

from mlzsim.analytic import dtcm5_probabilities
from mlzsim.cli import RunConfig, main, model_from_spec, parse_config, run
from mlzsim.errors import ParseError, SchemaError

CONFIG_DIR = os.path.join(os.path.dirname(__file__), "..", "configs")


def minimal_simulate(schedule=(5.0,), couplings=((1, 2, 0.25),)):
    return {
        "command": "simulate",
        "model": {"family": "generic",
                  "params": {"beta": [1.0, -1.0],
                             "couplings": [list(c) for c in couplings]}},
        "propagation": {"t_max": max(schedule), "dt0": 0.05},
        "schedule": list(schedule),
    }


# ---------------------------------------------------------------------------
# parsing
# ---------------------------------------------------------------------------

def test_parse_minimal_simulate():
    config = parse_config(json.dumps(minimal_simulate()))
    assert config.command == "simulate"
    assert config.model.n == 2


def test_parse_rejects_invalid_json():
    with pytest.raises(ParseError):
        parse_config("{not json")


def test_parse_rejects_duplicate_slopes_naming_field():
    cfg = minimal_simulate()
    cfg["model"]["params"]["beta"] = [1.0, 1.0]
    with pytest.raises(SchemaError) as err:
        parse_config(json.dumps(cfg))
    pointers = [ptr for ptr, _ in err.value.violations]
    assert "/model/params/beta" in pointers


def test_parse_collects_all_violations():
    bad = {
        "command": "simulate",
        "model": {"family": "unknown_family", "params": {}},
        "propagation": {"t_max": -5.0},
        "extra_key": 1,
    }
    with pytest.raises(SchemaError) as err:
        parse_config(json.dumps(bad))
    pointers = " ".join(ptr for ptr, _ in err.value.violations)
    assert "/model/family" in pointers
    assert "/propagation/t_max" in pointers
    assert "extra_key" in str(err.value) or "extra_key" in pointers


def test_parse_command_mismatch():
    with pytest.raises(SchemaError):
        parse_config(json.dumps(minimal_simulate()), command="scan")


def test_parse_requires_sections():
    with pytest.raises(SchemaError) as err:
        parse_config(json.dumps({"command": "verify"}))
    pointers = [ptr for ptr, _ in err.value.violations]
    assert "/model" in pointers and "/source" in pointers


def test_model_from_spec_families():
    spec = {"family": "dtcm", "params": {"n_states": 4, "g": 0.3, "n_b": 0.0}}
    assert model_from_spec(spec).n == 4
    spec = {"family": "bowtie",
            "params": {"beta0": 0.0, "others": [[1.0, 0.3], [2.0, 0.1, 0.2]]}}
    m = model_from_spec(spec)
    assert m.a[0, 2] == 0.1 + 0.2j


# ---------------------------------------------------------------------------
# running
# ---------------------------------------------------------------------------

def test_simulate_zero_couplings_identity(tmp_path):
    cfg = minimal_simulate(couplings=())
    config = parse_config(json.dumps(cfg))
    assert run(config, str(tmp_path)) == 0
    with open(tmp_path / "simulate.csv", newline="") as handle:
        rows = list(csv.DictReader(handle))
    assert len(rows) == 4
    for row in rows:
        expected = 1.0 if row["i"] == row["j"] else 0.0
        assert abs(float(row["p_ij"]) - expected) < 1e-12


def test_simulate_csv_full_precision(tmp_path):
    config = parse_config(json.dumps(minimal_simulate()))
    run(config, str(tmp_path))
    text = (tmp_path / "simulate.csv").read_text()
    assert text.endswith("\n") and "\r" not in text
    value = text.splitlines()[1].split(",")[3]
    assert float(value) == float(repr(float(value)))  # round-trips exactly


def test_verify_triangle_not_bipartite_exit2(tmp_path, capsys):
    cfg = {
        "command": "verify",
        "model": {"family": "generic",
                  "params": {"beta": [1.0, 0.0, -1.0],
                             "couplings": [[1, 2, 0.1], [2, 3, 0.1],
                                           [1, 3, 0.1]]}},
        "source": {"kind": "numeric", "t_max": 10.0, "dt0": 0.05},
    }
    config = parse_config(json.dumps(cfg))
    assert run(config, str(tmp_path)) == 2
    err = capsys.readouterr().err
    diag = json.loads(err.strip().splitlines()[-1])
    assert diag["error"] == "NotBipartite"


def test_verify_analytic_bowtie_passes(tmp_path):
    cfg = json.load(open(os.path.join(CONFIG_DIR, "verify_bowtie3.json")))
    config = parse_config(json.dumps(cfg))
    assert run(config, str(tmp_path)) == 0
    reports = json.load(open(tmp_path / "verify_bowtie3.json"))
    assert all(r["pass"] for r in reports)
    assert {"bipartite_symmetry", "trace_identity"} <= {r["name"] for r in reports}


def test_verify_impossible_tolerance_exit1(tmp_path):
    cfg = {
        "command": "verify",
        "model": {"family": "bowtie",
                  "params": {"beta0": 0.0, "others": [[2.0, 0.4], [1.0, 0.3]]}},
        "source": {"kind": "numeric", "t_max": 30.0, "dt0": 0.1},
        "checks": ["hierarchy"],
        "tolerance": 1e-30,
    }
    config = parse_config(json.dumps(cfg))
    assert run(config, str(tmp_path)) == 1


def test_analytic_fig6_matches_module_output(tmp_path):
    cfg = json.load(open(os.path.join(CONFIG_DIR, "fig6.json")))
    config = parse_config(json.dumps(cfg))
    assert run(config, str(tmp_path)) == 0
    with open(tmp_path / "fig6.csv", newline="") as handle:
        rows = list(csv.DictReader(handle))
    for g in (0.1, 0.2, 0.3, 0.4, 0.5):
        expected = dtcm5_probabilities(g).p
        block = [r for r in rows if json.loads(r["params"])["g"] == g]
        assert len(block) == 25
        for row in block:
            i, j = int(row["i"]) - 1, int(row["j"]) - 1
            assert_allclose(float(row["p_ij"]), expected[i, j], rtol=1e-15)


def test_analytic_json_format(tmp_path):
    cfg = {
        "command": "analytic",
        "family": "bowtie3",
        "params": {"beta1": 2.0, "beta2": 1.0, "g1": 0.4, "g2": 0.3},
        "output": {"format": "json", "stem": "bt"},
    }
    config = parse_config(json.dumps(cfg))
    assert run(config, str(tmp_path)) == 0
    payload = json.load(open(tmp_path / "bt.json"))
    assert payload[0]["family"] == "bowtie3"
    s = payload[0]["s"]
    assert len(s) == 3 and len(s[0][0]) == 2  # re/im pairs


def test_stokes_command_closed_form(tmp_path):
    cfg = {
        "command": "stokes",
        "model": {"family": "bowtie",
                  "params": {"beta0": 0.0, "others": [[2.0, 0.5], [1.0, 0.4]]}},
        "source": {"kind": "analytic"},
    }
    config = parse_config(json.dumps(cfg))
    assert run(config, str(tmp_path)) == 0
    payload = json.load(open(tmp_path / "stokes.json"))
    assert payload["monodromy_pass"]
    assert len(payload["s1"]) == 3
    assert payload["s1"][0][0] == [1.0, 0.0]


def test_dual_command_populations(tmp_path):
    cfg = json.load(open(os.path.join(CONFIG_DIR, "dual_bowtie3.json")))
    config = parse_config(json.dumps(cfg))
    assert run(config, str(tmp_path)) == 0
    payload = json.load(open(tmp_path / "dual_bowtie3.json"))
    assert_allclose(payload["populations"], [5.0, 10.0, 15.0], rtol=1e-3)
    assert payload["pseudo_unitarity_residual"] < 1e-10


def test_scan_small_grid(tmp_path):
    cfg = {
        "command": "scan",
        "scan": {
            "model": {"family": "chain",
                      "params": {"beta": [1.0, 2.0, 3.0, 4.0],
                                 "g": [0.433, 0.707, 0.75]}},
            "vary": {"path": "g", "index": 3},
            "range": [0.55, 0.95],
            "grid_size": 5,
            "t_max": 250.0,
            "refine": {"threshold": 0.02},
        },
        "propagation": {"t_max": 250.0, "dt0": 0.004, "rule": "fixed"},
        "output": {"stem": "mini_scan"},
    }
    config = parse_config(json.dumps(cfg))
    assert run(config, str(tmp_path)) == 0
    summary = json.load(open(tmp_path / "mini_scan_summary.json"))
    assert summary["g_star"] is not None
    assert abs(summary["g_star"] - 0.75) < 0.03
    with open(tmp_path / "mini_scan.csv", newline="") as handle:
        rows = list(csv.DictReader(handle))
    assert len(rows) == 5


def test_scan_config_validates_range_models():
    cfg = {
        "command": "scan",
        "scan": {
            "model": {"family": "chain",
                      "params": {"beta": [1.0, 2.0], "g": [0.3]}},
            "vary": {"path": "beta", "index": 2},
            "range": [0.5, 1.0],  # beta collision at the top end
            "grid_size": 3,
            "t_max": 10.0,
        },
    }
    with pytest.raises(SchemaError):
        parse_config(json.dumps(cfg))


def test_main_end_to_end(tmp_path):
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps(minimal_simulate()))
    assert main(["simulate", "--config", str(cfg_path),
                 "--out", str(tmp_path)]) == 0
    assert (tmp_path / "simulate.csv").exists()


def test_main_missing_config(tmp_path, capsys):
    assert main(["simulate", "--config", str(tmp_path / "nope.json")]) == 2
    assert "ConfigIO" in capsys.readouterr().err


def test_main_schema_error_exit2(tmp_path, capsys):
    cfg_path = tmp_path / "bad.json"
    cfg_path.write_text(json.dumps({"command": "simulate"}))
    assert main(["simulate", "--config", str(cfg_path)]) == 2
    diag = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert diag["error"] == "SchemaError"


def test_all_shipped_configs_parse():
    for name in os.listdir(CONFIG_DIR):
        with open(os.path.join(CONFIG_DIR, name)) as handle:
            text = handle.read()
        config = parse_config(text)
        assert isinstance(config, RunConfig)
