import csv
import json
import math
import subprocess
import sys

import jsonschema
import numpy as np
import pytest

from latelump.cli import (EXIT_ASSUMPTION, EXIT_CONFIG, EXIT_OK, load_schema, parse_config,
                          default_config, run)


def _cfg(tmp_path, **over):
    raw = default_config()
    for key, val in over.items():
        sect, _, name = key.partition("__")
        if name:
            raw[sect][name] = val
        else:
            raw[sect] = val
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(raw))
    return str(path)


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_desired_spectrum_csv(tmp_path):
    assert run(["spectrum", "--which", "Desired", "--out", str(tmp_path)]) == EXIT_OK
    rows = _rows(tmp_path / "spectrum_Desired.csv")
    assert rows[0] == ["set", "index", "re", "im"]
    vals = np.array([complex(float(r[2]), float(r[3])) for r in rows[1:]])
    assert {r[0] for r in rows[1:]} == {"Desired"}
    assert [int(r[1]) for r in rows[1:]] == list(range(len(vals)))
    assert np.min(np.abs(vals + 12)) < 1e-10
    branch = vals[vals.imag != 0]
    assert np.allclose(branch.real, -10, atol=1e-10)
    # round trip through 17 significant digits is exact
    assert all(float(r[2]) == float(format(float(r[2]), ".17g")) for r in rows[1:])
    key = np.lexsort((vals.imag, vals.real))
    assert np.array_equal(key, np.arange(len(vals)))
    assert (tmp_path / "spectrum.meta.json").exists()


def test_empty_window_header_only(tmp_path):
    cfg = _cfg(tmp_path, window={"re_min": -5.0, "im_max": 10.0, "re_max": 50.0})
    assert run(["spectrum", "--which", "Desired", "--config", cfg, "--out", str(tmp_path)]) == EXIT_OK
    assert _rows(tmp_path / "spectrum_Desired.csv") == [["set", "index", "re", "im"]]


@pytest.mark.parametrize("over", [{"approximation__n": 0}, {"approximation__zero_kernel": True}])
def test_closed_loop_fixed_points(tmp_path, over):
    cfg = _cfg(tmp_path, **over)
    for which in ("Intermediate", "ClosedLoop"):
        assert run(["spectrum", "--which", which, "--config", cfg, "--out", str(tmp_path)]) == EXIT_OK
    a = (tmp_path / "spectrum_Intermediate.csv").read_text().splitlines()
    b = (tmp_path / "spectrum_ClosedLoop.csv").read_text().splitlines()
    strip = lambda lines: [ln.split(",", 1)[1] for ln in lines[1:]]
    assert strip(a) == strip(b) and len(a) > 1


def test_design_report(tmp_path):
    assert run(["design", "--out", str(tmp_path)]) == EXIT_OK
    rep = json.loads((tmp_path / "design.json").read_text())
    jsonschema.validate(rep, load_schema("design_report.schema.json"))
    assert rep["controller"]["rho"] == pytest.approx(-0.7973, abs=1e-4)
    assert rep["assumptions_ok"] and "observer" in rep
    a = rep["controller"]["assumptions"]
    assert a["A2"]["a2_samples_max"] <= a["A2"]["a2_bound_M"]
    assert a["bounds"]["pairwise"]["ok"] and a["bounds"]["outside_disks"]["ok"]


def test_design_without_observer(tmp_path):
    raw = default_config()
    raw.pop("observer_target")
    path = tmp_path / "c.json"
    path.write_text(json.dumps(raw))
    assert run(["design", "--config", str(path), "--out", str(tmp_path)]) == EXIT_OK
    assert "observer" not in json.loads((tmp_path / "design.json").read_text())


@pytest.mark.parametrize("over", [
    {"controller_target": {"kappa": [12.0, 1.0], "mu": 1.5}},
    {"controller_target": {"kappa": [1.0, 2.0, 1.0], "mu": 0.5}},
    {"plant": {"alpha": -1.0, "beta": 21.0, "gamma": 31.0}},
])
def test_invalid_configs(tmp_path, over, capsys):
    cfg = _cfg(tmp_path, **over)
    assert run(["design", "--config", cfg, "--out", str(tmp_path)]) == EXIT_CONFIG
    assert "invalid configuration" in capsys.readouterr().err


def test_unknown_label(tmp_path):
    assert run(["spectrum", "--which", "Bogus", "--out", str(tmp_path)]) == EXIT_CONFIG


def test_non_hurwitz_target(tmp_path):
    cfg = _cfg(tmp_path, controller_target={"kappa": [-1.0, 1.0], "mu": 0.2})
    assert run(["design", "--config", cfg, "--out", str(tmp_path)]) == EXIT_ASSUMPTION
    rep = json.loads((tmp_path / "design.json").read_text())
    assert not rep["assumptions_ok"]
    assert not rep["controller"]["assumptions"]["A1"]["hurwitz"]


def test_parse_config_merges_defaults():
    cfg = parse_config({"approximation": {"n": 5}})
    assert cfg.n == 5 and cfg.epsilon == 0.9 and cfg.observer_target is not None
    assert cfg.controller_target.mu == pytest.approx(math.exp(-20 * cfg.plant.tau))


def test_converge_intermediate(tmp_path):
    assert run(["converge", "--n-min", "1", "--n-max", "10", "--out", str(tmp_path)]) == EXIT_OK
    rep = json.loads((tmp_path / "converge.json").read_text())
    jsonschema.validate(rep, load_schema("converge_report.schema.json"))
    assert rep["minimal_order"] <= 3 and rep["non_monotone"] == []
    rows = _rows(tmp_path / "converge.csv")
    assert rows[0] == ["n", "contained", "one_per_disk", "max_re", "hausdorff"] and len(rows) == 11


def test_converge_zero_kernel(tmp_path):
    cfg = _cfg(tmp_path, approximation={"n": 3, "basis": "Intermediate", "n_range": [0, 4],
                                        "zero_kernel": True})
    assert run(["converge", "--config", cfg, "--out", str(tmp_path)]) == EXIT_OK
    rep = json.loads((tmp_path / "converge.json").read_text())
    assert rep["minimal_order"] == 0 and all(r["contained"] for r in rep["reports"])


def test_simulate(tmp_path):
    assert run(["simulate", "--out", str(tmp_path)]) == EXIT_OK
    rep = json.loads((tmp_path / "simulate.json").read_text())
    jsonschema.validate(rep, load_schema("simulate_summary.schema.json"))
    assert rep["relative_gap"] < 0.1
    assert _rows(tmp_path / "simulate.csv")[0] == ["t", "energy", "u_re", "u_im"]


def test_simulate_degenerate_inputs(tmp_path):
    cfg = _cfg(tmp_path, simulation={"cells": 100, "T": 0.1, "x0": "zero", "t_start": 0.0,
                                     "n": 3, "loop": "closed"})
    assert run(["simulate", "--config", cfg, "--out", str(tmp_path)]) == EXIT_OK
    assert json.loads((tmp_path / "simulate.json").read_text())["fitted_rate"] is None
    assert all(float(r[1]) == 0 for r in _rows(tmp_path / "simulate.csv")[1:])
    cfg = _cfg(tmp_path, simulation={"cells": 100, "T": 0.0, "x0": "sine", "t_start": 0.0,
                                     "n": 3, "loop": "closed"})
    assert run(["simulate", "--config", cfg, "--out", str(tmp_path)]) == EXIT_OK
    assert len(_rows(tmp_path / "simulate.csv")) == 2


def test_open_loop_energy(tmp_path):
    cfg = _cfg(tmp_path, simulation={"cells": 400, "T": 0.1315, "x0": "eigen", "t_start": 0.0,
                                     "n": 0, "loop": "open"})
    assert run(["simulate", "--config", cfg, "--out", str(tmp_path)]) == EXIT_OK
    assert json.loads((tmp_path / "simulate.json").read_text())["energy_drift"] < 1e-3


def test_outputs_are_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for d in (a, b):
        assert run(["simulate", "--out", str(d)]) == EXIT_OK
        assert run(["design", "--out", str(d)]) == EXIT_OK
    for name in ("simulate.csv", "simulate.json", "design.json"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_observe(tmp_path):
    assert run(["observe", "--n-min", "1", "--n-max", "5", "--out", str(tmp_path)]) == EXIT_OK
    rep = json.loads((tmp_path / "observe.json").read_text())
    jsonschema.validate(rep, load_schema("observe_report.schema.json"))
    assert rep["minimal_order"] <= 3
    assert rep["simulation"]["relative_gap"] < 0.1


def test_module_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "latelump", "spectrum", "--which", "Desired",
                          "--out", str(tmp_path)], capture_output=True, text=True)
    assert res.returncode == 0, res.stderr
    assert (tmp_path / "spectrum_Desired.csv").exists()
