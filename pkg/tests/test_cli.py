import csv
import json

import pytest

from fracsing import cli, report
from fracsing.config import ConfigError, from_dict, load_config
from fracsing.solver import SolverError

BASE = {
    "schema_version": 1,
    "mode": "problem",
    "grid": {"a": -1, "b": 1, "n_cells": 64},
    "s": 0.25,
    "q": 0.5,
    "h_spec": {"gamma": 0.5, "theta": 2},
    "f_spec": {"kind": "constant", "amplitude": 1},
    "mu_spec": {"kind": "l1_density", "profile": {"type": "constant", "value": 1}},
    "n_schedule": [1, 2, 4, 8, 16],
    "k_list": [1, 2, 4, 8, 16],
    "seed": 0,
}


def write_config(tmp_path, name="cfg.json", **changes):
    cfg = json.loads(json.dumps(BASE))
    cfg["output_dir"] = str(tmp_path / "out")
    for key, value in changes.items():
        if key == "n_cells":
            cfg["grid"]["n_cells"] = value
        else:
            cfg[key] = value
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return path


@pytest.mark.parametrize("change", [
    {"s": 1.5}, {"q": 0}, {"grid": {"a": 1, "b": 0, "n_cells": 16}}, {"grid": {"a": -1, "b": 1, "n_cells": 8.5}},
    {"k_list": [1, 2]}, {"n_schedule": [4, 2]}, {"tolerances": {"bogus": 1}}, {"h_spec": {"gamma": 2}},
    {"mode": "server"}, {"schema_version": 9}, {"seed": -1},
    {"mu_spec": {"kind": "l1_density", "profile": {"type": "power", "exponent": 1.2, "center": 0.1}}},
])
def test_config_revalidates_ranges(change):
    raw = dict(BASE, **change)
    with pytest.raises(ConfigError):
        from_dict(raw)


def test_config_hash_ignores_output_dir():
    a = from_dict(dict(BASE, output_dir="x"))
    b = from_dict(dict(BASE, output_dir="y"))
    assert a.hash() == b.hash()
    assert a.hash() != from_dict(dict(BASE, seed=1)).hash()


def test_solve_writes_pinned_files(tmp_path):
    path = write_config(tmp_path)
    assert cli.main(["solve", str(path)]) == 0
    out = tmp_path / "out"
    with open(out / "solution.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["node", "x", "delta", "u"] and len(rows) == 64
    assert (out / "sequence.csv").read_text().splitlines()[0] == "n,next_n,gap,residual,newton_iters"
    rep = json.loads((out / "report.json").read_text())
    assert rep["schema_version"] == 1 and rep["exit_code"] == 0
    assert {c["name"] for c in rep["certificates"]} >= {"energy_growth", "entropy", "comparison", "hardy_sobolev"}


def test_output_dir_env_override(tmp_path, monkeypatch):
    path = write_config(tmp_path)
    monkeypatch.setenv("FRACSING_OUTPUT_DIR", str(tmp_path / "env"))
    assert cli.main(["solve", str(path)]) == 0
    assert (tmp_path / "env" / "report.json").exists()
    assert not (tmp_path / "out").exists()


def test_outside_regime_flag(tmp_path):
    path = write_config(tmp_path, s=0.75)
    assert cli.main(["solve", str(path)]) == 0
    rep = json.loads((tmp_path / "out" / "report.json").read_text())
    assert rep["outside_paper_regime"] is True
    assert "tail_exponent" not in {c["name"] for c in rep["certificates"]}


def test_malformed_config_writes_nothing(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text('{"grid": ')
    assert cli.main(["solve", str(bad)]) == 2
    bad.write_text(json.dumps(dict(BASE, s=2.0, output_dir=str(tmp_path / "out"))))
    assert cli.main(["solve", str(bad)]) == 2
    assert not (tmp_path / "out").exists()
    assert cli.main(["solve", str(tmp_path / "missing.json")]) == 2


def test_solver_failure_exit_code(tmp_path, monkeypatch):
    def boom(*args, **kwargs):
        raise SolverError("Newton stagnated", [(0.5, 1.0)])

    monkeypatch.setattr(report, "approximation_limit", boom)
    path = write_config(tmp_path)
    assert cli.main(["solve", str(path)]) == 3
    rep = json.loads((tmp_path / "out" / "report.json").read_text())
    assert rep["status"] == "solver_failure"
    assert rep["trace"][0] == "Newton stagnated"


def test_verify_roundtrip_and_mismatch(tmp_path):
    path = write_config(tmp_path)
    solved = report.run_solve(load_config(path))
    sol = tmp_path / "out" / "solution.csv"
    verified = report.run_verify(load_config(path), sol)
    shared = {name: solved.verdicts()[name] for name in verified.verdicts()}
    assert shared == verified.verdicts()
    other = write_config(tmp_path, name="c32.json", n_cells=32)
    assert cli.main(["verify", str(other), str(sol)]) == 2
    broken = tmp_path / "broken.csv"
    broken.write_text("node,x,u\n")
    assert cli.main(["verify", str(path), str(broken)]) == 2


def test_sweep_requires_consistent_axes(tmp_path):
    assert cli.main(["sweep", str(tmp_path / "none*.json")]) == 2
    write_config(tmp_path, name="a.json", n_cells=32)
    write_config(tmp_path, name="b.json", n_cells=64, seed=3)
    assert cli.main(["sweep", str(tmp_path / "*.json")]) == 2


def test_getoor_h_sweep_rate(tmp_path):
    for n in (64, 128, 256, 512):
        write_config(tmp_path, name=f"g{n}.json", n_cells=n, mode="getoor", s=0.4)
    rows, rates, code = report.run_sweep(report.load_configs(sorted(tmp_path.glob("g*.json"))), max_workers=2)
    assert code == 0 and len(rows) == 4
    assert rates[0][-1] >= 0.5
    assert [r[0] for r in rows] == sorted(r[0] for r in rows)
    assert (tmp_path / "out" / "sweep_rates.csv").exists()


def test_s_sweep_all_certificates_pass(tmp_path):
    for s in (0.1, 0.2, 0.3, 0.4):
        write_config(tmp_path, name=f"s{s}.json", s=s)
    assert cli.main(["sweep", str(tmp_path / "s*.json")]) == 0
    with open(tmp_path / "out" / "sweep.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 4 and all(r["all_pass"] == "1" for r in rows)
