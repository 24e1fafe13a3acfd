from __future__ import annotations

import csv
import json
from dataclasses import asdict

import pytest

from occusafe import cli
from occusafe.cli import (
    OrderRecord,
    ProblemFileError,
    RunConfig,
    emit_report,
    load_problem,
    load_report,
    monotonicity_warnings,
    parse_orders,
    run_hierarchy,
)
from occusafe.polyalg import parse_inequality
from occusafe.problem import Dirac, UniformBox
from occusafe.solver import SolverOptions

EXPONENTIAL = {
    "variables": ["x"],
    "T": 10.0,
    "dynamics": ["-x"],
    "X": ["1 - x^2 >= 0"],
    "X_u": ["x >= 0.5", "1 - x^2 >= 0"],
    "box": [[-1, 1]],
    "initial": {"dirac": [1.0]},
}


def _write(tmp_path, doc, name="p.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return path


# -- problem files ------------------------------------------------------------------


def test_bundled_vanderpol():
    p = load_problem("vanderpol")
    assert p.T == 10.0 and p.initial == Dirac((2.0, 0.0))
    V = ["x1", "x2"]
    assert parse_inequality("x1 >= 0", V) in p.X_u and parse_inequality("x2 <= 1", V) in p.X_u
    assert parse_inequality("52*(x1 - 0.25)^2 - (x2 + 0.5)^2 <= 1", V) in p.X_u
    assert p.box == ((-3.0, 3.0), (-3.0, 3.0))


def test_missing_dynamics_names_field(tmp_path):
    doc = dict(EXPONENTIAL)
    del doc["dynamics"]
    with pytest.raises(ProblemFileError, match="^dynamics"):
        load_problem(_write(tmp_path, doc))


def test_negative_horizon_rejected(tmp_path):
    with pytest.raises(ProblemFileError, match="^T"):
        load_problem(_write(tmp_path, {**EXPONENTIAL, "T": -1}))


def test_parse_error_has_location(tmp_path):
    with pytest.raises(ProblemFileError, match=r"^X_u\[0\]"):
        load_problem(_write(tmp_path, {**EXPONENTIAL, "X_u": ["x >= 0.5 +"]}))


def test_wrong_dynamics_count(tmp_path):
    with pytest.raises(ProblemFileError, match="^dynamics"):
        load_problem(_write(tmp_path, {**EXPONENTIAL, "dynamics": ["-x", "x"]}))


def test_initial_kinds(tmp_path):
    p = load_problem(_write(tmp_path, {**EXPONENTIAL, "initial": {"uniform_box": {"lo": [0.9], "hi": [1.1]}}}))
    assert p.initial == UniformBox((0.9,), (1.1,))
    with pytest.raises(ProblemFileError, match="initial"):
        load_problem(_write(tmp_path, {**EXPONENTIAL, "initial": {"gaussian": [0.0]}}))
    with pytest.raises(ProblemFileError, match="^initial"):
        load_problem(_write(tmp_path, {**EXPONENTIAL, "initial": {"moments": {"degree": 2, "values": [0.5, 0, 0]}}}))


def test_bad_box(tmp_path):
    with pytest.raises(ProblemFileError, match=r"box\[0\]"):
        load_problem(_write(tmp_path, {**EXPONENTIAL, "box": [[1, -1]]}))


def test_unknown_bundled_name():
    with pytest.raises(ProblemFileError):
        load_problem("no_such_problem")


# -- orders and config ----------------------------------------------------------------


def test_parse_orders():
    assert parse_orders("2:5") == [2, 3, 4, 5]
    assert parse_orders("1,3,4") == [1, 3, 4]
    for bad in ("", "0:2", "3,2", "2,2", "a:b"):
        with pytest.raises(ValueError):
            parse_orders(bad)


def test_run_config_invariants():
    with pytest.raises(ValueError):
        RunConfig("x", orders=[])
    with pytest.raises(ValueError):
        RunConfig("x", orders=[3, 2])
    with pytest.raises(ValueError):
        RunConfig("x", jobs=0)
    assert RunConfig("x").orders == [2, 3, 4, 5]


def _record(r: int, bound: float, status: str = "optimal") -> OrderRecord:
    return OrderRecord(r, bound, 10 * bound, bound, 10 * bound, status, 1, 0.0, 0.0, 0.0, 0.0, 1.0)


def test_monotonicity_warning():
    assert monotonicity_warnings([_record(2, 0.5), _record(3, 0.5 + 5e-7)]) == []
    assert len(monotonicity_warnings([_record(2, 0.5), _record(3, 0.51)])) == 1
    # failed orders are skipped
    assert monotonicity_warnings([_record(2, 0.5), _record(3, 0.9, "numerical-failure"), _record(4, 0.4)]) == []


# -- hierarchy runs ---------------------------------------------------------------------


def test_toy_exactness():
    rep = run_hierarchy(RunConfig("cubic_whole", orders=[1, 2, 3]))
    assert rep.exit_code == 0 and rep.warnings == []
    for rec in rep.orders:
        assert rec.bound_normalized == pytest.approx(1.0, abs=1e-6)
        assert rec.bound_seconds == rec.bound_normalized * 2.0


def test_exponential_report_and_csv(tmp_path):
    out, csv_path = tmp_path / "r.json", tmp_path / "r.csv"
    cfg = RunConfig("exponential", orders=[2, 3, 4], certificates=True, out=str(out), csv=str(csv_path))
    rep = run_hierarchy(cfg)
    emit_report(rep, cfg.out, cfg.csv)
    assert rep.exit_code == 0
    assert rep.config["orders"] == [2, 3, 4] and rep.scaling["T"] == 10.0
    for rec in rep.orders:
        assert rec.bound_seconds == rec.bound_normalized * 10.0
        assert rec.certificate["passed"]
    with open(csv_path) as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["r", "bound_seconds", "dual_seconds", "status", "solve_time"] and len(rows) == 4
    bounds = [float(row[1]) for row in rows[1:]]
    assert all(b <= a + 1e-5 for a, b in zip(bounds, bounds[1:]))
    back = load_report(out)
    assert back == rep


def test_deterministic_modulo_wall_clock():
    def strip(rep):
        d = rep.to_dict()
        for o in d["orders"]:
            o.pop("solve_seconds")
        return d

    cfg = RunConfig("exponential", orders=[2, 3])
    assert strip(run_hierarchy(cfg)) == strip(run_hierarchy(cfg))


def test_failed_order_sets_exit_code():
    rep = run_hierarchy(RunConfig("exponential", orders=[2, 3], solver=SolverOptions(max_iterations=2)))
    assert rep.exit_code == 1
    assert len(rep.orders) == 2 and all(rec.status == "iteration-limit" for rec in rep.orders)


def test_simulation_in_report():
    rep = run_hierarchy(RunConfig("exponential", orders=[2], simulate=cli.SimulationRequest()))
    assert rep.oracle["seconds"] == pytest.approx(0.6931471805599453, abs=1e-6)
    assert rep.orders[0].bound_seconds >= rep.oracle["seconds"]


# -- command line ---------------------------------------------------------------------------


def test_main_solve(tmp_path, capsys):
    out = tmp_path / "r.json"
    code = cli.main(["solve", "--problem", "cubic_whole", "--orders", "1,2", "--out", str(out), "--csv", str(tmp_path / "r.csv")])
    assert code == 0
    assert "r=1" in capsys.readouterr().out
    assert len(load_report(out).orders) == 2


def test_main_validation_error_exit_code(tmp_path, capsys):
    path = _write(tmp_path, {**EXPONENTIAL, "T": -1})
    assert cli.main(["solve", "--problem", str(path), "--out", str(tmp_path / "r.json")]) == 2
    assert capsys.readouterr().err.startswith("error: T")


def test_main_bad_orders(tmp_path):
    assert cli.main(["solve", "--problem", "exponential", "--orders", "3:2", "--out", str(tmp_path / "r.json")]) == 2


def test_main_simulate(tmp_path, capsys):
    traj = tmp_path / "traj.csv"
    assert cli.main(["simulate", "--problem", "exponential", "--dump-traj", str(traj)]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["seconds"] == pytest.approx(0.6931471805599453, abs=1e-6) and doc["T"] == 10.0
    assert traj.read_text().splitlines()[0] == "t,x,unsafe"


def test_report_dict_is_json_serializable():
    rep = run_hierarchy(RunConfig("cubic_whole", orders=[1]))
    json.dumps(rep.to_dict())
    assert asdict(rep.orders[0])["r"] == 1
