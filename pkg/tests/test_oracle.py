from __future__ import annotations

import math

import numpy as np
import pytest

from occusafe.moments import dirac_moments
from occusafe.oracle import (
    OracleError,
    Trajectory,
    dump_trajectory,
    empirical_moments,
    expected_time,
    integrate,
    time_in_unsafe,
)
from occusafe.polyalg import parse_inequality, parse_poly
from occusafe.problem import RawMoments, SafetyProblem, UniformBox
from occusafe.relaxation import liouville_residuals, liouville_rows

from .conftest import exponential_problem

LN2 = math.log(2.0)


def test_exponential_closed_form():
    traj = integrate(exponential_problem(), [1.0], 1e-12, 1e-14)
    assert traj.state(1.0)[0] == pytest.approx(math.exp(-1.0), abs=1e-8)
    assert traj.t[0] == 0.0 and traj.t[-1] == 10.0
    assert np.all(np.diff(traj.t) > 0)
    assert np.diff(traj.t).max() <= 10.0 / 1000 + 1e-12


def test_zero_dynamics_constant():
    V = ["x"]
    p = SafetyProblem(1, [parse_poly("0", V)], 3.0, [], [], UniformBox((0,), (1,)))
    traj = integrate(p, [0.25])
    assert np.all(traj.x == 0.25)


def test_vanderpol_bounded(vanderpol):
    traj = integrate(vanderpol, vanderpol.initial.point)
    assert np.all(np.isfinite(traj.x)) and np.abs(traj.x).max() < 3.0
    # these dynamics run the oscillator backwards in time: the swing shrinks
    r = np.hypot(traj.x[:, 0], traj.x[:, 1])
    assert r[traj.t > 8.0].max() < r[traj.t < 2.0].max()


def test_trajectory_invariants():
    with pytest.raises(OracleError):
        Trajectory(np.array([0.0, 0.0]), np.zeros((2, 1)), 1e-9, 1e-12, 1, 1)


def test_integrate_argument_checks():
    p = exponential_problem()
    with pytest.raises(OracleError):
        integrate(p, [1.0, 2.0])
    with pytest.raises(OracleError):
        integrate(p, [1.0], rel_tol=0.0)


def test_blow_up_reported():
    V = ["x"]
    p = SafetyProblem(1, [parse_poly("x^2", V)], 2.0, [], [], UniformBox((0,), (1,)))
    with pytest.raises(OracleError, match="blow-up"):
        integrate(p, [2.0])


def test_time_in_unsafe_crossing():
    p = exponential_problem()
    assert time_in_unsafe(integrate(p, [1.0]), p.X_u) == pytest.approx(LN2, abs=1e-6)


def test_time_in_unsafe_whole_set():
    p = exponential_problem()
    assert time_in_unsafe(integrate(p, [1.0]), p.X) == 10.0


def test_refinement_is_monotone(vanderpol):
    traj = integrate(vanderpol, vanderpol.initial.point)
    a = time_in_unsafe(traj, vanderpol.X_u, 1e-10)
    b = time_in_unsafe(traj, vanderpol.X_u, 1e-12)
    assert abs(a - b) <= 1e-9


def test_convergence_order():
    """Global error on dx/dt = -x drops by >= 2^4 when the step halves (fixed steps via loose tolerance)."""
    p = exponential_problem(T=1.0)
    errs = []
    for h in (0.1, 0.05, 0.025):
        traj = integrate(p, [1.0], rel_tol=1.0, abs_tol=1.0, max_step=h)
        errs.append(abs(traj.x[-1, 0] - math.exp(-1.0)))
    assert errs[0] / errs[1] >= 16 and errs[1] / errs[2] >= 16


def test_expected_time_dirac_matches_single_run():
    p = exponential_problem()
    est = expected_time(p)
    assert est.standard_error == 0.0 and est.samples == 1
    assert est.seconds == time_in_unsafe(integrate(p, [1.0]), p.X_u)


def test_expected_time_box_whole_set():
    p = exponential_problem(initial=UniformBox((-0.5,), (0.5,)))
    p = SafetyProblem(p.n, p.dynamics, p.T, p.X, p.X, p.initial, box=p.box)
    est = expected_time(p, samples=8, seed=1)
    assert est.seconds == 10.0 and est.standard_error == 0.0


def test_expected_time_uniform_against_quadrature():
    p = exponential_problem(initial=UniformBox((0.9,), (1.1,)))
    p = SafetyProblem(p.n, p.dynamics, p.T, p.X, [parse_inequality("x >= 0.5", ["x"])], p.initial)
    est = expected_time(p, samples=200, seed=7)
    # E[ln(x0 / 0.5)] over x0 ~ U[0.9, 1.1], one-million-node midpoint rule
    nodes = 0.9 + 0.2 * (np.arange(1_000_000) + 0.5) / 1_000_000
    exact = float(np.mean(np.log(nodes / 0.5)))
    assert abs(est.seconds - exact) <= 3 * est.standard_error


def test_expected_time_seed_determinism():
    p = exponential_problem(initial=UniformBox((0.9,), (1.1,)))
    assert expected_time(p, samples=5, seed=3) == expected_time(p, samples=5, seed=3)


def test_expected_time_raw_moments_unsupported():
    p = exponential_problem(initial=RawMoments(1, (1.0, 0.0)))
    with pytest.raises(OracleError, match="moments"):
        expected_time(p)


def test_empirical_moments_examples():
    p = exponential_problem()
    y = empirical_moments(integrate(p, [1.0], max_step=1e-3), 2)
    assert y.mass == pytest.approx(10.0, abs=1e-12)
    assert y[(0, 1)] == pytest.approx(1 - math.exp(-10.0), abs=1e-6)
    V = ["x"]
    q = SafetyProblem(1, [parse_poly("0", V)], 2.0, [], [], UniformBox((0,), (1,)))
    z = empirical_moments(integrate(q, [0.5], max_step=1e-3), 3)
    for a in range(3):
        for k in range(3 - a + 1):
            assert z[(a, k)] == pytest.approx(0.5**k * 2.0 ** (a + 1) / (a + 1), rel=1e-6)


def test_empirical_moments_satisfy_liouville(vanderpol_normalized):
    q, _ = vanderpol_normalized
    traj = integrate(q, q.initial.point, 1e-12, 1e-14, max_step=1e-4)
    r = 3
    occ = empirical_moments(traj, 2 * r)
    fin = dirac_moments(traj.x[-1], 2 * r)
    res = liouville_residuals(q, r, occ, fin)
    assert len(res) == len(liouville_rows(q, r).rhs)
    assert np.abs(res).max() <= 1e-6


def test_dump_trajectory(tmp_path):
    p = exponential_problem()
    traj = integrate(p, [1.0])
    out = tmp_path / "traj.csv"
    dump_trajectory(traj, p.X_u, out, names=["x"])
    lines = out.read_text().splitlines()
    assert lines[0] == "t,x,unsafe"
    assert len(lines) == len(traj.t) + 1
    first, last = lines[1].split(","), lines[-1].split(",")
    assert float(first[0]) == 0.0 and first[2] == "1"
    assert float(last[0]) == 10.0 and last[2] == "0"


def test_unsafe_boundary_counts():
    # x stays exactly on the boundary of {x >= 0.5}
    V = ["x"]
    p = SafetyProblem(1, [parse_poly("0", V)], 1.0, [], [parse_inequality("x >= 0.5", V)], UniformBox((0,), (1,)))
    assert time_in_unsafe(integrate(p, [0.5]), p.X_u) == 1.0
