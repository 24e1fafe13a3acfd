from __future__ import annotations

import numpy as np
import pytest
import scipy.sparse as sp

from occusafe.conic import ConicProgram, PSDBlock, dump_program, load_program
from occusafe.relaxation import assemble_primal
from occusafe.solver import (
    SolverError,
    SolverOptions,
    Status,
    kkt_residuals,
    solve,
    to_standard_form,
)


def dense_block(name: str, F0: np.ndarray, Fs: list[np.ndarray]) -> PSDBlock:
    """``F0 + sum_i z_i Fs[i]`` from dense symmetric matrices."""
    d = F0.shape[0]
    r, c = np.tril_indices(d)
    rows, cols, var, coef = [], [], [], []
    for i, F in enumerate(Fs):
        nz = F[r, c] != 0
        rows += list(r[nz])
        cols += list(c[nz])
        var += [i] * int(nz.sum())
        coef += list(F[r, c][nz])
    return PSDBlock(name, d, rows, cols, var, coef, constant=F0 if np.any(F0) else None)


def program(c, blocks, A=None, b=None) -> ConicProgram:
    n = len(c)
    A = sp.csr_matrix((0, n)) if A is None else sp.csr_matrix(np.atleast_2d(A))
    b = np.zeros(0) if b is None else np.atleast_1d(np.asarray(b, dtype=float))
    return ConicProgram(n, np.asarray(c, dtype=float), A, b, blocks)


E11, E12, E22 = np.array([[1.0, 0], [0, 0]]), np.array([[0, 1.0], [1, 0]]), np.array([[0, 0], [0, 1.0]])


def test_example_disc():
    prog = program([1.0], [dense_block("M", np.eye(2), [E12])])
    sol = solve(prog)
    assert sol.status == Status.OPTIMAL
    assert sol.primal_objective == pytest.approx(1.0, abs=1e-6)


def test_example_pinned_scalar():
    prog = program([1.0], [dense_block("s", np.zeros((1, 1)), [np.eye(1)])], A=[[1.0]], b=[0.5])
    sol = solve(prog)
    assert sol.status == Status.OPTIMAL and sol.x[0] == pytest.approx(0.5, abs=1e-7)


def _slack_example() -> ConicProgram:
    # z = (y1, y2, s): [[1, y1], [y1, y2]] >= 0, y2 + s = 2, s >= 0
    M = dense_block("M", E11, [E12, E22, np.zeros((2, 2))])
    S = dense_block("s", np.zeros((1, 1)), [np.zeros((1, 1)), np.zeros((1, 1)), np.eye(1)])
    return program([1.0, 1.0, 0.0], [M, S], A=[[0.0, 1.0, 1.0]], b=[2.0])


def _grid_max(c, feasible, lo=-3.0, hi=3.0, k=1201) -> float:
    g = np.linspace(lo, hi, k)
    Y1, Y2 = np.meshgrid(g, g, indexing="ij")
    ok = feasible(Y1, Y2)
    vals = c[0] * Y1 + c[1] * Y2
    return float(vals[ok].max())


def test_example_slack_row_against_grid():
    sol = solve(_slack_example())
    assert sol.status == Status.OPTIMAL
    grid = _grid_max(np.array([1.0, 1.0]), lambda a, b: (b >= 0) & (b - a * a >= 0) & (b <= 2))
    assert abs(sol.primal_objective - grid) <= 1e-2
    assert sol.primal_objective == pytest.approx(2 + np.sqrt(2), abs=1e-6)


def _random_sdp(rng):
    """Random 3x3 LMI in two variables plus box rows keeping the set inside [-3, 3]^2."""
    A = rng.normal(size=(3, 3))
    F0 = A @ A.T + 0.5 * np.eye(3)
    F1, F2 = (0.5 * (B + B.T) for B in rng.normal(size=(2, 3, 3)))
    boxes = []
    for i in range(2):
        for sgn in (1.0, -1.0):
            Fs = [np.zeros((1, 1)), np.zeros((1, 1))]
            Fs[i] = np.array([[sgn]])
            boxes.append(dense_block(f"box{i}{'+' if sgn > 0 else '-'}", np.array([[3.0]]), Fs))
    c = rng.normal(size=2)
    c /= np.linalg.norm(c)
    prog = program(c, [dense_block("lmi", F0, [F1, F2])] + boxes)

    def feasible(Y1, Y2):
        # a symmetric 3x3 matrix is PSD iff all its principal minors are >= 0
        M = F0[None, None] + Y1[..., None, None] * F1 + Y2[..., None, None] * F2
        ok = np.linalg.det(M) >= 0
        for i in range(3):
            ok &= M[..., i, i] >= 0
            j, k = [m for m in range(3) if m != i]
            ok &= M[..., j, j] * M[..., k, k] - M[..., j, k] ** 2 >= 0
        return ok

    return prog, c, feasible


def test_random_sdps_against_grid():
    rng = np.random.default_rng(2024)
    for _ in range(50):
        prog, c, feasible = _random_sdp(rng)
        sol = solve(prog)
        assert sol.status == Status.OPTIMAL
        grid = _grid_max(c, feasible)
        assert abs(sol.primal_objective - grid) <= 1e-2
        assert sol.primal_objective >= grid - 1e-7  # the grid only sees feasible points


def test_kkt_residuals_recomputed():
    rng = np.random.default_rng(7)
    progs = [_slack_example()] + [_random_sdp(rng)[0] for _ in range(10)]
    for prog in progs:
        sol = solve(prog)
        res = kkt_residuals(prog, sol.x, sol.row_duals, sol.block_duals)
        assert abs(res.primal - sol.primal_residual) <= 1e-12
        assert abs(res.dual - sol.dual_residual) <= 1e-12
        assert abs(res.gap - sol.relative_gap) <= 1e-12
        assert abs(res.pobj - sol.primal_objective) <= 1e-12 * max(1.0, abs(res.pobj))
        assert abs(res.dobj - sol.dual_objective) <= 1e-12 * max(1.0, abs(res.dobj))


def test_optimal_meets_contract():
    rng = np.random.default_rng(8)
    opts = SolverOptions()
    for _ in range(10):
        prog, _, _ = _random_sdp(rng)
        sol = solve(prog, opts)
        assert sol.status == Status.OPTIMAL
        assert sol.primal_residual <= opts.feasibility_tol
        assert sol.min_block_eigenvalue >= -opts.feasibility_tol
        assert sol.relative_gap <= opts.gap_tol


def test_self_duality_on_strictly_feasible():
    rng = np.random.default_rng(9)
    for _ in range(20):
        prog, _, _ = _random_sdp(rng)
        sol = solve(prog)
        assert abs(sol.primal_objective - sol.dual_objective) <= 1e-7


def test_reproducible():
    rng = np.random.default_rng(10)
    prog, _, _ = _random_sdp(rng)
    a, b = solve(prog), solve(prog)
    assert a.iterations == b.iterations
    assert a.primal_objective == b.primal_objective and a.dual_objective == b.dual_objective


def test_infeasible_detected():
    # z >= 0 and z = -1
    prog = program([1.0], [dense_block("s", np.zeros((1, 1)), [np.eye(1)])], A=[[1.0]], b=[-1.0])
    assert solve(prog).status == Status.INFEASIBLE


def test_unbounded_detected():
    prog = program([1.0], [dense_block("s", np.zeros((1, 1)), [np.eye(1)])])
    assert solve(prog).status == Status.UNBOUNDED


def test_empty_program_rejected():
    with pytest.raises(SolverError):
        solve(program([1.0], []))


def test_unknown_backend():
    with pytest.raises(SolverError):
        solve(_slack_example(), backend="nope")


def test_pure_lp_path():
    prog = program([1.0, 1.0], [], A=[[1.0, 1.0]], b=[3.0])
    sol = solve(prog)
    assert sol.status == Status.OPTIMAL and sol.primal_objective == pytest.approx(3.0)


def test_iteration_limit_status():
    rng = np.random.default_rng(11)
    prog, _, _ = _random_sdp(rng)
    assert solve(prog, SolverOptions(max_iterations=2)).status == Status.ITERATION_LIMIT


def test_options_validated():
    with pytest.raises(ValueError):
        SolverOptions(feasibility_tol=0.0)


# -- standard form -------------------------------------------------------------------


def test_standard_form_single_block():
    prog = program([1.0], [dense_block("M", np.eye(2), [E12])])
    sf = to_standard_form(prog)
    assert len(sf.blocks) == 1 and sf.A.shape == (0, 1)
    x, duals, zs = sf.recover(np.array([0.25]), np.zeros(0), [np.eye(2)])
    assert x[0] == 0.25 and duals.shape == (0,) and np.array_equal(zs[0], np.eye(2))


def test_standard_form_relaxation_counts(vanderpol_normalized):
    q, _ = vanderpol_normalized
    prog = assemble_primal(q, 2)
    sf = to_standard_form(prog)
    assert sf.n_vars == 120
    assert len(sf.blocks) == len(prog.blocks) and max(b.dim for b in sf.blocks) == 10
    assert sf.A.shape[0] == prog.n_rows
    # rows are scaled to unit infinity norm
    np.testing.assert_allclose(np.abs(sf.A).max(axis=1), 1.0)


def test_standard_form_no_blocks():
    sf = to_standard_form(program([1.0, 0.0], [], A=[[2.0, 0.0]], b=[4.0]))
    assert sf.blocks == [] and sf.b[0] == pytest.approx(2.0)


# -- debug dump ----------------------------------------------------------------------


def test_dump_round_trip(tmp_path):
    prog = _slack_example()
    path = tmp_path / "p.txt"
    dump_program(prog, path)
    back = load_program(path)
    assert back.n_vars == prog.n_vars and back.n_rows == prog.n_rows
    np.testing.assert_array_equal(back.objective, prog.objective)
    a, b = solve(prog), solve(back)
    assert a.primal_objective == b.primal_objective


def test_cvxopt_backend_agrees():
    pytest.importorskip("cvxopt")
    prog = _slack_example()
    a, b = solve(prog), solve(prog, backend="cvxopt")
    assert b.backend == "cvxopt"
    assert b.primal_objective == pytest.approx(a.primal_objective, abs=1e-6)
