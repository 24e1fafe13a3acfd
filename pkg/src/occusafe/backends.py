"""Optional external backend: CVXOPT's ``conelp`` behind the common ``solve`` signature.

Imported lazily by :func:`occusafe.solver.solve` when ``backend="cvxopt"``.
"""

from __future__ import annotations

import time

import numpy as np
import scipy.sparse as sp

from .conic import ConicProgram
from .solver import (
    Solution,
    SolverError,
    SolverOptions,
    Status,
    _finish,
    register_backend,
)

_STATUS = {
    "optimal": Status.OPTIMAL,
    "unknown": Status.OPTIMAL,  # residuals decide, see _finish
    "primal infeasible": Status.INFEASIBLE,
    "dual infeasible": Status.UNBOUNDED,
}


def _cone_matrices(program: ConicProgram) -> tuple[sp.coo_matrix, np.ndarray, list[int]]:
    """``G`` and ``h`` with ``G x + s = h``, ``s`` the column-major stack of every ``F_k(x)``."""
    rows, cols, vals, h, dims = [], [], [], [], []
    off = 0
    for blk in program.blocks:
        d = blk.dim
        rows.append(off + blk.cols * d + blk.rows)
        cols.append(blk.var)
        vals.append(-blk.coef)
        lo = blk.rows != blk.cols
        rows.append(off + blk.rows[lo] * d + blk.cols[lo])
        cols.append(blk.var[lo])
        vals.append(-blk.coef[lo])
        C = blk.constant if blk.constant is not None else np.zeros((d, d))
        h.append(C.ravel(order="F"))
        dims.append(d)
        off += d * d
    G = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(off, program.n_vars)
    )
    G.sum_duplicates()
    return G, np.concatenate(h), dims


def _spmatrix(M: sp.spmatrix):
    from cvxopt import spmatrix

    M = sp.coo_matrix(M)
    return spmatrix(M.data.tolist(), M.row.tolist(), M.col.tolist(), size=M.shape)


def solve_cvxopt(program: ConicProgram, opts: SolverOptions) -> Solution:
    try:
        from cvxopt import matrix, solvers
    except ImportError as exc:  # pragma: no cover - depends on the environment
        raise SolverError("the cvxopt backend needs the 'cvxopt' package") from exc
    t0 = time.perf_counter()
    G, h, dims = _cone_matrices(program)
    args = [matrix(-program.objective), _spmatrix(G), matrix(h), {"l": 0, "q": [], "s": dims}]
    if program.n_rows:
        args += [_spmatrix(program.A), matrix(program.b)]
    options = {
        "show_progress": opts.verbose,
        "maxiters": opts.max_iterations,
        "abstol": opts.gap_tol,
        "reltol": opts.gap_tol,
        "feastol": opts.feasibility_tol,
        "refinement": opts.refinement,
    }
    try:
        res = solvers.conelp(*args, options=options)
    except (ValueError, ArithmeticError) as exc:
        raise SolverError(f"cvxopt: {exc}") from exc
    status = _STATUS.get(res["status"], Status.NUMERICAL_FAILURE)
    if res["x"] is None:
        n = program.n_vars
        return Solution(status, np.nan, np.nan, np.zeros(n), np.zeros(program.n_rows), [], res["iterations"],
                        time.perf_counter() - t0, backend="cvxopt", message=res["status"])
    x = np.array(res["x"]).ravel()
    u = np.array(res["y"]).ravel() if program.n_rows else np.zeros(0)
    z = np.array(res["z"]).ravel()
    Zs, off = [], 0
    for d in dims:
        Z = z[off : off + d * d].reshape((d, d), order="F")
        Zs.append(0.5 * (Z + Z.T))
        off += d * d
    sol = _finish(program, Status.OPTIMAL, x, u, Zs, res["iterations"], t0, opts, "cvxopt", res["status"])
    if status != Status.OPTIMAL:
        sol.status = status
    return sol


register_backend("cvxopt", solve_cvxopt)
