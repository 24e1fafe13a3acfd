"""Primal-dual interior-point solver for :class:`~occusafe.conic.ConicProgram`.

The embedded backend follows the homogeneous self-dual formulation used by
CVXOPT's ``conelp``: Nesterov-Todd scaling, Mehrotra predictor-corrector and
dense linear algebra.  The program is first brought to the standard form::

    minimize  c^T x   s.t.  G x + s = h,  A x = b,  s in S_+^{m_1} x ... x S_+^{m_K}

with ``s_k = F_k(x)`` the slack matrix of block ``k``, ``G x = -sum_i x_i F_ki``
and ``h_k = F_k0``.  Equality rows are scaled to unit infinity norm.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp

from .conic import ConicProgram

log = logging.getLogger(__name__)

STEP = 0.99
EXPON = 3
NEAR_FACTOR = 1e3
KKT_ACCURACY = 1e-9  # switch to the QR-based solve above this relative residual
KKT_GIVE_UP = 1e-2
STALL_ITERATIONS = 1000


class Status(str, Enum):
    OPTIMAL = "optimal"
    NEAR_OPTIMAL = "near-optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    ITERATION_LIMIT = "iteration-limit"
    NUMERICAL_FAILURE = "numerical-failure"


class SolverError(RuntimeError):
    pass


@dataclass(frozen=True)
class SolverOptions:
    max_iterations: int = 200
    feasibility_tol: float = 1e-8
    gap_tol: float = 1e-8
    verbose: bool = False
    refinement: int = 5

    def __post_init__(self):
        if not (self.feasibility_tol > 0 and self.gap_tol > 0):
            raise ValueError("solver tolerances must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")


@dataclass
class Solution:
    status: Status
    primal_objective: float
    dual_objective: float
    x: np.ndarray
    row_duals: np.ndarray
    block_duals: list[np.ndarray]
    iterations: int
    wall_time: float
    primal_residual: float = float("nan")
    dual_residual: float = float("nan")
    relative_gap: float = float("nan")
    min_block_eigenvalue: float = float("nan")
    backend: str = "embedded"
    message: str = ""

    @property
    def ok(self) -> bool:
        return self.status in (Status.OPTIMAL, Status.NEAR_OPTIMAL)


@dataclass(frozen=True)
class Residuals:
    primal: float
    dual: float
    gap: float
    min_eig: float
    pobj: float
    dobj: float


def kkt_residuals(
    program: ConicProgram, x: np.ndarray, row_duals: np.ndarray, block_duals: list[np.ndarray]
) -> Residuals:
    """Residuals of a primal/dual pair in the program's own units.

    primal: ``|A x - b|_inf / (1 + |b|_inf)``; dual:
    ``|A^T u - F^*(Z) - c|_inf / (1 + |c|_inf)``; gap: ``|p - d| / (1 + |p|)``.
    """
    A, b, c = program.A, program.b, program.objective
    n = program.n_vars
    pres = np.abs(A @ x - b).max(initial=0.0) / (1.0 + np.abs(b).max(initial=0.0))
    adj = np.zeros(n)
    dobj = float(b @ row_duals)
    min_eig = np.inf
    for blk, Z in zip(program.blocks, block_duals):
        adj += blk.adjoint(Z, n)
        if blk.constant is not None:
            dobj += float(np.vdot(blk.constant, Z))
        min_eig = min(min_eig, float(np.linalg.eigvalsh(blk.evaluate(x))[0]))
    dres = np.abs(A.T @ row_duals - adj - c).max(initial=0.0) / (1.0 + np.abs(c).max(initial=0.0))
    pobj = float(c @ x)
    gap = abs(pobj - dobj) / (1.0 + abs(pobj))
    return Residuals(float(pres), float(dres), float(gap), float(min_eig), pobj, dobj)


# -- standard form ------------------------------------------------------------


@dataclass
class StdBlock:
    name: str
    dim: int
    used: np.ndarray  # program variables appearing in the block
    F: np.ndarray  # (len(used), dim, dim) coefficient matrices
    F0: np.ndarray  # constant term

    @property
    def Fflat(self) -> np.ndarray:
        return self.F.reshape(len(self.used), -1)


@dataclass
class StandardForm:
    """Minimization form plus what is needed to map results back."""

    c: np.ndarray
    A: np.ndarray
    b: np.ndarray
    row_scale: np.ndarray
    kept_rows: np.ndarray
    blocks: list[StdBlock]
    n_vars: int
    n_rows_original: int
    inconsistent_rows: list[int] = field(default_factory=list)

    def recover(self, x: np.ndarray, y: np.ndarray, zs: list[np.ndarray], tau: float = 1.0):
        """Program vector, per-row multipliers and per-block dual matrices."""
        duals = np.zeros(self.n_rows_original)
        duals[self.kept_rows] = (y / tau) / self.row_scale
        return x / tau, duals, [Z / tau for Z in zs]


def to_standard_form(program: ConicProgram) -> StandardForm:
    A = sp.csr_matrix(program.A)
    b = program.b.astype(float)
    scale = np.abs(A).max(axis=1).toarray().ravel() if A.shape[0] else np.zeros(0)
    zero_rows = scale == 0
    inconsistent = [int(i) for i in np.nonzero(zero_rows & (b != 0))[0]]
    kept = np.nonzero(~zero_rows)[0]
    scale = scale[kept]
    Ad = (A[kept].toarray() / scale[:, None]) if len(kept) else np.zeros((0, program.n_vars))
    bd = b[kept] / scale if len(kept) else np.zeros(0)
    blocks = []
    for blk in program.blocks:
        used, F = blk.dense_coefficients()
        F0 = blk.constant if blk.constant is not None else np.zeros((blk.dim, blk.dim))
        blocks.append(StdBlock(blk.name, blk.dim, used, F, F0))
    return StandardForm(
        -program.objective.astype(float), Ad, bd, scale, kept, blocks, program.n_vars, len(b), inconsistent
    )


# -- NT scaling helpers ---------------------------------------------------------


def _sym(M: np.ndarray) -> np.ndarray:
    return 0.5 * (M + M.T)


def _nt_scaling(S: np.ndarray, Z: np.ndarray):
    """``R`` with ``R^{-1} S R^{-T} = R^T Z R = diag(lam)``."""
    Ls = np.linalg.cholesky(_sym(S))
    Lz = np.linalg.cholesky(_sym(Z))
    U, lam, Vt = np.linalg.svd(Lz.T @ Ls)
    isq = 1.0 / np.sqrt(lam)
    R = (Ls @ Vt.T) * isq[None, :]
    Rinv = isq[:, None] * (U.T @ Lz.T)
    return R, Rinv, lam


def _max_step_psd(lam: np.ndarray, D: np.ndarray) -> float:
    isq = 1.0 / np.sqrt(lam)
    rho = np.linalg.eigvalsh(_sym(isq[:, None] * D * isq[None, :]))[0]
    return np.inf if rho >= 0 else -1.0 / rho


def _lam_solve(lam: np.ndarray, D: np.ndarray) -> np.ndarray:
    """Solve ``lam o U = D`` where ``o`` is the symmetrized product and lam is diagonal."""
    return 2.0 * D / (lam[:, None] + lam[None, :])


def _circ(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    return 0.5 * (A @ B + B @ A)


# -- embedded solver ------------------------------------------------------------


class _Numerical(Exception):
    pass


def _solve_embedded(program: ConicProgram, opts: SolverOptions) -> Solution:
    t0 = time.perf_counter()
    sf = to_standard_form(program)
    if sf.inconsistent_rows:
        return _trivial(program, Status.INFEASIBLE, t0, "zero row with nonzero right-hand side")
    if not sf.blocks:
        return _solve_linear(program, sf, opts, t0)
    return _HSD(program, sf, opts).run(t0)


def _trivial(program: ConicProgram, status: Status, t0: float, msg: str) -> Solution:
    n = program.n_vars
    return Solution(
        status, np.nan, np.nan, np.full(n, np.nan), np.full(program.n_rows, np.nan),
        [np.full((b.dim, b.dim), np.nan) for b in program.blocks], 0, time.perf_counter() - t0,
        message=msg,
    )


def _solve_linear(program: ConicProgram, sf: StandardForm, opts: SolverOptions, t0: float) -> Solution:
    """No cone: maximize c^T x over an affine subspace."""
    A, b = sf.A, sf.b
    if A.shape[0] == 0:
        if np.any(program.objective != 0):
            return _trivial(program, Status.UNBOUNDED, t0, "no constraints")
        x = np.zeros(program.n_vars)
        return _finish(program, Status.OPTIMAL, x, np.zeros(0), [], 0, t0, opts)
    x, *_ = np.linalg.lstsq(A, b, rcond=None)
    if np.abs(A @ x - b).max() > opts.feasibility_tol * (1 + np.abs(b).max()):
        return _trivial(program, Status.INFEASIBLE, t0, "equality rows are inconsistent")
    y, *_ = np.linalg.lstsq(A.T, -sf.c, rcond=None)
    if np.abs(A.T @ y + sf.c).max() > opts.feasibility_tol * (1 + np.abs(sf.c).max()):
        return _trivial(program, Status.UNBOUNDED, t0, "objective not constant on the feasible set")
    xo, duals, _ = sf.recover(x, y, [])
    return _finish(program, Status.OPTIMAL, xo, duals, [], 0, t0, opts)


def _finish(program, status, x, duals, zs, iters, t0, opts, backend="embedded", message=""):
    res = kkt_residuals(program, x, duals, zs)
    if status == Status.OPTIMAL and not _meets(res, opts, 1.0):
        status = Status.NEAR_OPTIMAL if _meets(res, opts, NEAR_FACTOR) else Status.NUMERICAL_FAILURE
    return Solution(
        status, res.pobj, res.dobj, x, duals, zs, iters, time.perf_counter() - t0,
        res.primal, res.dual, res.gap, res.min_eig, backend, message,
    )


def _merit(res: Residuals, opts: SolverOptions) -> float:
    """Largest residual in units of its tolerance; at most 1 means optimal."""
    ft = opts.feasibility_tol
    m = max(res.primal / ft, res.dual / ft, -res.min_eig / ft, res.gap / opts.gap_tol)
    return m if np.isfinite(m) else np.inf


def _meets(res: Residuals, opts: SolverOptions, factor: float) -> bool:
    return _merit(res, opts) <= factor


class _HSD:
    def __init__(self, program: ConicProgram, sf: StandardForm, opts: SolverOptions):
        self.program = program
        self.sf = sf
        self.opts = opts
        self.N = sf.n_vars
        self.p = len(sf.b)
        self.blocks = sf.blocks
        self.h = [blk.F0 for blk in self.blocks]
        self.degree = sum(blk.dim for blk in self.blocks)
        self.tril = [np.tril_indices(blk.dim) for blk in self.blocks]
        self.wts = [np.where(i == j, 1.0, np.sqrt(2.0)) for i, j in self.tril]

    # linear maps
    def G(self, x: np.ndarray) -> list[np.ndarray]:
        return [-np.tensordot(x[blk.used], blk.F, axes=1) for blk in self.blocks]

    def GT(self, zs: list[np.ndarray]) -> np.ndarray:
        out = np.zeros(self.N)
        for blk, Z in zip(self.blocks, zs):
            out[blk.used] -= blk.Fflat @ Z.ravel()
        return out

    @staticmethod
    def inner(us, vs) -> float:
        return float(sum(np.vdot(u, v) for u, v in zip(us, vs)))

    # Scaled KKT system with W z = R^T z R and W^{-T} s = Rinv s Rinv^T:
    #   [0 A' Gt'; A 0 0; Gt 0 -I] [ux; uy; uzt] = [bx; by; bzt],   Gt = W^{-T} G
    # Eliminating uzt leaves [[V'V, A'], [A, 0]] with V the stacked svec images of
    # the scaled coefficient matrices.  "normal" factors V'V directly; "qr" works
    # with a triangular factor of V and squares the conditioning only once.
    def _scaled_columns(self, Rinvs: list[np.ndarray]):
        for blk, Ri, (ti, tj), w in zip(self.blocks, Rinvs, self.tril, self.wts):
            k, m = len(blk.used), blk.dim
            T1 = (blk.F.reshape(k * m, m) @ Ri.T).reshape(k, m, m)
            Ft = (np.ascontiguousarray(T1.transpose(0, 2, 1)).reshape(k * m, m) @ Ri.T).reshape(k, m, m)
            yield blk, Ft[:, ti, tj] * w

    def _normal_solver(self, Rinvs):
        N, p = self.N, self.p
        A = self.sf.A
        H = np.zeros((N, N))
        for blk, V in self._scaled_columns(Rinvs):
            H[np.ix_(blk.used, blk.used)] += V @ V.T
        d = 1.0 / np.sqrt(np.maximum(np.diag(H), 1.0))
        K = np.zeros((N + p, N + p))
        K[:N, :N] = H * d[:, None] * d[None, :]
        K[:N, N:] = A.T * d[:, None]
        K[N:, :N] = A * d[None, :]
        if not np.all(np.isfinite(K)):
            raise _Numerical("non-finite KKT matrix")
        try:
            with np.errstate(all="ignore"):
                lu = la.lu_factor(K, check_finite=False)
        except (la.LinAlgError, ValueError) as exc:
            raise _Numerical(str(exc)) from exc
        if np.any(np.diag(lu[0]) == 0):
            raise _Numerical("singular KKT matrix")

        def solve(r1, r2):
            sol = la.lu_solve(lu, np.concatenate([r1 * d, r2]), check_finite=False)
            return sol[:N] * d, sol[N:]

        return solve

    def _qr_solver(self, Rinvs):
        N, p = self.N, self.p
        parts = []
        for blk, V in self._scaled_columns(Rinvs):
            Rb = np.linalg.qr(V.T, mode="r")
            P = np.zeros((Rb.shape[0], N))
            P[:, blk.used] = Rb
            parts.append(P)
        RV = np.linalg.qr(np.vstack(parts), mode="r")
        if not np.all(np.isfinite(RV)) or np.any(np.diag(RV) == 0):
            raise _Numerical("rank-deficient scaled constraint matrix")
        if p:
            Bt = la.solve_triangular(RV, self.sf.A.T, trans="T", check_finite=False)
            Q1, RB = np.linalg.qr(Bt)
        else:
            Q1, RB = np.zeros((N, 0)), np.zeros((0, 0))

        def solve(r1, r2):
            # x = RV^{-1} xh with xh = (I - Q1 Q1') dv + Q1 RB^{-T} r2, dv = RV^{-T} r1
            dv = la.solve_triangular(RV, r1, trans="T", check_finite=False)
            if p:
                q = Q1.T @ dv
                g = la.solve_triangular(RB, r2, trans="T", check_finite=False)
                xh = dv - Q1 @ q + Q1 @ g
                uy = la.solve_triangular(RB, q - g, check_finite=False)
            else:
                xh, uy = dv, np.zeros(0)
            return la.solve_triangular(RV, xh, check_finite=False), uy

        return solve

    def factor(self, Rinvs: list[np.ndarray], mode: str = "normal") -> Callable:
        A = self.sf.A
        core = self._qr_solver(Rinvs) if mode == "qr" else self._normal_solver(Rinvs)

        def Gt(x):
            return [Ri @ g @ Ri.T for Ri, g in zip(Rinvs, self.G(x))]

        def GtT(us):
            return self.GT([Ri.T @ u @ Ri for Ri, u in zip(Rinvs, us)])

        def solve_once(bx, by, bzt):
            ux, uy = core(bx + GtT(bzt), by)
            uzt = [g - z for g, z in zip(Gt(ux), bzt)]
            return ux, uy, uzt

        def residual(bx, by, bzt, ux, uy, uzt):
            rx = bx - A.T @ uy - GtT(uzt)
            ry = by - A @ ux
            rz = [z - (g - u) for z, g, u in zip(bzt, Gt(ux), uzt)]
            size = max(np.abs(rx).max(initial=0.0), np.abs(ry).max(initial=0.0),
                       max((np.abs(r).max() for r in rz), default=0.0))
            return rx, ry, rz, size

        def solve(bx, by, bzt):
            best = solve_once(bx, by, bzt)
            rx, ry, rz, size = residual(bx, by, bzt, *best)
            for _ in range(self.opts.refinement):
                dx, dy, dz = solve_once(rx, ry, rz)
                cand = (best[0] + dx, best[1] + dy, [u + v for u, v in zip(best[2], dz)])
                crx, cry, crz, csize = residual(bx, by, bzt, *cand)
                if not csize < size:
                    break
                improved = csize < 0.5 * size
                best, rx, ry, rz, size = cand, crx, cry, crz, csize
                if not improved:
                    break
            ux, uy, uzt = best
            scale = max(np.abs(bx).max(initial=0.0), np.abs(by).max(initial=0.0),
                        max((np.abs(z).max() for z in bzt), default=0.0), 1e-300)
            solve.worst = max(solve.worst, size / scale)
            if not (np.all(np.isfinite(ux)) and np.all(np.isfinite(uy))):
                raise _Numerical("non-finite KKT solution")
            return ux, uy, uzt

        solve.worst = 0.0
        return solve

    def run(self, t0: float) -> Solution:
        opts, sf = self.opts, self.sf
        c, A, b, h = sf.c, sf.A, sf.b, self.h
        N, p = self.N, self.p
        eye = [np.eye(blk.dim) for blk in self.blocks]
        resx0 = max(1.0, np.linalg.norm(c))
        resy0 = max(1.0, np.linalg.norm(b))
        resz0 = max(1.0, np.sqrt(self.inner(h, h)))

        try:
            solve0 = self.factor(eye)
            x, _, uz = solve0(np.zeros(N), b, h)
            s = [-u for u in uz]
            _, y, z = solve0(-c, np.zeros(p), [np.zeros_like(hh) for hh in h])
        except _Numerical as exc:
            return _trivial(self.program, Status.NUMERICAL_FAILURE, t0, f"initialization: {exc}")
        s = self._shift_into_cone(s)
        z = self._shift_into_cone(z)
        tau, kappa = 1.0, 1.0
        try:
            scal = [_nt_scaling(S, Z) for S, Z in zip(s, z)]
        except np.linalg.LinAlgError:
            return _trivial(self.program, Status.NUMERICAL_FAILURE, t0, "initial scaling failed")
        R = [t[0] for t in scal]
        Rinv = [t[1] for t in scal]
        lam = [t[2] for t in scal]

        status = Status.ITERATION_LIMIT
        message = ""
        mode = "normal"
        best: tuple | None = None
        best_merit = np.inf
        since_best = 0
        it = 0
        for it in range(opts.max_iterations + 1):
            s = [Ri @ (l[:, None] * Ri.T) for Ri, l in zip(R, lam)]
            z = [Rv.T @ (l[:, None] * Rv) for Rv, l in zip(Rinv, lam)]
            Gx = self.G(x)
            ATy_GTz = A.T @ y + self.GT(z)
            rx = ATy_GTz + c * tau
            ry = b * tau - A @ x
            rz = [si + g - hh * tau for si, g, hh in zip(s, Gx, h)]
            cx, by_, hz = float(c @ x), float(b @ y), self.inner(h, z)
            rt = kappa + cx + by_ + hz
            gap = float(sum(np.sum(l * l) for l in lam))
            mu = (gap + tau * kappa) / (self.degree + 1)

            xo, duals, zo = sf.recover(x, y, z, tau)
            res = kkt_residuals(self.program, xo, duals, zo)
            if opts.verbose:
                log.info(
                    "it %3d  pobj % .9e  dobj % .9e  pres %.2e  dres %.2e  gap %.2e  eig % .1e  tau %.2e  kappa %.2e  %s",
                    it, res.pobj, res.dobj, res.primal, res.dual, res.gap, res.min_eig, tau, kappa, mode,
                )
            merit = _merit(res, opts)
            if merit < best_merit:
                best, best_merit, since_best = (xo, duals, zo), merit, 0
            else:
                since_best += 1
            if merit <= 1.0:
                status = Status.OPTIMAL
                break
            if hz + by_ < 0:
                pinf = np.linalg.norm(ATy_GTz) / resx0 / (-(hz + by_))
                if pinf <= opts.feasibility_tol:
                    status = Status.INFEASIBLE
                    break
            if cx < 0:
                dinf = max(
                    np.linalg.norm(A @ x) / resy0,
                    np.sqrt(self.inner([g + si for g, si in zip(Gx, s)], [g + si for g, si in zip(Gx, s)])) / resz0,
                ) / (-cx)
                if dinf <= opts.feasibility_tol:
                    status = Status.UNBOUNDED
                    break
            if it == opts.max_iterations:
                break
            if since_best >= STALL_ITERATIONS:
                status = Status.NUMERICAL_FAILURE
                message = f"no progress in {STALL_ITERATIONS} iterations"
                break

            try:
                while True:
                    step = self._direction(mode, R, Rinv, lam, tau, kappa, mu, rx, ry, rz, rt)
                    if step[-1] > KKT_ACCURACY and mode == "normal":
                        mode = "qr"
                        continue
                    break
                dx, dy, dst_, dzt, dtau, dkappa, alpha, kkt_err = step
                if kkt_err > KKT_GIVE_UP:
                    raise _Numerical(f"inaccurate search direction (relative residual {kkt_err:.1e})")
                if alpha < 1e-12:
                    raise _Numerical("step size collapsed")
                x = x + alpha * dx
                y = y + alpha * dy
                tau = tau + alpha * dtau
                kappa = kappa + alpha * dkappa
                newR, newRinv, newlam = [], [], []
                for Ri, Rv, l, ds_, dz_ in zip(R, Rinv, lam, dst_, dzt):
                    St = np.diag(l) + alpha * ds_
                    Zt = np.diag(l) + alpha * dz_
                    Rt, Rtinv, lt = _nt_scaling(St, Zt)
                    newR.append(Ri @ Rt)
                    newRinv.append(Rtinv @ Rv)
                    newlam.append(lt)
                R, Rinv, lam = newR, newRinv, newlam
            except (_Numerical, np.linalg.LinAlgError) as exc:
                status = Status.NUMERICAL_FAILURE
                message = str(exc)
                break

        if status in (Status.INFEASIBLE, Status.UNBOUNDED):
            z = [Rv.T @ (l[:, None] * Rv) for Rv, l in zip(Rinv, lam)]
            xo, duals, zo = sf.recover(x, y, z, 1.0)
            return Solution(status, np.nan, np.nan, xo, duals, zo, it, time.perf_counter() - t0, message=message)
        xo, duals, zo = best if best is not None else sf.recover(x, y, z, tau)
        sol = _finish(self.program, Status.OPTIMAL, xo, duals, zo, it, t0, opts, message=message)
        if status != Status.OPTIMAL and sol.status != Status.NEAR_OPTIMAL:
            sol.status = status
        return sol

    def _direction(self, mode, R, Rinv, lam, tau, kappa, mu, rx, ry, rz, rt):
        """Mehrotra predictor-corrector step; returns the step and the worst KKT residual."""
        sf, h = self.sf, self.h
        c, b = sf.c, sf.b
        solve = self.factor(Rinv, mode)
        ht = [Ri @ hh @ Ri.T for Ri, hh in zip(Rinv, h)]
        rzt = [Ri @ r @ Ri.T for Ri, r in zip(Rinv, rz)]
        x1, y1, z1t = solve(-c, b, ht)
        wz1n = self.inner(z1t, z1t)

        def direction(eta, ds_target, dk_target):
            dst = [_lam_solve(l, d) for l, d in zip(lam, ds_target)]
            bx = -eta * rx
            byy = eta * ry
            bzt = [-eta * r - d for r, d in zip(rzt, dst)]
            bt = eta * rt + dk_target / tau
            x2, y2, z2t = solve(bx, byy, bzt)
            dtau = (bt + c @ x2 + b @ y2 + self.inner(ht, z2t)) / (kappa / tau + wz1n)
            dx = x2 + dtau * x1
            dy = y2 + dtau * y1
            dzt = [_sym(u + dtau * v) for u, v in zip(z2t, z1t)]
            dst_ = [_sym(a - d) for a, d in zip(dst, dzt)]
            dkappa = (dk_target - kappa * dtau) / tau
            return dx, dy, dst_, dzt, dtau, dkappa

        def max_step(dst_, dzt, dtau, dkappa):
            a = np.inf
            for l, ds_, dz_ in zip(lam, dst_, dzt):
                a = min(a, _max_step_psd(l, ds_), _max_step_psd(l, dz_))
            if dtau < 0:
                a = min(a, -tau / dtau)
            if dkappa < 0:
                a = min(a, -kappa / dkappa)
            return a

        lam2 = [np.diag(l * l) for l in lam]
        aff = direction(1.0, [-L for L in lam2], -tau * kappa)
        a_aff = min(1.0, max_step(*aff[2:]))
        sigma = (1.0 - a_aff) ** EXPON
        corr = [_circ(ds_, dz_) for ds_, dz_ in zip(aff[2], aff[3])]
        ds_target = [-L - C + sigma * mu * np.eye(len(l)) for L, C, l in zip(lam2, corr, lam)]
        dk_target = -tau * kappa - aff[4] * aff[5] + sigma * mu
        dx, dy, dst_, dzt, dtau, dkappa = direction(1.0 - sigma, ds_target, dk_target)
        alpha = min(1.0, STEP * max_step(dst_, dzt, dtau, dkappa))
        return dx, dy, dst_, dzt, dtau, dkappa, alpha, solve.worst

    @staticmethod
    def _shift_into_cone(ms: list[np.ndarray]) -> list[np.ndarray]:
        mins = [np.linalg.eigvalsh(_sym(M))[0] for M in ms]
        nrm = np.sqrt(sum(np.sum(M * M) for M in ms))
        t = -min(mins)
        if t >= -1e-8 * max(nrm, 1.0):
            return [_sym(M) + (1.0 + t) * np.eye(len(M)) for M in ms]
        return [_sym(M) for M in ms]


# -- backends ---------------------------------------------------------------

Backend = Callable[[ConicProgram, SolverOptions], Solution]
BACKENDS: dict[str, Backend] = {"embedded": _solve_embedded}


def register_backend(name: str, fn: Backend) -> None:
    BACKENDS[name] = fn


def solve(program: ConicProgram, options: SolverOptions | None = None, backend: str = "embedded") -> Solution:
    """Maximize the program's objective; see :class:`Solution` for the result."""
    opts = options or SolverOptions()
    if not program.blocks and program.n_rows == 0:
        raise SolverError("program has neither PSD blocks nor equality rows")
    if backend == "cvxopt" and backend not in BACKENDS:
        from . import backends  # noqa: F401  registers itself
    try:
        fn = BACKENDS[backend]
    except KeyError:
        raise SolverError(f"unknown solver backend {backend!r}") from None
    return fn(program, opts)
