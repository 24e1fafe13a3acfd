"""Order-r moment relaxation of the occupation-measure LP and its dual certificates.

Decision vector layout (``nt = C(1+n+2r, 2r)``, ``ns = C(n+2r, 2r)``)::

    [ unsafe part of the occupation measure   (t, x) moments, nt entries
    | safe part                               (t, x) moments, nt entries
    | occupation measure                      (t, x) moments, nt entries
    | final measure                           x moments,      ns entries ]

The program maximizes the weighted mass of the unsafe part subject to the
Liouville rows (one per test monomial), the domination rows
``unsafe + safe = occupation`` and PSD moment/localizing blocks.  Its conic
dual is read as polynomials ``v`` (Liouville multipliers) and ``w``
(domination multipliers) together with SOS Gram matrices.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from . import legendre as leg
from .conic import ConicProgram, PSDBlock
from .moments import MomentVector, localizing_pattern
from .polyalg import (
    Polynomial,
    enumerate_monomials,
    lie_derivative,
    monomial_index,
    num_monomials,
)
from .problem import (
    Dirac,
    SafetyProblem,
    ScalingRecord,
    UniformBox,
    in_set,
    initial_moments,
)
from .solver import Solution, SolverOptions, Status, solve

MEASURES = ("unsafe", "safe", "occupation", "final")


class RelaxationError(ValueError):
    pass


@dataclass(frozen=True)
class Layout:
    n: int
    r: int

    @property
    def nt(self) -> int:
        return num_monomials(self.n + 1, 2 * self.r)

    @property
    def ns(self) -> int:
        return num_monomials(self.n, 2 * self.r)

    @property
    def n_vars(self) -> int:
        return 3 * self.nt + self.ns

    def offset(self, measure: str) -> int:
        return {"unsafe": 0, "safe": self.nt, "occupation": 2 * self.nt, "final": 3 * self.nt}[measure]

    def nvars_of(self, measure: str) -> int:
        return self.n if measure == "final" else self.n + 1

    def slice(self, measure: str) -> slice:
        o = self.offset(measure)
        return slice(o, o + (self.ns if measure == "final" else self.nt))


@dataclass
class Rows:
    """Sparse equality rows ``A z = b``."""

    indices: list[np.ndarray]
    coefs: list[np.ndarray]
    rhs: list[float]
    names: list[str]

    def matrix(self, n_vars: int) -> sp.csr_matrix:
        ri = np.concatenate([np.full(len(ix), k) for k, ix in enumerate(self.indices)] or [np.zeros(0)])
        ci = np.concatenate(self.indices or [np.zeros(0)])
        data = np.concatenate(self.coefs or [np.zeros(0)])
        return sp.csr_matrix((data, (ri.astype(int), ci.astype(int))), shape=(len(self.rhs), n_vars))

    def __len__(self) -> int:
        return len(self.rhs)


def max_test_degree(p: SafetyProblem, r: int) -> int:
    """Largest total degree of test monomials whose Lie derivative stays within degree 2r."""
    return 2 * r - max(0, p.dynamics_degree - 1)


def liouville_exponents(p: SafetyProblem, r: int) -> list[tuple[int, ...]]:
    """Test monomials ``t^a x^alpha`` with ``a + |alpha| <= max_test_degree``.

    ``v = t`` is always included: ``L t = 1`` whatever the dynamics, and its row
    fixes the occupation mass even when the degree cap is 0.
    """
    exps = list(enumerate_monomials(p.n + 1, max_test_degree(p, r)))
    mass = (1,) + (0,) * p.n
    if mass not in exps:
        exps.append(mass)
    return exps


def _fmt_exp(e) -> str:
    return ",".join(str(k) for k in e)


def liouville_rows(p: SafetyProblem, r: int) -> Rows:
    """One row per test monomial ``t^a x^alpha``:
    ``T^a (y_T)_alpha - L_y(L t^a x^alpha) = (y_0)_alpha [a == 0]``."""
    d = max_test_degree(p, r)
    if d < 0:
        raise RelaxationError(
            f"order r={r} is too low for dynamics of degree {p.dynamics_degree} (test degree {d})"
        )
    lay = Layout(p.n, r)
    idx_t = monomial_index(p.n + 1, 2 * r)
    idx_s = monomial_index(p.n, 2 * r)
    y0 = initial_moments(p, d)
    occ, fin = lay.offset("occupation"), lay.offset("final")
    rows = Rows([], [], [], [])
    for e in liouville_exponents(p, r):
        a, alpha = e[0], e[1:]
        acc: dict[int, float] = {fin + idx_s[alpha]: float(p.T) ** a}
        Lv = lie_derivative(Polynomial(p.n, {e: 1.0}), p.dynamics)
        for g, c in Lv.items():
            k = occ + idx_t[g]
            acc[k] = acc.get(k, 0.0) - c
        keys = [k for k, v in acc.items() if v != 0.0]
        rows.indices.append(np.array(keys, dtype=np.int64))
        rows.coefs.append(np.array([acc[k] for k in keys]))
        rows.rhs.append(y0[alpha] if a == 0 else 0.0)
        rows.names.append(f"liouville[{_fmt_exp(e)}]")
    return rows


def domination_rows(n: int, r: int) -> Rows:
    """``unsafe_beta + safe_beta - occupation_beta = 0`` for every ``|beta| <= 2r``."""
    lay = Layout(n, r)
    rows = Rows([], [], [], [])
    for k, beta in enumerate(enumerate_monomials(n + 1, 2 * r)):
        rows.indices.append(np.array([k, lay.nt + k, 2 * lay.nt + k], dtype=np.int64))
        rows.coefs.append(np.array([1.0, 1.0, -1.0]))
        rows.rhs.append(0.0)
        rows.names.append(f"domination[{_fmt_exp(beta)}]")
    return rows


def time_localizer(n: int, T: float = 1.0) -> Polynomial:
    t = Polynomial.variable(n, 0)
    return t * (Polynomial.constant(n, T) - t)


def box_polynomials(n: int) -> list[Polynomial]:
    return [Polynomial.constant(n, 1.0) - Polynomial.variable(n, i + 1) ** 2 for i in range(n)]


def unsafe_support(p: SafetyProblem) -> list[Polynomial]:
    """Constraints localizing the unsafe part: ``X_u`` plus the unit box (redundant but Archimedean)."""
    out = list(p.X_u)
    for b in box_polynomials(p.n):
        if b not in out:
            out.append(b)
    return out


def _localizer_order(r: int, g: Polynomial) -> int:
    return r - math.ceil(g.degree / 2)


def block_roster(p: SafetyProblem, r: int) -> list[tuple[str, str, Polynomial | None, int]]:
    """``(name, measure, multiplier, order)`` for every PSD block; ``None`` means the plain moment matrix."""
    roster = []
    tloc = time_localizer(p.n, p.T)
    sets = {"unsafe": unsafe_support(p), "safe": list(p.X), "occupation": list(p.X), "final": list(p.X)}
    for m in MEASURES:
        roster.append((f"{m}:moment", m, None, r))
        if m != "final":
            roster.append((f"{m}:time", m, tloc, r - 1))
        for j, g in enumerate(sets[m]):
            if g.degree > 2 * r:
                raise RelaxationError(f"constraint of degree {g.degree} needs r >= {math.ceil(g.degree / 2)}")
            roster.append((f"{m}:set[{j}]", m, g, _localizer_order(r, g)))
    return roster


def assemble_primal(p: SafetyProblem, r: int) -> ConicProgram:
    """The order-r moment SDP of a normalized problem, over monomial moments."""
    if r < 1:
        raise RelaxationError("relaxation order must be >= 1")
    if p.objective.degree > 2 * r:
        raise RelaxationError(f"objective of degree {p.objective.degree} needs 2r >= its degree")
    lay = Layout(p.n, r)
    live = liouville_rows(p, r)
    dom = domination_rows(p.n, r)
    A = sp.vstack([live.matrix(lay.n_vars), dom.matrix(lay.n_vars)]).tocsr()
    b = np.array(live.rhs + dom.rhs)

    c = np.zeros(lay.n_vars)
    idx_t = monomial_index(p.n + 1, 2 * r)
    for e, coef in p.objective.items():
        c[idx_t[e]] += coef

    blocks = []
    for name, m, g, s in block_roster(p, r):
        nv = lay.nvars_of(m)
        rows, cols, var, coef = localizing_pattern(g, nv, s, 2 * r)
        blocks.append(
            PSDBlock(
                name, num_monomials(nv, s), rows, cols, var + lay.offset(m), coef,
                meta={"measure": m, "multiplier": g, "order": s, "nvars": nv},
            )
        )
    return ConicProgram(
        lay.n_vars, c, A, b, blocks, live.names + dom.names,
        meta={"r": r, "n": p.n, "n_liouville": len(live), "n_domination": len(dom)},
    )


def _initial_legendre_moments(p: SafetyProblem, d: int) -> np.ndarray:
    """``L_mu0(P_alpha)`` for ``|alpha| <= d`` (graded), Legendre on ``[-1, 1]``."""
    exps = enumerate_monomials(p.n, d)
    init = p.initial
    if isinstance(init, Dirac):
        x0 = np.asarray(init.point, dtype=float)
        return np.array([math.prod(leg.L.legval(x0[i], leg.unit(k)) for i, k in enumerate(e)) for e in exps])
    if isinstance(init, UniformBox):
        lo, hi = np.asarray(init.lower), np.asarray(init.upper)
        means = []
        for i in range(p.n):
            row = []
            for k in range(d + 1):
                Q = leg.L.legint(leg.unit(k))
                row.append((leg.L.legval(hi[i], Q) - leg.L.legval(lo[i], Q)) / (hi[i] - lo[i]))
            means.append(row)
        return np.array([math.prod(means[i][k] for i, k in enumerate(e)) for e in exps])
    y0 = initial_moments(p, d).values
    B = leg.basis_to_monomial(p.n, d, leg.domains(p.n, False))
    scale = np.array([leg.orthonormal_scale(e) for e in exps])
    return (B @ y0) / scale


DEFAULT_MARGIN = 1e-8


def assemble_legendre(p: SafetyProblem, r: int, margin: float = 0.0) -> ConicProgram:
    """The order-r relaxation in Legendre coordinates.

    Variables are Legendre moments ``L(P_k)`` of each measure, Liouville rows use
    Legendre test functions (same span as the test monomials), and every PSD
    block is the localizing matrix in the orthonormal Legendre basis.  The
    feasible set is the image of the monomial program's under an invertible
    linear map, so both have the same optimal value; this one is far better
    conditioned at high order.

    ``margin > 0`` relaxes every block to ``F(y) + margin * I >= 0``.  In the
    orthonormal basis ``I`` is the localizing matrix of ``margin`` times the
    uniform probability measure, so the optimum is still an upper bound, the
    interior is never empty, and the relaxed programs stay nested across ``r``.
    """
    if margin < 0:
        raise RelaxationError("margin must be >= 0")
    if r < 1:
        raise RelaxationError("relaxation order must be >= 1")
    if p.objective.degree > 2 * r:
        raise RelaxationError(f"objective of degree {p.objective.degree} needs 2r >= its degree")
    d = max_test_degree(p, r)
    if d < 0:
        raise RelaxationError(
            f"order r={r} is too low for dynamics of degree {p.dynamics_degree} (test degree {d})"
        )
    n = p.n
    lay = Layout(n, r)
    dt, ds = leg.domains(n + 1, True, p.T), leg.domains(n, False)
    idx_s = monomial_index(n, 2 * r)
    ell0 = _initial_legendre_moments(p, 2 * r)
    f_series = [leg.from_polynomial(f, dt) for f in p.dynamics]
    occ, fin = lay.offset("occupation"), lay.offset("final")

    live = Rows([], [], [], [])
    for e in liouville_exponents(p, r):
        a, alpha = e[0], e[1:]
        v = leg.basis_element(e, n + 1)
        Lv = leg.derivative(v, 0, dt)
        for i in range(n):
            Lv += leg.multiply(leg.derivative(v, i + 1, dt), f_series[i])
        coefs = -leg.to_graded(Lv, n + 1, 2 * r)
        nz = np.nonzero(coefs)[0]
        live.indices.append(np.concatenate(([fin + idx_s[alpha]], occ + nz)).astype(np.int64))
        live.coefs.append(np.concatenate(([1.0], coefs[nz])))
        live.rhs.append((-1.0) ** a * ell0[idx_s[alpha]])
        live.names.append(f"liouville[{_fmt_exp(e)}]")
    dom = domination_rows(n, r)
    A = sp.vstack([live.matrix(lay.n_vars), dom.matrix(lay.n_vars)]).tocsr()
    b = np.array(live.rhs + dom.rhs)

    c = np.zeros(lay.n_vars)
    c[lay.slice("unsafe")] = leg.to_graded(leg.from_polynomial(p.objective, dt), n + 1, 2 * r)

    blocks = []
    for name, m, g, s in block_roster(p, r):
        nv = lay.nvars_of(m)
        doms = ds if m == "final" else dt
        gser = None if g is None else leg.from_polynomial(g, doms, state_only=(m == "final"))
        rows, cols, var, coef, dim = leg.localizing_block(gser, nv, s, 2 * r)
        blocks.append(
            PSDBlock(
                name, dim, rows, cols, var + lay.offset(m), coef,
                constant=margin * np.eye(dim) if margin else None,
                meta={"measure": m, "multiplier": g, "order": s, "nvars": nv, "domains": doms},
            )
        )
    return ConicProgram(
        lay.n_vars, c, A, b, blocks, live.names + dom.names,
        meta={"r": r, "n": n, "n_liouville": len(live), "n_domination": len(dom), "coordinates": "legendre", "margin": margin},
    )


def monomial_moments(program: ConicProgram, z: np.ndarray, p: SafetyProblem, r: int) -> np.ndarray:
    """Decision vector in monomial moments, whatever coordinates ``program`` uses."""
    if program.meta.get("coordinates") != "legendre":
        return np.asarray(z, dtype=float)
    lay = Layout(p.n, r)
    out = np.array(z, dtype=float)
    for m in MEASURES:
        nv = lay.nvars_of(m)
        doms = leg.domains(nv, m != "final", p.T)
        out[lay.slice(m)] = leg.monomial_in_legendre(nv, 2 * r, doms) @ z[lay.slice(m)]
    return out


# -- certificates ------------------------------------------------------------


@dataclass
class GramTerm:
    """One quadratic-module term ``multiplier * b^T Z b``.

    ``basis`` names the vector ``b``: graded monomials, or orthonormal tensor
    Legendre polynomials on ``domains``.
    """

    label: str
    measure: str
    multiplier: Polynomial | None
    order: int
    nvars: int
    matrix: np.ndarray
    basis: str = "monomial"
    domains: tuple | None = None

    def monomial_matrix(self) -> np.ndarray:
        if self.basis == "monomial":
            return self.matrix
        B = leg.basis_to_monomial(self.nvars, self.order, self.domains)
        return B.T @ self.matrix @ B

    def sos(self, n: int) -> Polynomial:
        """``b^T Z b`` as a polynomial in (t, x), monomial coefficients."""
        basis = enumerate_monomials(self.nvars, self.order)
        pad = (0,) if self.nvars == n else ()
        terms: dict = {}
        Z = self.monomial_matrix()
        for i, a in enumerate(basis):
            for j, bexp in enumerate(basis):
                e = pad + tuple(u + v for u, v in zip(a, bexp))
                terms[e] = terms.get(e, 0.0) + Z[i, j]
        return Polynomial(n, terms)

    def term(self, n: int) -> Polynomial:
        s = self.sos(n)
        return s if self.multiplier is None else self.multiplier * s

    def legendre_coefficients(self, degree: int) -> np.ndarray:
        """Legendre coefficients (graded, up to ``degree``) of the whole term."""
        if self.basis != "legendre":
            raise RelaxationError("term is not written in the Legendre basis")
        g = self.multiplier
        gser = None if g is None else leg.from_polynomial(g, self.domains, state_only=(self.nvars == g.n))
        rows, cols, var, coef, _ = leg.localizing_block(gser, self.nvars, self.order, degree)
        out = np.zeros(num_monomials(self.nvars, degree))
        np.add.at(out, var, np.where(rows == cols, 1.0, 2.0) * coef * self.matrix[rows, cols])
        return out


@dataclass
class Certificate:
    """Dual certificate: ``v``, ``w`` and the Gram matrices of the SOS decompositions.

    ``v`` and ``w`` are always available in monomial form.  Certificates read
    off the Legendre-coordinate program also keep their exact Legendre
    coefficients (graded order; ``v`` up to ``v_degree``, ``w`` up to ``2r``),
    which is what verification uses.
    """

    r: int
    n: int
    v: Polynomial
    w: Polynomial
    grams: list[GramTerm]
    dual_objective: float
    v_legendre: np.ndarray | None = None
    w_legendre: np.ndarray | None = None
    v_degree: int = 0

    @property
    def basis(self) -> str:
        return "legendre" if self.v_legendre is not None else "monomial"

    def grams_for(self, measure: str) -> list[GramTerm]:
        return [g for g in self.grams if g.measure == measure]


def extract_certificate(program: ConicProgram, solution: Solution, p: SafetyProblem, r: int) -> Certificate:
    """Read ``v``, ``w`` and Gram blocks off the dual of an assembled program."""
    if solution.row_duals is None or len(solution.row_duals) != program.n_rows:
        raise RelaxationError("solution lacks row multipliers")
    if solution.block_duals is None or len(solution.block_duals) != len(program.blocks):
        raise RelaxationError("solution lacks block dual matrices")
    if not np.all(np.isfinite(solution.row_duals)):
        raise RelaxationError("row multipliers are not finite")
    nl = program.meta["n_liouville"]
    u = np.asarray(solution.row_duals, dtype=float)
    exps = liouville_exponents(p, r)
    legendre = program.meta.get("coordinates") == "legendre"
    grams = []
    for blk, Z in zip(program.blocks, solution.block_duals):
        grams.append(
            GramTerm(
                blk.name, blk.meta["measure"], blk.meta["multiplier"], blk.meta["order"], blk.meta["nvars"],
                np.asarray(Z, dtype=float), "legendre" if legendre else "monomial", blk.meta.get("domains"),
            )
        )
    if not legendre:
        v = Polynomial(p.n, dict(zip(exps, u[:nl])))
        w = Polynomial(p.n, dict(zip(enumerate_monomials(p.n + 1, 2 * r), u[nl:])))
        return Certificate(r, p.n, v, w, grams, float(program.b @ u))
    dt = leg.domains(p.n + 1, True, p.T)
    dv = max(sum(e) for e in exps)
    pos = monomial_index(p.n + 1, dv)
    vc = np.zeros(num_monomials(p.n + 1, dv))
    for e, val in zip(exps, u[:nl]):
        vc[pos[e]] = val
    wc = u[nl:].copy()
    return Certificate(
        r, p.n,
        leg.graded_to_polynomial(vc, p.n, dv, dt),
        leg.graded_to_polynomial(wc, p.n, 2 * r, dt),
        grams, float(program.b @ u), vc, wc, dv,
    )


def certificate_targets(c: Certificate, p: SafetyProblem) -> dict[str, Polynomial]:
    """The polynomial each measure's Gram terms must reproduce (monomial form)."""
    Lv = lie_derivative(c.v, p.dynamics)
    return {
        "unsafe": c.w - p.objective,
        "safe": c.w,
        "occupation": -Lv - c.w,
        "final": c.v.restrict_time(p.T),
    }


def _legendre_targets(c: Certificate, p: SafetyProblem):
    """Legendre coefficient vectors of the targets, plus pointwise evaluators."""
    n, d = p.n, 2 * c.r
    dt = leg.domains(n + 1, True, p.T)
    v = leg.graded_series(c.v_legendre, n + 1, c.v_degree)
    w = leg.graded_series(c.w_legendre, n + 1, d)
    Lv = leg.derivative(v, 0, dt)
    for i, f in enumerate(p.dynamics):
        Lv += leg.multiply(leg.derivative(v, i + 1, dt), leg.from_polynomial(f, dt))
    g = leg.from_polynomial(p.objective, dt)
    wc = leg.to_graded(w, n + 1, d)
    gc = leg.to_graded(g, n + 1, d)
    final = np.zeros(num_monomials(n, d))
    idx_s = monomial_index(n, d)
    for e, val in zip(enumerate_monomials(n + 1, c.v_degree), c.v_legendre):
        final[idx_s[e[1:]]] += val  # P_a(T) = 1 at the right end of [0, T]
    coefs = {
        "unsafe": wc - gc,
        "safe": wc,
        "occupation": -leg.to_graded(Lv, n + 1, d) - wc,
        "final": final,
    }
    neg_g = [(-cg, vecs) for cg, vecs in g]
    neg_Lv = [(-cl, vecs) for cl, vecs in Lv]
    neg_w = [(-cw, vecs) for cw, vecs in w]
    evals = {
        "unsafe": lambda pts: leg.evaluate(w + neg_g, pts, dt),
        "safe": lambda pts: leg.evaluate(w, pts, dt),
        "occupation": lambda pts: leg.evaluate(neg_Lv + neg_w, pts, dt),
        "final": lambda pts: leg.evaluate(v, np.column_stack([np.full(len(pts), p.T), pts[:, 1:]]), dt),
    }
    return coefs, evals


@dataclass
class CertificateReport:
    passed: bool
    tol: float
    violations: dict[str, float]
    dual_objective: float
    points: int

    @property
    def worst(self) -> float:
        return max(self.violations.values(), default=0.0)


def _grid(n: int, total: int, T: float) -> np.ndarray:
    k = max(2, int(round(total ** (1.0 / (n + 1)))))
    axes = [np.linspace(0.0, T, k)] + [np.linspace(-1.0, 1.0, k)] * n
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


def verify_certificate(c: Certificate, p: SafetyProblem, grid: int = 10_000, tol: float = 1e-6) -> CertificateReport:
    """Worst violation of each dual constraint, pointwise on a grid and coefficient-wise.

    Pointwise checks sample ``[0, T] x [-1, 1]^n`` (the normalized box) with about
    ``grid`` points and keep those inside the relevant set.  Identities are
    compared in the certificate's own basis.
    """
    pts = _grid(p.n, grid, p.T)
    in_x = in_set(p.X, pts)
    in_u = in_set(p.X_u, pts) & in_x
    viol: dict[str, float] = {}
    if c.basis == "legendre":
        coefs, evals = _legendre_targets(c, p)
    else:
        targets = certificate_targets(c, p)
        evals = {m: targets[m].evaluate_many for m in MEASURES}

    def worst_negative(m: str, mask: np.ndarray) -> float:
        if not mask.any():
            return 0.0
        return float(max(0.0, -evals[m](pts[mask]).min()))

    viol["w - g >= 0 on X_u"] = worst_negative("unsafe", in_u)
    viol["-Lv - w >= 0 on X"] = worst_negative("occupation", in_x)
    viol["v(T,.) >= 0 on X"] = worst_negative("final", in_x)
    viol["w >= 0 on X"] = worst_negative("safe", in_x)

    for m in MEASURES:
        if c.basis == "legendre":
            total = sum((gt.legendre_coefficients(2 * c.r) for gt in c.grams_for(m)), np.zeros_like(coefs[m]))
            viol[f"identity:{m}"] = float(np.abs(coefs[m] - total).max(initial=0.0))
        else:
            total = Polynomial.zero(p.n)
            for gt in c.grams_for(m):
                total = total + gt.term(p.n)
            resid = targets[m] - total
            viol[f"identity:{m}"] = max((abs(v) for _, v in resid.items()), default=0.0)
    eig = 0.0
    for gt in c.grams:
        if gt.matrix.size:
            eig = max(eig, -float(np.linalg.eigvalsh(0.5 * (gt.matrix + gt.matrix.T))[0]))
    viol["gram psd"] = eig
    passed = all(v <= tol for v in viol.values())
    return CertificateReport(passed, tol, viol, c.dual_objective, int(len(pts)))


def bound_in_original_units(p_r: float, s: ScalingRecord) -> float:
    """Normalized bound times the horizon ``T`` (seconds)."""
    return float(p_r) * s.T


# -- solve ------------------------------------------------------------------


@dataclass
class RelaxationSolution:
    r: int
    p_r: float
    d_r: float
    moments: dict[str, MomentVector]
    status: Status
    solution: Solution
    certificate: Certificate | None = None
    sizes: dict[str, int] = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.status in (Status.OPTIMAL, Status.NEAR_OPTIMAL)


def split_moments(z: np.ndarray, n: int, r: int) -> dict[str, MomentVector]:
    lay = Layout(n, r)
    return {m: MomentVector(lay.nvars_of(m), 2 * r, z[lay.slice(m)]) for m in MEASURES}


def solve_relaxation(
    p: SafetyProblem,
    r: int,
    options: SolverOptions | None = None,
    certificate: bool = False,
    backend: str = "embedded",
    coordinates: str = "legendre",
    margin: float = DEFAULT_MARGIN,
) -> RelaxationSolution:
    """Assemble and solve the order-r relaxation of a normalized problem.

    ``coordinates="legendre"`` (default) solves the equivalent, better
    conditioned Legendre-coordinate program; ``"monomial"`` solves the
    monomial-moment program as assembled by :func:`assemble_primal`.
    ``margin`` only applies to the Legendre program (see :func:`assemble_legendre`).
    """
    if coordinates not in ("legendre", "monomial"):
        raise RelaxationError(f"unknown coordinates {coordinates!r}")
    prog = assemble_legendre(p, r, margin) if coordinates == "legendre" else assemble_primal(p, r)
    sol = solve(prog, options, backend=backend)
    sizes = {
        "variables": prog.n_vars,
        "rows": prog.n_rows,
        "blocks": len(prog.blocks),
        "max_block": max(b.dim for b in prog.blocks),
    }
    cert = None
    if certificate and sol.ok:
        cert = extract_certificate(prog, sol, p, r)
    return RelaxationSolution(
        r, sol.primal_objective, sol.dual_objective, split_moments(monomial_moments(prog, sol.x, p, r), p.n, r),
        sol.status, sol, cert, sizes,
    )


def liouville_residuals(
    p: SafetyProblem, r: int, occupation: MomentVector, final: MomentVector
) -> np.ndarray:
    """Residual of every Liouville row at given occupation/final moments (initial from ``p``)."""
    rows = liouville_rows(p, r)
    lay = Layout(p.n, r)
    z = np.zeros(lay.n_vars)
    z[lay.slice("occupation")] = occupation.truncate(2 * r).values
    z[lay.slice("final")] = final.truncate(2 * r).values
    return rows.matrix(lay.n_vars) @ z - np.array(rows.rhs)


__all__: Sequence[str] = [
    "Certificate",
    "CertificateReport",
    "GramTerm",
    "Layout",
    "RelaxationError",
    "RelaxationSolution",
    "assemble_primal",
    "bound_in_original_units",
    "domination_rows",
    "extract_certificate",
    "liouville_residuals",
    "liouville_exponents",
    "liouville_rows",
    "solve_relaxation",
    "verify_certificate",
]
