"""Truncated moment sequences, moment/localizing matrices and PSD tests."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np

from .polyalg import (
    Exponent,
    Polynomial,
    enumerate_monomials,
    monomial_index,
    num_monomials,
)

DEFAULT_PSD_TOL = 1e-8


class MomentError(ValueError):
    pass


@dataclass(frozen=True)
class MomentVector:
    """Moments ``y_alpha`` for ``|alpha| <= degree`` in graded order.

    ``nvars`` is ``1+n`` for measures on time-space and ``n`` for measures on
    the state space alone.
    """

    nvars: int
    degree: int
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        expected = num_monomials(self.nvars, self.degree)
        if vals.shape != (expected,):
            raise MomentError(
                f"moment vector for {self.nvars} vars, degree {self.degree} "
                f"needs {expected} entries, got {vals.shape}"
            )
        object.__setattr__(self, "values", vals)

    @property
    def mass(self) -> float:
        return float(self.values[0])

    def __getitem__(self, exp: Exponent) -> float:
        return float(self.values[monomial_index(self.nvars, self.degree)[tuple(exp)]])

    def truncate(self, degree: int) -> MomentVector:
        if degree > self.degree:
            raise MomentError(f"cannot truncate degree {self.degree} to {degree}")
        return MomentVector(self.nvars, degree, self.values[: num_monomials(self.nvars, degree)])


def _exponent_for(y_nvars: int, p: Polynomial, exp: Exponent) -> Exponent:
    """Map a polynomial exponent (t first) onto the moment vector's variables."""
    if y_nvars == p.nvars:
        return exp
    if y_nvars == p.n:
        if exp[0]:
            raise MomentError("polynomial depends on t but the measure lives on the state space")
        return exp[1:]
    raise MomentError(f"polynomial over {p.nvars} variables does not match moments over {y_nvars}")


def riesz(y: MomentVector, p: Polynomial) -> float:
    """``L_y(p) = sum_alpha p_alpha y_alpha``."""
    if p.degree > y.degree and not p.is_zero():
        raise MomentError(f"polynomial degree {p.degree} exceeds moment truncation {y.degree}")
    idx = monomial_index(y.nvars, y.degree)
    return float(sum(c * y.values[idx[_exponent_for(y.nvars, p, e)]] for e, c in p.items()))


def _state_terms(g: Polynomial | None, nvars: int) -> list[tuple[Exponent, float]]:
    if g is None:
        return [((0,) * nvars, 1.0)]
    return [(_exponent_for(nvars, g, e), c) for e, c in g.items()]


@lru_cache(maxsize=4096)
def _localizing_pattern_cached(terms: tuple, nvars: int, order: int, moment_degree: int):
    basis = enumerate_monomials(nvars, order)
    idx = monomial_index(nvars, moment_degree)
    acc: dict[tuple[int, int, int], float] = {}
    for i, a in enumerate(basis):
        for j in range(i + 1):
            b = basis[j]
            ab = tuple(u + v for u, v in zip(a, b))
            for gamma, c in terms:
                k = idx[tuple(u + v for u, v in zip(ab, gamma))]
                acc[(i, j, k)] = acc.get((i, j, k), 0.0) + c
    keys = [k for k, v in acc.items() if v != 0.0]
    rows = np.array([k[0] for k in keys], dtype=np.int64)
    cols = np.array([k[1] for k in keys], dtype=np.int64)
    var = np.array([k[2] for k in keys], dtype=np.int64)
    coef = np.array([acc[k] for k in keys], dtype=float)
    return rows, cols, var, coef


def localizing_pattern(g: Polynomial | None, nvars: int, order: int, moment_degree: int):
    """Sparse description of ``M_order(g, y)`` as a linear function of ``y``.

    Returns ``(rows, cols, var, coef)`` for the lower triangle: entry
    ``(rows[k], cols[k])`` receives ``coef[k] * y[var[k]]``.  ``g=None`` means
    the plain moment matrix.
    """
    terms = tuple(sorted(_state_terms(g, nvars)))
    gdeg = max((sum(e) for e, _ in terms), default=0)
    if 2 * order + gdeg > moment_degree:
        raise MomentError(
            f"order {order} localizer of a degree-{gdeg} polynomial needs moments up to "
            f"{2 * order + gdeg}, have {moment_degree}"
        )
    return _localizing_pattern_cached(terms, nvars, order, moment_degree)


def _fill(y: MomentVector, pattern, dim: int) -> np.ndarray:
    rows, cols, var, coef = pattern
    M = np.zeros((dim, dim))
    np.add.at(M, (rows, cols), coef * y.values[var])
    off = rows != cols
    M[cols[off], rows[off]] = M[rows[off], cols[off]]
    return M


def moment_matrix(y: MomentVector, r: int) -> np.ndarray:
    """``M_r(y)`` with entries ``y_{alpha+beta}`` indexed by the degree-``r`` basis."""
    if 2 * r > y.degree:
        raise MomentError(f"moment matrix of order {r} needs truncation {2 * r}, have {y.degree}")
    pattern = localizing_pattern(None, y.nvars, r, y.degree)
    return _fill(y, pattern, num_monomials(y.nvars, r))


def localizing_matrix(g: Polynomial, y: MomentVector, s: int) -> np.ndarray:
    """``M_s(g, y)`` with entries ``sum_gamma g_gamma y_{gamma+alpha+beta}``."""
    pattern = localizing_pattern(g, y.nvars, s, y.degree)
    return _fill(y, pattern, num_monomials(y.nvars, s))


def dirac_moments(point: Sequence[float], d: int, nvars: int | None = None) -> MomentVector:
    """Moments of the point mass at ``point``."""
    point = np.asarray(point, dtype=float)
    if nvars is not None and len(point) != nvars:
        raise MomentError(f"point has {len(point)} coordinates, expected {nvars}")
    basis = np.array(enumerate_monomials(len(point), d), dtype=float)
    return MomentVector(len(point), d, np.prod(point[None, :] ** basis, axis=1))


def box_uniform_moments(lower: Sequence[float], upper: Sequence[float], d: int) -> MomentVector:
    """Moments of the uniform probability measure on an axis-aligned box."""
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    if lower.shape != upper.shape or np.any(upper <= lower):
        raise MomentError("degenerate box: need lower < upper in every coordinate")
    k = np.arange(d + 1)
    # 1-D moments of U[l, u]: (u^{k+1} - l^{k+1}) / ((k+1)(u-l))
    one_d = (upper[:, None] ** (k + 1) - lower[:, None] ** (k + 1)) / (
        (k + 1) * (upper - lower)[:, None]
    )
    basis = enumerate_monomials(len(lower), d)
    vals = np.array([math.prod(one_d[i, e] for i, e in enumerate(exp)) for exp in basis])
    return MomentVector(len(lower), d, vals)


@dataclass(frozen=True)
class PutinarReport:
    feasible: bool
    min_eigenvalue: float
    eigenvalues: dict[str, float]


def _localizer_order(r: int, g: Polynomial) -> int:
    return r - math.ceil(g.degree / 2)


def putinar_feasible(
    y: MomentVector, set_polys: Sequence[Polynomial], r: int, tol: float = DEFAULT_PSD_TOL
) -> PutinarReport:
    """Check ``M_r(y) >= 0`` and ``M_{r - ceil(deg g/2)}(g, y) >= 0`` for each ``g``."""
    eigs = {"moment": float(np.linalg.eigvalsh(moment_matrix(y, r))[0])}
    for j, g in enumerate(set_polys):
        s = _localizer_order(r, g)
        if s < 0:
            continue
        eigs[f"localizer[{j}]"] = float(np.linalg.eigvalsh(localizing_matrix(g, y, s))[0])
    worst = min(eigs.values())
    return PutinarReport(worst >= -tol, worst, eigs)
