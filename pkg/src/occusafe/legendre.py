"""Tensor Legendre arithmetic for a well-conditioned form of the moment relaxation.

Coordinates: time ``t`` on ``[0, T]`` and states on ``[-1, 1]``.  A series is
a sum of rank-one terms ``c * P_{k_0}(t) P_{k_1}(x_1) ...`` stored as
``(c, [vec_0, vec_1, ...])`` with one univariate Legendre coefficient vector
per variable; products and derivatives stay rank-one, so nothing is ever
expanded in the monomial basis (where high-degree coefficients cancel badly).
"""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np
from numpy.polynomial import legendre as L
from numpy.polynomial import polynomial as P

from .polyalg import Polynomial, enumerate_monomials, monomial_index

Series = list[tuple[float, list[np.ndarray]]]


def domains(nvars: int, with_time: bool, T: float = 1.0) -> tuple[tuple[float, float], ...]:
    return tuple((0.0, T) if (with_time and i == 0) else (-1.0, 1.0) for i in range(nvars))


@lru_cache(maxsize=None)
def power_series(k: int, lo: float, hi: float) -> np.ndarray:
    """Legendre coefficients (on ``[lo, hi]``) of ``z^k``."""
    # z = m + h u with u in [-1, 1]
    m, h = 0.5 * (lo + hi), 0.5 * (hi - lo)
    coef = P.polypow([m, h], k) if k else np.array([1.0])
    return L.poly2leg(coef)


def unit(k: int) -> np.ndarray:
    e = np.zeros(k + 1)
    e[k] = 1.0
    return e


def _pad(v: np.ndarray, n: int) -> np.ndarray:
    v = np.trim_zeros(np.asarray(v, dtype=float), "b")
    if len(v) > n:
        if np.any(np.abs(v[n:]) > 1e-12 * max(1.0, np.abs(v).max())):
            raise ValueError(f"series of degree {len(v) - 1} exceeds {n - 1}")
        v = v[:n]
    out = np.zeros(n)
    out[: len(v)] = v
    return out


def from_polynomial(p: Polynomial, doms, state_only: bool = False) -> Series:
    """Rank-one terms of a monomial-basis polynomial."""
    out: Series = []
    for e, c in p.items():
        if state_only:
            if e[0]:
                raise ValueError("polynomial depends on t")
            e = e[1:]
        out.append((c, [power_series(k, *doms[i]) for i, k in enumerate(e)]))
    return out


def multiply(a: Series, b: Series) -> Series:
    return [(ca * cb, [L.legmul(u, v) for u, v in zip(ua, ub)]) for ca, ua in a for cb, ub in b]


def basis_element(exp, nvars: int) -> Series:
    return [(1.0, [unit(k) for k in exp])]


def derivative(a: Series, var: int, doms) -> Series:
    lo, hi = doms[var]
    out: Series = []
    for c, vecs in a:
        d = L.legder(vecs[var]) * (2.0 / (hi - lo)) if len(vecs[var]) > 1 else np.zeros(1)
        out.append((c, vecs[:var] + [d] + vecs[var + 1 :]))
    return out


def to_graded(a: Series, nvars: int, degree: int) -> np.ndarray:
    """Dense coefficient vector indexed like ``enumerate_monomials(nvars, degree)``."""
    idx = _graded_index(nvars, degree)
    out = np.zeros(len(idx[0]))
    n = degree + 1
    for c, vecs in a:
        if c == 0.0:
            continue
        vs = [_pad(v, n) for v in vecs]
        dense = vs[0]
        for v in vs[1:]:
            dense = np.multiply.outer(dense, v)
        dense = np.asarray(dense) * c
        total = float(np.abs(dense).sum())
        kept = float(np.abs(dense[idx]).sum())
        if total - kept > 1e-12 * max(1.0, total):
            raise ValueError(f"series exceeds total degree {degree}")
        out += dense[idx]
    return out


def graded_series(coefs: np.ndarray, nvars: int, degree: int) -> Series:
    """Inverse of :func:`to_graded`."""
    return [(float(c), [unit(k) for k in e]) for c, e in zip(coefs, enumerate_monomials(nvars, degree)) if c != 0.0]


@lru_cache(maxsize=None)
def _graded_index(nvars: int, degree: int):
    exps = np.array(enumerate_monomials(nvars, degree), dtype=np.int64).reshape(-1, nvars)
    return tuple(exps[:, i] for i in range(nvars))


def evaluate(a: Series, points: np.ndarray, doms) -> np.ndarray:
    """Values at rows of ``points`` (one column per variable)."""
    out = np.zeros(points.shape[0])
    for c, vecs in a:
        term = np.full(points.shape[0], c)
        for i, v in enumerate(vecs):
            lo, hi = doms[i]
            u = (2.0 * points[:, i] - lo - hi) / (hi - lo)
            term = term * L.legval(u, v)
        out += term
    return out


def graded_to_polynomial(coefs: np.ndarray, n: int, degree: int, doms, state_only: bool = False) -> Polynomial:
    """Monomial form of ``sum_k coefs[k] P_k`` (for reporting; may lose digits at high degree)."""
    nv = n if state_only else n + 1
    mons = []
    for i in range(nv):
        lo, hi = doms[i]
        m, h = 0.5 * (lo + hi), 0.5 * (hi - lo)
        # P_k((z - m) / h) in powers of z
        rows = []
        for k in range(degree + 1):
            pu = L.leg2poly(unit(k))
            pz = np.zeros(1)
            for j, cj in enumerate(pu):
                pz = P.polyadd(pz, cj * P.polypow([-m / h, 1.0 / h], j))
            rows.append(pz)
        mons.append(rows)
    terms: dict = {}
    for c, exp in zip(coefs, enumerate_monomials(nv, degree)):
        if c == 0.0:
            continue
        acc = {(): c}
        for i, k in enumerate(exp):
            acc = {e + (j,): v * cj for e, v in acc.items() for j, cj in enumerate(mons[i][k]) if cj != 0.0}
        for e, v in acc.items():
            key = ((0,) + e) if state_only else e
            terms[key] = terms.get(key, 0.0) + v
    return Polynomial(n, terms)


def orthonormal_scale(exp) -> float:
    """Factor making ``P_k`` unit-norm under the uniform probability measure."""
    return math.prod(math.sqrt(2 * k + 1) for k in exp)


def localizing_block(g_series: Series | None, nvars: int, order: int, degree: int):
    """Lower-triangle triplets of ``L(g Phat_a Phat_b)`` as a linear map of Legendre moments.

    Returns ``(rows, cols, var, coef)`` with ``var`` a graded index into the
    degree-``degree`` Legendre moment vector.
    """
    basis = enumerate_monomials(nvars, order)
    dim = len(basis)
    ai, bi = np.tril_indices(dim)
    ea = np.array(basis, dtype=np.int64).reshape(-1, nvars)
    n = degree + 1
    g_terms = g_series if g_series is not None else [(1.0, [np.array([1.0])] * nvars)]
    idx = _graded_index(nvars, degree)
    dense = np.zeros((len(ai),) + (n,) * nvars)
    for c, gvecs in g_terms:
        factors = []
        for i in range(nvars):
            table = np.zeros((order + 1, order + 1, n))
            for p in range(order + 1):
                for q in range(p + 1):
                    v = _pad(L.legmul(L.legmul(unit(p), unit(q)), gvecs[i]), n)
                    table[p, q] = table[q, p] = v
            factors.append(table[ea[ai, i], ea[bi, i]])  # (pairs, n)
        term = factors[0]
        for f in factors[1:]:
            term = term[..., None] * f.reshape((f.shape[0],) + (1,) * (term.ndim - 1) + (n,))
        dense += c * term
    flat = dense[(slice(None),) + idx]  # (pairs, n_moments)
    scale = np.array([orthonormal_scale(e) for e in basis])
    flat *= (scale[ai] * scale[bi])[:, None]
    tol = 1e-14 * max(1.0, float(np.abs(flat).max(initial=0.0)))
    p_idx, m_idx = np.nonzero(np.abs(flat) > tol)
    return ai[p_idx], bi[p_idx], m_idx, flat[p_idx, m_idx], dim


def basis_to_monomial(nvars: int, order: int, doms) -> np.ndarray:
    """Rows: orthonormal tensor Legendre polynomials in graded monomial coefficients."""
    basis = enumerate_monomials(nvars, order)
    idx = monomial_index(nvars, order)
    uni = []
    for i in range(nvars):
        lo, hi = doms[i]
        m, h = 0.5 * (lo + hi), 0.5 * (hi - lo)
        rows = []
        for k in range(order + 1):
            pu = L.leg2poly(unit(k))
            pz = np.zeros(1)
            for j, cj in enumerate(pu):
                pz = P.polyadd(pz, cj * P.polypow([-m / h, 1.0 / h], j))
            rows.append(pz)
        uni.append(rows)
    B = np.zeros((len(basis), len(basis)))
    for row, exp in enumerate(basis):
        acc = {(): orthonormal_scale(exp)}
        for i, k in enumerate(exp):
            acc = {e + (j,): v * cj for e, v in acc.items() for j, cj in enumerate(uni[i][k]) if cj != 0.0}
        for e, v in acc.items():
            B[row, idx[e]] += v
    return B


def moments_to_monomial(ell: np.ndarray, nvars: int, degree: int, doms) -> np.ndarray:
    """Monomial moments ``y = C ell`` where ``z^e = sum_k C[e, k] P_k``."""
    C = monomial_in_legendre(nvars, degree, doms)
    return C @ ell


def monomial_in_legendre(nvars: int, degree: int, doms) -> np.ndarray:
    exps = enumerate_monomials(nvars, degree)
    C = np.zeros((len(exps), len(exps)))
    for row, e in enumerate(exps):
        C[row] = to_graded([(1.0, [power_series(k, *doms[i]) for i, k in enumerate(e)])], nvars, degree)
    return C
