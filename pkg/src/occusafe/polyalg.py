"""Sparse multivariate polynomials in a time variable ``t`` and states ``x1..xn``.

Exponents are tuples ``(a, alpha_1, ..., alpha_n)``: slot 0 is the power of
``t``, the remaining slots the powers of the state variables.  Coefficients are
floats.  Polynomials are immutable; every operation returns a new object.
"""

from __future__ import annotations

import itertools
import math
import re
from functools import lru_cache
from typing import Iterable, Mapping, Sequence

import numpy as np

Exponent = tuple[int, ...]

CLEANUP_TOL = 1e-14


class PolynomialError(ValueError):
    pass


class ParseError(PolynomialError):
    """Syntax error in a polynomial string; ``position`` is a 0-based offset."""

    def __init__(self, message: str, text: str, position: int):
        self.text = text
        self.position = position
        super().__init__(f"{message} at position {position}: {text!r}")


@lru_cache(maxsize=None)
def enumerate_monomials(num_vars: int, max_deg: int) -> tuple[Exponent, ...]:
    """All exponents of ``num_vars`` variables with total degree <= ``max_deg``.

    Graded order: by total degree, then lexicographically descending, so for
    two variables of degree 2 the order is ``1, z1, z2, z1^2, z1 z2, z2^2``.
    Truncating to a lower degree is a prefix of the list.
    """
    if num_vars < 1:
        raise PolynomialError("num_vars must be >= 1")
    if max_deg < 0:
        raise PolynomialError("max_deg must be >= 0")
    out: list[Exponent] = []
    for d in range(max_deg + 1):
        out.extend(_exponents_of_degree(num_vars, d))
    return tuple(out)


def _exponents_of_degree(num_vars: int, d: int) -> list[Exponent]:
    if num_vars == 1:
        return [(d,)]
    out = []
    for first in range(d, -1, -1):
        for rest in _exponents_of_degree(num_vars - 1, d - first):
            out.append((first,) + rest)
    return out


@lru_cache(maxsize=None)
def monomial_index(num_vars: int, max_deg: int) -> dict[Exponent, int]:
    """Map exponent -> position in :func:`enumerate_monomials`."""
    return {e: i for i, e in enumerate(enumerate_monomials(num_vars, max_deg))}


def num_monomials(num_vars: int, max_deg: int) -> int:
    return math.comb(num_vars + max_deg, max_deg)


def _add_exp(a: Exponent, b: Exponent) -> Exponent:
    return tuple(i + j for i, j in zip(a, b))


class Polynomial:
    """Polynomial over ``(t, x1, ..., xn)`` with ``n`` state variables."""

    __slots__ = ("_n", "_terms", "_degree")

    def __init__(self, n: int, terms: Mapping[Exponent, float] | None = None):
        if n < 0:
            raise PolynomialError("number of state variables must be >= 0")
        self._n = n
        clean: dict[Exponent, float] = {}
        for exp, coef in (terms or {}).items():
            exp = tuple(int(e) for e in exp)
            if len(exp) != n + 1:
                raise PolynomialError(f"exponent {exp} has length {len(exp)}, expected {n + 1}")
            if any(e < 0 for e in exp):
                raise PolynomialError(f"negative exponent in {exp}")
            coef = float(coef)
            if coef != 0.0:
                clean[exp] = clean.get(exp, 0.0) + coef
        self._terms = {e: c for e, c in clean.items() if c != 0.0}
        self._degree = max((sum(e) for e in self._terms), default=0)

    # -- construction -----------------------------------------------------

    @classmethod
    def zero(cls, n: int) -> Polynomial:
        return cls(n)

    @classmethod
    def constant(cls, n: int, value: float) -> Polynomial:
        return cls(n, {(0,) * (n + 1): value})

    @classmethod
    def variable(cls, n: int, index: int) -> Polynomial:
        """The coordinate polynomial; index 0 is ``t``, index i is ``x_i``."""
        if not 0 <= index <= n:
            raise PolynomialError(f"variable index {index} out of range for n={n}")
        exp = [0] * (n + 1)
        exp[index] = 1
        return cls(n, {tuple(exp): 1.0})

    @classmethod
    def from_coefficients(cls, n: int, coeffs: Sequence[float], max_deg: int) -> Polynomial:
        """Build from a dense coefficient vector in graded order."""
        basis = enumerate_monomials(n + 1, max_deg)
        if len(coeffs) != len(basis):
            raise PolynomialError(f"expected {len(basis)} coefficients, got {len(coeffs)}")
        return cls(n, dict(zip(basis, coeffs)))

    # -- inspection -------------------------------------------------------

    @property
    def n(self) -> int:
        return self._n

    @property
    def nvars(self) -> int:
        return self._n + 1

    @property
    def degree(self) -> int:
        return self._degree

    @property
    def terms(self) -> dict[Exponent, float]:
        return dict(self._terms)

    def items(self):
        return self._terms.items()

    def is_zero(self) -> bool:
        return not self._terms

    def coefficient(self, exp: Exponent) -> float:
        return self._terms.get(tuple(exp), 0.0)

    def time_degree(self) -> int:
        return max((e[0] for e in self._terms), default=0)

    def uses_variable(self, index: int) -> bool:
        return any(e[index] > 0 for e in self._terms)

    def coefficient_vector(self, max_deg: int) -> np.ndarray:
        """Dense coefficients in graded order over all ``1+n`` variables."""
        if self._degree > max_deg and self._terms:
            raise PolynomialError(f"degree {self._degree} exceeds {max_deg}")
        idx = monomial_index(self.nvars, max_deg)
        out = np.zeros(len(idx))
        for e, c in self._terms.items():
            out[idx[e]] = c
        return out

    def max_abs_coefficient(self) -> float:
        return max((abs(c) for c in self._terms.values()), default=0.0)

    # -- arithmetic -------------------------------------------------------

    def _check(self, other: Polynomial) -> None:
        if other._n != self._n:
            raise PolynomialError(f"variable-set mismatch: n={self._n} vs n={other._n}")

    def _coerce(self, other) -> Polynomial:
        if isinstance(other, Polynomial):
            self._check(other)
            return other
        if isinstance(other, (int, float, np.floating, np.integer)):
            return Polynomial.constant(self._n, float(other))
        return NotImplemented

    def __add__(self, other) -> Polynomial:
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        terms = dict(self._terms)
        for e, c in other._terms.items():
            terms[e] = terms.get(e, 0.0) + c
        return Polynomial(self._n, terms)

    __radd__ = __add__

    def __neg__(self) -> Polynomial:
        return Polynomial(self._n, {e: -c for e, c in self._terms.items()})

    def __sub__(self, other) -> Polynomial:
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self + (-other)

    def __rsub__(self, other) -> Polynomial:
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return other - self

    def __mul__(self, other) -> Polynomial:
        if isinstance(other, (int, float, np.floating, np.integer)):
            return self.scale(float(other))
        if not isinstance(other, Polynomial):
            return NotImplemented
        self._check(other)
        terms: dict[Exponent, float] = {}
        for e1, c1 in self._terms.items():
            for e2, c2 in other._terms.items():
                e = _add_exp(e1, e2)
                terms[e] = terms.get(e, 0.0) + c1 * c2
        return Polynomial(self._n, terms)

    __rmul__ = __mul__

    def scale(self, c: float) -> Polynomial:
        return Polynomial(self._n, {e: c * v for e, v in self._terms.items()})

    def __pow__(self, k: int) -> Polynomial:
        if not isinstance(k, (int, np.integer)) or k < 0:
            raise PolynomialError("polynomial powers must be nonnegative integers")
        out = Polynomial.constant(self._n, 1.0)
        base = self
        k = int(k)
        while k:
            if k & 1:
                out = out * base
            base = base * base
            k >>= 1
        return out

    def __eq__(self, other) -> bool:
        if not isinstance(other, Polynomial):
            return NotImplemented
        return self._n == other._n and self._terms == other._terms

    def __hash__(self):
        return hash((self._n, frozenset(self._terms.items())))

    def allclose(self, other: Polynomial, atol: float = 1e-12) -> bool:
        self._check(other)
        diff = self - other
        return diff.max_abs_coefficient() <= atol

    def cleanup(self, tol: float = CLEANUP_TOL) -> Polynomial:
        """Drop coefficients with ``|c| <= tol * max|c|``."""
        scale = self.max_abs_coefficient()
        return Polynomial(self._n, {e: c for e, c in self._terms.items() if abs(c) > tol * scale})

    # -- calculus / substitution -----------------------------------------

    def differentiate(self, var: int | str) -> Polynomial:
        return differentiate(self, var)

    def restrict_time(self, t: float) -> Polynomial:
        """Substitute ``t = value``; the result has no ``t`` dependence."""
        terms: dict[Exponent, float] = {}
        for e, c in self._terms.items():
            key = (0,) + e[1:]
            terms[key] = terms.get(key, 0.0) + c * t ** e[0]
        return Polynomial(self._n, terms)

    def evaluate(self, point: Sequence[float]) -> float:
        return evaluate(self, point)

    def evaluate_many(self, points: np.ndarray) -> np.ndarray:
        """Evaluate at each row of a ``(k, 1+n)`` array."""
        points = np.asarray(points, dtype=float)
        if points.ndim != 2 or points.shape[1] != self.nvars:
            raise PolynomialError(f"points must have shape (k, {self.nvars})")
        out = np.zeros(points.shape[0])
        for e, c in self._terms.items():
            term = np.full(points.shape[0], c)
            for j, p in enumerate(e):
                if p:
                    term = term * points[:, j] ** p
            out += term
        return out

    # -- printing ---------------------------------------------------------

    def to_string(self, state_vars: Sequence[str] | None = None) -> str:
        names = ["t"] + list(state_vars or [f"x{i + 1}" for i in range(self._n)])
        if len(names) != self.nvars:
            raise PolynomialError("wrong number of variable names")
        if not self._terms:
            return "0"
        order = monomial_index(self.nvars, self._degree)
        pieces = []
        for e in sorted(self._terms, key=order.__getitem__):
            c = self._terms[e]
            factors = [f"{names[j]}^{p}" if p > 1 else names[j] for j, p in enumerate(e) if p]
            mag = format(abs(c), ".17g")
            body = "*".join([mag] + factors)
            sign = "-" if c < 0 else "+"
            pieces.append((sign, body))
        first_sign, first = pieces[0]
        out = ("-" if first_sign == "-" else "") + first
        for sign, body in pieces[1:]:
            out += f" {sign} {body}"
        return out

    def __str__(self) -> str:
        return self.to_string()

    def __repr__(self) -> str:
        return f"Polynomial(n={self._n}, {self.to_string()!r})"


def _var_index(n: int, var: int | str) -> int:
    if isinstance(var, str):
        if var == "t":
            return 0
        m = re.fullmatch(r"x(\d+)", var)
        if not m:
            raise PolynomialError(f"unknown variable {var!r}")
        var = int(m.group(1))
    if not 0 <= var <= n:
        raise PolynomialError(f"variable index {var} out of range for n={n}")
    return var


def differentiate(p: Polynomial, var: int | str) -> Polynomial:
    """Partial derivative; ``var`` is 0/'t' for time or i/'xi' for a state."""
    k = _var_index(p.n, var)
    terms: dict[Exponent, float] = {}
    for e, c in p.items():
        if e[k]:
            d = list(e)
            d[k] -= 1
            terms[tuple(d)] = terms.get(tuple(d), 0.0) + c * e[k]
    return Polynomial(p.n, terms)


def lie_derivative(v: Polynomial, f: Sequence[Polynomial]) -> Polynomial:
    """``dv/dt + grad_x v . f``, the derivative of ``v`` along the flow of ``f``."""
    if len(f) != v.n:
        raise PolynomialError(f"dynamics has {len(f)} components, polynomial has n={v.n}")
    out = differentiate(v, 0)
    for i, fi in enumerate(f, start=1):
        dv = differentiate(v, i)
        if not dv.is_zero():
            out = out + dv * fi
    return out


def compose_affine(p: Polynomial, scale: Sequence[float], shift: Sequence[float]) -> Polynomial:
    """Substitute each variable ``z_j`` by ``scale[j] * z_j + shift[j]``.

    ``scale`` and ``shift`` have one entry per variable, time first.
    Coefficients that cancel to below ``CLEANUP_TOL`` times the sum of their
    contributions' magnitudes are dropped.
    """
    nv = p.nvars
    if len(scale) != nv or len(shift) != nv:
        raise PolynomialError(f"scale/shift must have length {nv}")
    if any(s == 0 for s in scale):
        raise PolynomialError("zero scale factor in affine substitution")
    # expansions[j][k] = coefficients of (s z + c)^k, low power first
    maxpow = [max((e[j] for e in p.terms), default=0) for j in range(nv)]
    expansions = []
    for j in range(nv):
        s, c = float(scale[j]), float(shift[j])
        rows = []
        for k in range(maxpow[j] + 1):
            rows.append([math.comb(k, i) * s**i * c ** (k - i) for i in range(k + 1)])
        expansions.append(rows)
    parts: dict[Exponent, list[float]] = {}
    for e, coef in p.items():
        choices = [list(enumerate(expansions[j][e[j]])) for j in range(nv)]
        for combo in itertools.product(*choices):
            val = coef
            for _, w in combo:
                val *= w
            if val != 0.0:
                parts.setdefault(tuple(i for i, _ in combo), []).append(val)
    # A coefficient is cancellation noise when it is tiny next to its own
    # contributions; small but genuine coefficients survive.
    terms = {}
    for k, v in parts.items():
        total = math.fsum(v)
        if abs(total) > CLEANUP_TOL * math.fsum(abs(u) for u in v):
            terms[k] = total
    return Polynomial(p.n, terms)


def evaluate(p: Polynomial, point: Sequence[float]) -> float:
    if len(point) != p.nvars:
        raise PolynomialError(f"point has length {len(point)}, expected {p.nvars}")
    total = 0.0
    for e, c in p.items():
        term = c
        for z, k in zip(point, e):
            if k:
                term *= z**k
        total += term
    return float(total)


# -- parsing ----------------------------------------------------------------

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<name>[A-Za-z_]\w*)|(?P<op>[-+*^()]))"
)


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            bad = pos + len(text[pos:]) - len(text[pos:].lstrip())
            raise ParseError(f"unexpected character {text[bad]!r}", text, bad)
        kind = m.lastgroup
        start = m.start(kind)
        tokens.append((kind, m.group(kind), start))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    # expr   := term (('+'|'-') term)*
    # term   := unary ('*' unary)*
    # unary  := ('+'|'-') unary | power
    # power  := atom ('^' INT)?
    # atom   := NUMBER | NAME | '(' expr ')'

    def __init__(self, text: str, names: dict[str, int], n: int):
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0
        self.names = names
        self.n = n

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def error(self, message: str, tok=None):
        tok = tok or self.peek()
        raise ParseError(message, self.text, tok[2])

    def parse(self) -> Polynomial:
        if self.peek()[0] == "end":
            self.error("empty expression")
        p = self.expr()
        if self.peek()[0] != "end":
            self.error(f"unexpected token {self.peek()[1]!r}")
        return p

    def expr(self) -> Polynomial:
        p = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            q = self.term()
            p = p + q if op == "+" else p - q
        return p

    def term(self) -> Polynomial:
        p = self.unary()
        while self.peek()[0] == "op" and self.peek()[1] == "*":
            self.take()
            p = p * self.unary()
        return p

    def unary(self) -> Polynomial:
        tok = self.peek()
        if tok[0] == "op" and tok[1] in ("+", "-"):
            self.take()
            p = self.unary()
            return -p if tok[1] == "-" else p
        return self.power()

    def power(self) -> Polynomial:
        base = self.atom()
        if self.peek()[0] == "op" and self.peek()[1] == "^":
            self.take()
            tok = self.peek()
            if tok[0] == "op" and tok[1] == "-":
                self.error("negative exponent")
            if tok[0] != "num":
                self.error("exponent must be an integer literal")
            self.take()
            if not re.fullmatch(r"\d+", tok[1]):
                self.error("exponent must be a nonnegative integer", tok)
            return base ** int(tok[1])
        return base

    def atom(self) -> Polynomial:
        p = self._atom()
        nxt = self.peek()
        if nxt[0] in ("num", "name") or (nxt[0] == "op" and nxt[1] == "("):
            self.error("implicit multiplication is not allowed", nxt)
        return p

    def _atom(self) -> Polynomial:
        tok = self.take()
        kind, val, _ = tok
        if kind == "num":
            return Polynomial.constant(self.n, float(val))
        if kind == "name":
            if val not in self.names:
                self.error(f"unknown variable {val!r}", tok)
            return Polynomial.variable(self.n, self.names[val])
        if kind == "op" and val == "(":
            p = self.expr()
            if self.peek()[1] != ")":
                self.error("expected ')'")
            self.take()
            return p
        if kind == "end":
            self.error("unexpected end of expression", tok)
        self.error(f"unexpected token {val!r}", tok)


def parse_poly(text: str, state_vars: Sequence[str]) -> Polynomial:
    """Parse ``text`` into a polynomial over ``t`` and ``state_vars``.

    >>> parse_poly("x1 + (x1^2 - 1)*x2", ["x1", "x2"]).to_string(["x1", "x2"])
    '1*x1 - 1*x2 + 1*x1^2*x2'
    """
    names = {"t": 0}
    for i, name in enumerate(state_vars, start=1):
        if name == "t":
            raise PolynomialError("'t' is reserved for time")
        names[name] = i
    p = _Parser(text, names, len(state_vars)).parse()
    return p


def parse_inequality(text: str, state_vars: Sequence[str]) -> Polynomial:
    """Parse ``"lhs >= rhs"`` or ``"lhs <= rhs"`` into ``g`` with ``g >= 0``."""
    for op in (">=", "<="):
        if op in text:
            lhs, _, rhs = text.partition(op)
            if ">=" in rhs or "<=" in rhs:
                raise ParseError("more than one comparison", text, text.index(op))
            a = parse_poly(lhs, state_vars)
            b = parse_poly(rhs, state_vars)
            return a - b if op == ">=" else b - a
    raise ParseError("expected '>=' or '<='", text, 0)


def polys_from_strings(texts: Iterable[str], state_vars: Sequence[str]) -> list[Polynomial]:
    return [parse_poly(s, state_vars) for s in texts]
