from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from occusafe.polyalg import (
    ParseError,
    Polynomial,
    PolynomialError,
    compose_affine,
    differentiate,
    enumerate_monomials,
    evaluate,
    lie_derivative,
    parse_poly,
)

V2 = ["x1", "x2"]


def P(text: str, names=V2) -> Polynomial:
    return parse_poly(text, names)


VDP = [P("-x2"), P("x1 + (x1^2 - 1)*x2")]


# -- parsing -------------------------------------------------------------------


def test_parse_vanderpol_component():
    p = P("x1 + (x1^2 - 1)*x2")
    assert p.terms == {(0, 1, 0): 1.0, (0, 0, 1): -1.0, (0, 2, 1): 1.0}


def test_parse_zero():
    p = parse_poly("0", ["x1"])
    assert p.is_zero() and p.degree == 0 and p.terms == {}


def test_parse_unsafe_polynomial_constant_term():
    p = P("52*(x1 - 0.25)^2 - (x2 + 0.5)^2 - 1")
    assert p.coefficient((0, 0, 0)) == pytest.approx(2.0, abs=1e-14)


@pytest.mark.parametrize(
    "text, fragment",
    [("x1 +* x2", "position"), ("x3 + 1", "x3"), ("x1^-1", "position"), ("x1^1.5", "position"), ("2 x1", "position")],
)
def test_parse_errors(text, fragment):
    with pytest.raises(PolynomialError) as info:
        P(text)
    assert fragment in str(info.value)


def test_parse_error_reports_position():
    with pytest.raises(ParseError) as info:
        P("x1 + (x2")
    assert info.value.position >= 0


def test_parse_time_variable():
    p = P("t^2*x1 - 3")
    assert p.terms == {(2, 1, 0): 1.0, (0, 0, 0): -3.0}
    assert p.time_degree() == 2


# -- arithmetic ----------------------------------------------------------------


def test_add_cancels():
    assert (P("x1 + 1") + P("-x1")) == Polynomial.constant(2, 1.0)


def test_difference_of_squares():
    assert P("x1 + x2") * P("x1 - x2") == P("x1^2 - x2^2")


def test_scale():
    assert P("x1^2*x2").scale(2.0) == P("2*x1^2*x2")


def test_mul_degree_adds():
    a, b = P("x1^2 + x2"), P("x1*x2 - 1")
    assert (a * b).degree == a.degree + b.degree


def test_variable_set_mismatch():
    with pytest.raises(PolynomialError):
        P("x1") + parse_poly("x1", ["x1"])


# -- calculus ------------------------------------------------------------------


def test_differentiate_examples():
    assert differentiate(P("x1^2*x2"), "x1") == P("2*x1*x2")
    assert differentiate(Polynomial.constant(2, 4.0), "t").is_zero()
    assert differentiate(VDP[1], "x2") == P("x1^2 - 1")


def test_lie_derivative_examples():
    assert lie_derivative(P("t"), VDP) == Polynomial.constant(2, 1.0)
    assert lie_derivative(P("x1^2 + x2^2"), VDP) == P("2*x2^2*(x1^2 - 1)")
    assert lie_derivative(P("x1"), [P("-x2"), P("x1^3")]) == P("-x2")


def test_lie_derivative_degree_bound():
    v = P("t*x1^2 + x2^3")
    assert lie_derivative(v, VDP).degree <= v.degree - 1 + max(1, max(f.degree for f in VDP))


def test_lie_derivative_dimension_mismatch():
    with pytest.raises(PolynomialError):
        lie_derivative(P("x1"), [P("x1")])


# -- substitution and evaluation ------------------------------------------------


def test_compose_affine_examples():
    one = parse_poly("x1", ["x1"])
    assert compose_affine(one, [1, 3], [0, 0]) == parse_poly("3*x1", ["x1"])
    sq = parse_poly("x1^2", ["x1"])
    assert compose_affine(sq, [1, 2], [0, 1]) == parse_poly("4*x1^2 + 4*x1 + 1", ["x1"])
    assert compose_affine(parse_poly("t", ["x1"]), [10, 1], [0, 0]) == parse_poly("10*t", ["x1"])


def test_compose_affine_zero_scale():
    with pytest.raises(PolynomialError):
        compose_affine(P("x1"), [1, 0, 1], [0, 0, 0])


def test_evaluate_examples():
    assert evaluate(parse_poly("x1^2 - 1", ["x1"]), [0.0, 2.0]) == 3.0
    assert evaluate(Polynomial.zero(2), [0.3, 1.0, -2.0]) == 0.0
    g = P("1 - 52*(x1 - 0.25)^2 + (x2 + 0.5)^2")
    assert evaluate(g, [0.0, 0.25, -0.5]) == pytest.approx(1.0, abs=1e-14)


def test_evaluate_length_mismatch():
    with pytest.raises(PolynomialError):
        evaluate(P("x1"), [1.0, 2.0])


# -- monomial enumeration --------------------------------------------------------


def test_enumerate_two_vars_degree_two():
    assert list(enumerate_monomials(2, 2)) == [(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2)]


def test_enumerate_counts():
    assert list(enumerate_monomials(3, 0)) == [(0, 0, 0)]
    assert len(enumerate_monomials(3, 12)) == 455 == math.comb(15, 12)


def test_enumerate_graded_prefix():
    assert enumerate_monomials(3, 4)[: math.comb(6, 3)] == enumerate_monomials(3, 3)


# -- properties -----------------------------------------------------------------

coef = st.floats(min_value=-10, max_value=10, allow_nan=False).filter(lambda c: c == 0 or abs(c) > 1e-6)
exponent = st.tuples(*[st.integers(0, 3)] * 3)
polys = st.dictionaries(exponent, coef, max_size=6).map(lambda d: Polynomial(2, d))
points = st.tuples(*[st.floats(-1.5, 1.5)] * 3)


@settings(max_examples=200, deadline=None)
@given(polys)
def test_print_parse_round_trip(p):
    q = parse_poly(p.to_string(V2), V2)
    assert q.allclose(p, atol=0.0)
    assert parse_poly(q.to_string(V2), V2) == q


@settings(max_examples=200, deadline=None)
@given(polys, polys, polys)
def test_ring_axioms(a, b, c):
    assert ((a + b) + c).allclose(a + (b + c), 1e-10)
    assert (a * (b + c)).allclose(a * b + a * c, 1e-9)


@settings(max_examples=200, deadline=None)
@given(polys, polys, st.sampled_from(["t", "x1", "x2"]))
def test_leibniz(a, b, var):
    lhs = differentiate(a * b, var)
    rhs = differentiate(a, var) * b + a * differentiate(b, var)
    assert lhs.allclose(rhs, 1e-9)


@settings(max_examples=200, deadline=None)
@given(polys, polys, points)
def test_evaluation_homomorphism(a, b, z):
    ab = evaluate(a * b, z)
    prod = evaluate(a, z) * evaluate(b, z)
    assert ab == pytest.approx(prod, rel=1e-12, abs=1e-9)


@settings(max_examples=200, deadline=None)
@given(
    polys,
    st.tuples(*[st.floats(0.25, 4.0)] * 3),
    st.tuples(*[st.floats(-2.0, 2.0)] * 3),
)
def test_compose_affine_inverse(p, s, c):
    q = compose_affine(compose_affine(p, s, c), [1 / v for v in s], [-u / v for u, v in zip(c, s)])
    assert q.allclose(p, atol=1e-12 * max(1.0, p.max_abs_coefficient()))


@settings(max_examples=100, deadline=None)
@given(polys, st.tuples(*[st.floats(0.5, 3.0)] * 3), st.tuples(*[st.floats(-1.0, 1.0)] * 3), points)
def test_compose_affine_commutes_with_evaluation(p, s, c, z):
    q = compose_affine(p, s, c)
    mapped = [si * zi + ci for si, zi, ci in zip(s, z, c)]
    assert evaluate(q, z) == pytest.approx(evaluate(p, mapped), rel=1e-9, abs=1e-8)


def test_evaluate_many_matches_scalar():
    rng = np.random.default_rng(3)
    p = P("t*x1^2 - 3*x2^3 + 0.5")
    pts = rng.uniform(-1, 1, size=(20, 3))
    np.testing.assert_allclose(p.evaluate_many(pts), [evaluate(p, z) for z in pts], rtol=1e-14)
