import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from rptlab.errors import ArityError, EvalDomainError, ExprSyntaxError, UnknownIdentifier
from rptlab.exprfield import Field, compile_expr, diff, evaluate, parse, to_str, var_names


def val(src, x, n=None):
    x = np.asarray(x, dtype=float)
    return float(evaluate(parse(src, n or len(x)), x))


@pytest.mark.parametrize("src, x, expected", [
    ("x1^2 + x2", (2, 3), 7.0),
    ("sin(x1)*x2", (0, 5), 0.0),
    ("1 - x1^2 - x2^2", (0.6, 0.8), 0.0),
    ("-x1^2", (3,), -9.0),
    ("2^-1", (0,), 0.5),
    ("x1^(-2)", (2,), 0.25),
    ("2*3^2", (0,), 18.0),
    ("8/4/2", (0,), 1.0),
    ("1 - 2 - 3", (0,), -4.0),
    ("pi", (0,), math.pi),
    ("1e-3*x1", (2,), 2e-3),
])
def test_precedence_and_literals(src, x, expected):
    assert val(src, x) == pytest.approx(expected, abs=1e-15)


@pytest.mark.parametrize("src, var, x, expected", [
    ("x1^2*x2", 1, (3, 2), 12.0),
    ("exp(x2)", 1, (0.3, 0.7), 0.0),
    ("sqrt(x1)", 1, (4,), 0.25),
    ("log(x1)*x1", 1, (2,), math.log(2) + 1),
    ("tanh(x1)", 1, (0,), 1.0),
])
def test_diff_examples(src, var, x, expected):
    n = len(x)
    d = diff(parse(src, n), var)
    assert float(evaluate(d, np.asarray(x, float))) == pytest.approx(expected, abs=1e-14)


def test_second_derivative_of_sin_at_zero():
    d2 = diff(diff(parse("sin(x1)", 1), 1), 1)
    assert float(evaluate(d2, np.array([0.0]))) == 0.0


def test_syntax_error_carries_offset():
    with pytest.raises(ExprSyntaxError) as info:
        parse("x1 + * x2", 2)
    assert info.value.offset == 5


def test_unknown_identifier_and_arity():
    with pytest.raises(UnknownIdentifier):
        parse("x3 + 1", 2)
    with pytest.raises(UnknownIdentifier):
        parse("foo(x1)", 1)
    with pytest.raises(ArityError):
        parse("sin(x1, x2)", 2)


def test_non_integer_exponent_rejected():
    with pytest.raises(ExprSyntaxError):
        parse("x1^0.5", 1)


@pytest.mark.parametrize("src, x", [("log(x1)", (0.0,)), ("sqrt(x1)", (-1.0,)), ("1/x1", (0.0,))])
def test_domain_errors(src, x):
    with pytest.raises(EvalDomainError):
        val(src, x)


def test_identical_text_gives_identical_tree():
    assert parse("x1*sin(x2) + 3", 2) == parse("x1*sin(x2) + 3", 2)


def test_compiled_matches_tree_walk():
    e = parse("exp(-x1^2)*cos(3*x2) + x1/(2 + x2^2)", 2)
    f = compile_expr(e, var_names(2))
    pts = np.random.default_rng(0).uniform(-1, 1, (50, 2))
    np.testing.assert_allclose(f(pts[:, 0], pts[:, 1]), evaluate(e, pts), rtol=0, atol=1e-15)


def test_field_gradient():
    f = Field("x1^2*x2 + sin(x2)", 2)
    g = f.grad()
    x = np.array([[1.5, 0.3]])
    assert g[0](x)[0] == pytest.approx(2 * 1.5 * 0.3)
    assert g[1](x)[0] == pytest.approx(1.5**2 + math.cos(0.3))


# ---------------------------------------------------------------- properties

LEAVES = st.sampled_from(["x1", "x2", "x3", "0.5", "2", "1.25", "pi"])


def _wrap(children):
    unary = st.tuples(st.sampled_from(["sin({})", "cos({})", "tanh({})", "exp(tanh({}))",
                                       "sqrt(1 + ({})^2)", "log(2 + sin({}))", "-({})", "({})^2", "({})^3"]),
                      children).map(lambda p: p[0].format(p[1]))
    binary = st.tuples(children, st.sampled_from(["+", "-", "*"]), children).map(lambda p: f"({p[0]}) {p[1]} ({p[2]})")
    quotient = st.tuples(children, children).map(lambda p: f"({p[0]})/(2 + sin({p[1]}))")
    return unary | binary | quotient


EXPRS = st.recursive(LEAVES, _wrap, max_leaves=8)
POINTS = st.lists(st.floats(-1, 1), min_size=3, max_size=3).map(np.array)


@given(EXPRS, POINTS, st.integers(1, 3))
def test_diff_matches_central_differences(src, x, var):
    e = parse(src, 3)
    d = float(evaluate(diff(e, var), x))
    step = 1e-5
    xp, xm = x.copy(), x.copy()
    xp[var - 1] += step
    xm[var - 1] -= step
    fd = (float(evaluate(e, xp)) - float(evaluate(e, xm))) / (2 * step)
    scale = max(1.0, abs(d), abs(float(evaluate(e, x))))
    assert abs(d - fd) <= 1e-6 * scale


@given(EXPRS, POINTS)
def test_print_parse_round_trip(src, x):
    e = parse(src, 3)
    again = parse(to_str(e), 3)
    a, b = float(evaluate(e, x)), float(evaluate(again, x))
    assert a == pytest.approx(b, rel=1e-12, abs=1e-12)


@given(EXPRS)
def test_second_derivatives_stay_in_grammar(src):
    e = parse(src, 3)
    d2 = diff(diff(e, 1), 2)
    assert parse(to_str(d2), 3) is not None
