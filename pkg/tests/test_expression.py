import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pc2.expression import Expression, ExpressionError, parse_expression


def test_examples():
    assert parse_expression("sin(pi*x)").evaluate({"x": 0.5}) == pytest.approx(1.0)
    two = parse_expression("2")
    assert two.is_constant and two.evaluate({}) == 2.0
    e = parse_expression("u_prev*1 - 1")
    assert e.uses_u_prev
    with pytest.raises(ExpressionError):
        e.evaluate({})
    assert e.evaluate({"u_prev": 3.0}) == 2.0


def test_precedence():
    assert parse_expression("-2^2").evaluate({}) == -4.0
    assert parse_expression("2^3^2").evaluate({}) == 512.0
    assert parse_expression("1 + 2*3 - 4/2").evaluate({}) == 5.0
    assert parse_expression("e").evaluate({}) == pytest.approx(math.e)


@pytest.mark.parametrize(
    "text, offset",
    [("1+", 2), ("foo(x)", 0), ("2*(x", 4), ("x $ 2", 2), ("", 0)],
)
def test_syntax_errors_carry_offsets(text, offset):
    with pytest.raises(ExpressionError) as info:
        parse_expression(text)
    assert info.value.offset == offset


def test_unknown_identifier_is_an_error_not_zero():
    with pytest.raises(ExpressionError):
        parse_expression("x + y").evaluate({"x": 1.0})


def test_vectorized_and_shape():
    x = np.linspace(0, 1, 5)
    np.testing.assert_allclose(parse_expression("x^2").evaluate({"x": x}), x**2)
    assert parse_expression("3").evaluate({}, (4,)).shape == (4,)


def test_symbolic_derivative():
    d = parse_expression("sin(pi*x)*exp(-D*t)").diff("t")
    env = {"x": 0.3, "t": 0.2, "D": 0.5}
    expect = -0.5 * math.sin(math.pi * 0.3) * math.exp(-0.1)
    assert d.evaluate(env) == pytest.approx(expect, rel=1e-14)


_leaf = st.one_of(
    st.sampled_from(["x", "y", "pi"]),
    st.floats(0.1, 9.5, allow_nan=False).map(lambda v: repr(round(v, 3))),
)


def _extend(children):
    return st.one_of(
        st.tuples(children, st.sampled_from(["+", "-", "*", "/"]), children).map(lambda t: f"({t[0]}){t[1]}({t[2]})"),
        children.map(lambda c: f"-({c})"),
        st.tuples(st.sampled_from(["sin", "cos", "tanh", "abs"]), children).map(lambda t: f"{t[0]}({t[1]})"),
        children.map(lambda c: f"exp(({c})/100)"),
        children.map(lambda c: f"sqrt(abs({c}))"),
    )


_exprs = st.recursive(_leaf, _extend, max_leaves=12)


@settings(max_examples=150, deadline=None)
@given(_exprs, st.floats(-2, 2), st.floats(-2, 2))
def test_print_parse_round_trip(text, x, y):
    e = parse_expression(text)
    again = parse_expression(str(e))
    env = {"x": x, "y": y}
    with np.errstate(all="ignore"):
        a, b = e.evaluate(env), again.evaluate(env)
    if np.isfinite(a):
        assert b == pytest.approx(a, rel=1e-14, abs=1e-14)
    assert again.canonical() == e.canonical()


def test_equality_by_canonical_form():
    assert Expression("x + 1") == Expression("x+1")
