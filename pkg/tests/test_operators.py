import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pc2.expression import Expression
from pc2.model import Pc2Model
from pc2.operators import (
    BoundaryCondition,
    LinearOperator,
    ProblemError,
    ProblemSpec,
    constraint_row,
    constraint_rows,
    residual,
)
from pc2.polybasis import VariableTransform, eval_basis, legendre_table, multi_index_set

X = VariableTransform("x", "deterministic", -1.0, 1.0)
S5 = math.sqrt(5)


def test_poisson_rows():
    b = multi_index_set(1, 2)
    pde = LinearOperator.make([("1", {"x": 2})], "2")
    a, c = constraint_row(pde, b, (X,), [0.37])
    np.testing.assert_allclose(a, [0, 0, 3 * S5], atol=1e-13)
    assert c == 2.0
    a, c = constraint_row(LinearOperator.dirichlet("0"), b, (X,), [-1.0])
    np.testing.assert_allclose(a, eval_basis(b, np.array([[-1.0]]))[0])
    assert c == 0.0
    a, c = constraint_row(LinearOperator.make([("1", {"x": 1})], "4"), b, (X,), [1.0])
    np.testing.assert_allclose(a, [0, math.sqrt(3), 3 * S5], atol=1e-13)
    assert c == 4.0


def test_u_prev_needs_binding():
    b = multi_index_set(1, 3)
    op = LinearOperator.make([("1", {"x": 1}), ("-(1 - u_prev)", {})], "0")
    with pytest.raises(ValueError):
        constraint_row(op, b, (X,), [0.0])


_coef = st.sampled_from(["1", "x", "2 - x^2", "sin(x)", "-3", "exp(x)/2"])
_ord = st.integers(0, 3)


@settings(max_examples=40, deadline=None)
@given(_coef, _ord, _coef, _ord, st.floats(-1, 1))
def test_rows_are_linear_in_the_operator(c1, k1, c2, k2, xi):
    b = multi_index_set(1, 6)
    L1 = LinearOperator.make([(c1, {"x": k1})], "x")
    L2 = LinearOperator.make([(c2, {"x": k2})], "1")
    L12 = LinearOperator.make([(c1, {"x": k1}), (c2, {"x": k2})], "x")
    a1, _ = constraint_row(L1, b, (X,), [xi])
    a2, _ = constraint_row(L2, b, (X,), [xi])
    a12, _ = constraint_row(L12, b, (X,), [xi])
    np.testing.assert_allclose(a12, a1 + a2, rtol=1e-13, atol=1e-12)


@settings(max_examples=40, deadline=None)
@given(_coef, _ord, st.lists(st.floats(-2, 2), min_size=10, max_size=10), st.floats(-1, 1))
def test_row_dot_beta_is_residual(coef, k, beta, xi):
    b = multi_index_set(1, 9)
    tr = (VariableTransform("x", "deterministic", 0.0, 3.0),)
    op = LinearOperator.make([(coef, {"x": k}), ("1", {})], "cos(x)")
    model = Pc2Model(b, np.array(beta), tr)
    a, c = constraint_row(op, b, tr, [xi])
    r = residual(op, model, np.array([xi]))
    assert abs(a @ model.coefficients - c - r) <= 1e-12 * max(1.0, abs(r))


def test_row_consistency_with_fixed_u_prev():
    b = multi_index_set(1, 6)
    rng = np.random.default_rng(2)
    prev = Pc2Model(b, rng.normal(size=b.P), (X,))
    model = Pc2Model(b, rng.normal(size=b.P), (X,))
    op = LinearOperator.make([("1", {"x": 1}), ("-(1 - u_prev)", {})], "0")
    xi = rng.uniform(-1, 1, (7, 1))
    A, c = constraint_rows(op, b, (X,), xi, u_prev=prev)
    env_prev = prev.evaluate_standard(xi)
    direct = model.evaluate_standard(xi, [1]) - (1 - env_prev) * model.evaluate_standard(xi)
    np.testing.assert_allclose(A @ model.coefficients - c, direct, atol=1e-12)


def test_chain_rule_scaling():
    b = multi_index_set(1, 5)
    narrow = (VariableTransform("x", "deterministic", 0.0, 1.0),)
    wide = (VariableTransform("x", "deterministic", 0.0, 2.0),)
    op = LinearOperator.make([("1", {"x": 1})], "0")
    a1, _ = constraint_row(op, b, narrow, [0.3])
    a2, _ = constraint_row(op, b, wide, [0.3])
    np.testing.assert_array_equal(a2, a1 / 2)


def test_residual_examples(poisson):
    b = multi_index_set(1, 2)
    # (x+1)^2 = 4/3 psi0 + 2/sqrt(3) psi1 + 2/(3 sqrt 5) psi2
    exact = Pc2Model(b, [4 / 3, 2 / math.sqrt(3), 2 / (3 * S5)], (X,))
    xi = np.linspace(-1, 1, 21)[:, None]
    assert np.max(np.abs(residual(poisson.pde, exact, xi))) < 1e-10
    zero = Pc2Model(b, np.zeros(3), (X,))
    np.testing.assert_allclose(residual(poisson.pde, zero, xi), -2.0)
    assert isinstance(residual(poisson.pde, zero, np.array([0.1])), float)


def test_logistic_residual_of_projection():
    tr = (VariableTransform("x", "deterministic", -5.0, 5.0),)
    nodes, w = np.polynomial.legendre.leggauss(200)
    f = 1 / (1 + np.exp(-5 * nodes))
    table = legendre_table(20, 0, nodes)
    beta = table.T @ (f * w / 2)
    model = Pc2Model(multi_index_set(1, 20), beta, tr)
    op = LinearOperator.make([("1", {"x": 1}), ("-(1 - u_prev)", {})], "0")
    xi = np.linspace(-0.8, 0.8, 161)[:, None]
    assert np.max(np.abs(residual(op, model, xi))) < 1e-3


def test_problem_validation():
    x = VariableTransform("x", "deterministic", 0.0, 1.0)
    D = VariableTransform("D", "random", 0.2, 0.8)
    pde = LinearOperator.make([("1", {"x": 2})], "0")
    with pytest.raises(ProblemError, match="deterministic"):
        ProblemSpec((x, D), LinearOperator.make([("1", {"D": 1})], "0"))
    with pytest.raises(ProblemError, match="unknown identifier 'y'"):
        ProblemSpec((x,), LinearOperator.make([("1", {"x": 2})], "y"))
    with pytest.raises(ProblemError):
        ProblemSpec((x,), pde, [BoundaryCondition.make(LinearOperator.dirichlet("0"), {"x": 2.0})])
    with pytest.raises(ProblemError):
        ProblemSpec((x, D), pde, [BoundaryCondition.make(LinearOperator.dirichlet("0"), {"D": 0.2})])
    with pytest.raises(ProblemError):
        ProblemSpec((x,), pde, reference=Expression("z"))
