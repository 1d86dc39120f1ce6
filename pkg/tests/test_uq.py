import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pc2.design import sample_lhs
from pc2.model import Pc2Model
from pc2.polybasis import VariableTransform, eval_basis, legendre_table, multi_index_set
from pc2.solver import TrainingData, fit_ols
from pc2.uq import (
    ReducedPce,
    UQError,
    error_breakdown,
    global_mean,
    global_variance,
    local_fields,
    local_stats,
    reduce_at,
    sobol_first_order,
    sobol_indices,
    sobol_total,
)

R = lambda n, lo=-1.0, hi=1.0: VariableTransform(n, "random", lo, hi)  # noqa: E731
D_ = lambda n, lo=-1.0, hi=1.0: VariableTransform(n, "deterministic", lo, hi)  # noqa: E731


def _model(transforms, p, coef):
    return Pc2Model(multi_index_set(len(transforms), p), coef, transforms)


def random_model(seed, kinds, p=4):
    rng = np.random.default_rng(seed)
    tr = tuple(VariableTransform(f"v{i}", k, -1.0 - i, 1.0 + 2 * i) for i, k in enumerate(kinds))
    b = multi_index_set(len(tr), p)
    return Pc2Model(b, rng.normal(size=b.P) / (1 + b.total_degree), tr)


def test_global_moment_examples(rng):
    m = _model((R("a"),), 2, [2.0, 3.0, 4.0])
    assert global_mean(m) == 2.0 and global_variance(m) == 25.0
    assert global_variance(_model((R("a"), R("b")), 2, [7.0] + [0.0] * 5)) == 0.0
    xi = rng.uniform(-1, 1, (2000, 1))
    fitted = fit_ols(TrainingData(xi, math.sqrt(3) * xi[:, 0]), multi_index_set(1, 3), (R("a"),))
    assert global_variance(fitted) == pytest.approx(1.0, abs=1e-10)


def test_global_moments_reject_deterministic_variables():
    m = _model((D_("x"), R("D")), 2, np.ones(6))
    with pytest.raises(UQError, match="local_stats"):
        global_mean(m)
    with pytest.raises(UQError):
        global_variance(m)


def test_reduce_without_random_variables_gives_value():
    m = random_model(0, ["deterministic", "deterministic"])
    red = reduce_at(m, {"v0": 0.2, "v1": 1.5})
    assert red.constant == pytest.approx(m.evaluate([[0.2, 1.5]])[0], abs=1e-13)
    assert red.variance == 0.0


def test_reduce_single_mixed_term():
    b = multi_index_set(2, 3)
    coef = np.zeros(b.P)
    coef[b.as_tuples().index((2, 1))] = 0.7
    m = Pc2Model(b, coef, (D_("x"), R("D")))
    red = reduce_at(m, [1.0])
    assert len(red.coefficients) == len(set(map(tuple, red.indices)))
    j = [tuple(r) for r in red.indices].index((1,))
    assert red.coefficients[j] == pytest.approx(0.7 * math.sqrt(5), rel=1e-14)


def test_reduce_merges_duplicates():
    b = multi_index_set(2, 4)
    coef = np.zeros(b.P)
    coef[b.as_tuples().index((1, 1))] = 1.0
    coef[b.as_tuples().index((3, 1))] = 2.0
    m = Pc2Model(b, coef, (D_("x"), R("D")))
    red = reduce_at(m, [0.4])
    nz = [(tuple(i), c) for i, c in zip(red.indices, red.coefficients) if c != 0]
    expect = legendre_table(3, 0, np.array([0.4]))[0]
    assert len(nz) == 1 and nz[0][0] == (1,)
    assert nz[0][1] == pytest.approx(expect[1] + 2 * expect[3], rel=1e-14)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10**6), st.permutations(["deterministic", "random", "random"]))
def test_reduction_consistency(seed, kinds):
    m = random_model(seed, kinds)
    rng = np.random.default_rng(seed)
    xi = rng.uniform(-1, 1, (20, 3))
    x = m.from_standard(xi)
    det = [i for i, k in enumerate(kinds) if k == "deterministic"]
    rnd = [i for i, k in enumerate(kinds) if k == "random"]
    red = reduce_at(m, x[0, det])
    xi_same_det = xi.copy()
    xi_same_det[:, det] = xi[0, det]
    full = m.evaluate_standard(xi_same_det)
    np.testing.assert_allclose(red.evaluate(xi[:, rnd]), full, atol=1e-10)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10**6), st.sampled_from([["random"] * 3, ["deterministic", "random", "random"]]))
def test_sobol_closure(seed, kinds):
    m = random_model(seed, kinds)
    groups = sobol_indices(m, None if "deterministic" not in kinds else [0.3])
    assert abs(sum(groups.values()) - 1.0) < 1e-12
    assert all(0 <= v <= 1 for v in groups.values())


@pytest.mark.parametrize("M", [1, 2, 3])
def test_variance_matches_quadrature(M):
    m = random_model(M, ["random"] * M, p=5)
    nodes, w = np.polynomial.legendre.leggauss(8)
    grid = np.stack(np.meshgrid(*[nodes] * M, indexing="ij"), -1).reshape(-1, M)
    weights = np.prod(np.stack(np.meshgrid(*[w / 2] * M, indexing="ij"), -1).reshape(-1, M), axis=1)
    u = m.evaluate_standard(grid)
    quad_mean = np.sum(weights * u)
    quad_var = np.sum(weights * (u - m.coefficients[0]) ** 2)
    assert abs(global_variance(m) - quad_var) < 1e-8
    assert abs(global_mean(m) - quad_mean) < 1e-12


def test_sobol_examples():
    single = random_model(1, ["deterministic", "random"])
    assert sobol_first_order(single, 0, [0.1]) == pytest.approx(1.0)
    b = multi_index_set(2, 2)
    add = np.zeros(b.P)
    add[b.as_tuples().index((1, 0))] = add[b.as_tuples().index((0, 1))] = 0.8
    m = Pc2Model(b, add, (R("a"), R("b")))
    assert sobol_first_order(m, 0) == pytest.approx(0.5) and sobol_first_order(m, 1) == pytest.approx(0.5)
    inter = np.zeros(b.P)
    inter[b.as_tuples().index((1, 1))] = 1.0
    m = Pc2Model(b, inter, (R("a"), R("b")))
    assert sobol_first_order(m, 0) == 0.0 == sobol_first_order(m, 1)
    assert sobol_total(m, 0) == pytest.approx(1.0)
    with pytest.raises(UQError):
        sobol_indices(Pc2Model(b, np.eye(b.P)[0], (R("a"), R("b"))))


@pytest.fixture(scope="module")
def heat_projection():
    """L2 projection of sin(pi x) exp(-D pi^2 t) onto a degree-12 basis."""
    tr = (D_("x", 0, 1), D_("t", 0, 1), R("D", 0.2, 0.8))
    b = multi_index_set(3, 12)
    n, w = np.polynomial.legendre.leggauss(20)
    grid = np.stack(np.meshgrid(n, n, n, indexing="ij"), -1).reshape(-1, 3)
    wt = np.prod(np.stack(np.meshgrid(w, w, w, indexing="ij"), -1).reshape(-1, 3), axis=1) / 8
    x = np.column_stack([t.from_standard(grid[:, i]) for i, t in enumerate(tr)])
    f = np.sin(np.pi * x[:, 0]) * np.exp(-x[:, 2] * np.pi**2 * x[:, 1])
    return Pc2Model(b, eval_basis(b, grid).T @ (wt * f), tr)


def test_heat_local_mean_formula(heat_projection):
    xs = np.linspace(0, 1, 7)
    for t in (0.0, 0.25, 0.5, 1.0):
        pts = np.column_stack([xs, np.full_like(xs, t)])
        mean, var = local_fields(heat_projection, pts)
        if t == 0:
            exact = np.sin(np.pi * xs)
            assert np.max(var) < 1e-6
        else:
            exact = np.sin(np.pi * xs) * (np.exp(-0.2 * np.pi**2 * t) - np.exp(-0.8 * np.pi**2 * t)) / (0.6 * np.pi**2 * t)
        assert np.max(np.abs(mean - exact)) < 1e-4


def test_local_moments_match_lhs(heat_projection):
    mean, var = local_stats(heat_projection, {"x": 0.5, "t": 0.5})
    D = 0.5 + 0.3 * sample_lhs(100_000, 1, 11)[:, 0]
    u = np.exp(-D * np.pi**2 * 0.5)
    se_mean = u.std() / math.sqrt(u.size)
    assert abs(mean - u.mean()) < 3 * se_mean
    assert abs(var - u.var()) / u.var() < 0.02
    red = reduce_at(heat_projection, {"x": 0.5, "t": 0.5})
    samples = red.evaluate(2 * ((D - 0.2) / 0.6) - 1)
    assert abs(samples.var() - var) < 3 * var * math.sqrt(2 / samples.size) + 1e-12


def test_error_breakdown_examples(poisson):
    exact = Pc2Model(multi_index_set(1, 2), [4 / 3, 2 / math.sqrt(3), 2 / (3 * math.sqrt(5))], poisson.variables)
    eb = error_breakdown(exact, poisson)
    assert max(eb.r2_u, eb.r2_L, eb.r2_B, eb.eps_max) < 1e-12
    zero = Pc2Model(multi_index_set(1, 2), np.zeros(3), poisson.variables)
    eb = error_breakdown(zero, poisson, n_interior=1_000_000, seed=4)
    assert eb.eps_mean == pytest.approx(16 / 5, abs=0.02)
    assert eb.r2 == eb.r2_u + eb.r2_L + eb.r2_B


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10**6))
def test_eps_max_dominates_mean(seed):
    from conftest import poisson_problem

    problem = poisson_problem()
    m = Pc2Model(multi_index_set(1, 3), np.random.default_rng(seed).normal(size=4), problem.variables)
    eb = error_breakdown(m, problem, n_interior=200, n_boundary=10, seed=seed)
    assert eb.eps_max >= eb.eps_mean >= 0


def test_error_breakdown_without_reference(poisson):
    poisson.reference = None
    eb = error_breakdown(Pc2Model(multi_index_set(1, 2), np.zeros(3), poisson.variables), poisson, n_interior=100)
    assert "no_reference" in eb.flags and math.isnan(eb.r2_u)
    with pytest.raises(ValueError):
        error_breakdown(Pc2Model(multi_index_set(1, 2), np.zeros(3), poisson.variables), poisson, n_interior=0)


def test_reduced_pce_standalone():
    red = ReducedPce((0,), np.array([[0], [1]]), np.array([1.5, 2.0]))
    assert red.mean == 1.5 and red.variance == 4.0
