import csv
import io
import math

import numpy as np
import pytest

from pc2.bench import (
    BC_GATE,
    CASE_IDS,
    PDE_GATE,
    TRIAL_COLUMNS,
    builtin_case,
    reference_local_stats,
    run_convergence,
    run_heat_uq,
)
from pc2.uq import reference_residuals

FAST = (2000, 50)


def test_reference_examples():
    assert builtin_case("poisson1d").reference.evaluate({"x": 1.0}) == 4.0
    xs = np.linspace(0, 1, 11)
    wave = builtin_case("wave2d").reference.evaluate({"x": xs, "t": 0.0 * xs})
    np.testing.assert_allclose(wave, np.sin(np.pi * xs), atol=1e-15)
    for D in (0.2, 0.5, 0.8):
        heat = builtin_case("heat_uq").reference.evaluate({"x": xs, "t": 0.0 * xs, "D": D + 0 * xs})
        np.testing.assert_allclose(heat, np.sin(np.pi * xs), atol=1e-15)
    with pytest.raises(KeyError):
        builtin_case("burgers")


@pytest.mark.parametrize("case", CASE_IDS)
def test_reference_gates(case):
    c = builtin_case(case)
    pde, bc = reference_residuals(c.problem, c.reference, n=1000, seed=1)
    assert pde < PDE_GATE and bc < BC_GATE


def test_poisson_convergence_row_schema():
    rep = run_convergence(builtin_case("poisson1d"), ["kkt"], [2], trials=3, validation=FAST)
    rows = list(csv.DictReader(io.StringIO(rep.trials_csv())))
    assert tuple(rows[0]) == TRIAL_COLUMNS and len(rows) == 3
    assert all(float(r["eps_max"]) < 1e-8 for r in rows)
    assert len({r["seed"] for r in rows}) == 3
    assert all(r["fit_ms"] == "" for r in rows)


def test_single_trial_has_zero_sd():
    rep = run_convergence(builtin_case("euler_beam"), ["kkt", "lar"], [2], trials=1, validation=FAST)
    for agg in rep.aggregate():
        for k, v in agg.items():
            if k.startswith("sd_") and not math.isnan(v):
                assert v == 0.0


def test_same_seed_same_bytes():
    case = builtin_case("logistic")
    a = run_convergence(case, ["kkt"], [10], trials=2, base_seed=4, validation=FAST)
    b = run_convergence(case, ["kkt"], [10], trials=2, base_seed=4, validation=FAST)
    assert a.trials_csv() == b.trials_csv() and a.aggregate_csv() == b.aggregate_csv()
    c = run_convergence(case, ["kkt"], [10], trials=2, base_seed=5, validation=FAST)
    assert c.trials_csv() != a.trials_csv()


def test_parallel_matches_serial():
    case = builtin_case("poisson1d")
    a = run_convergence(case, ["kkt", "lar"], [2, 3], trials=2, validation=FAST)
    b = run_convergence(case, ["kkt", "lar"], [2, 3], trials=2, validation=FAST, jobs=2)
    assert a.trials_csv() == b.trials_csv()


def test_aggregation_recomputes_from_csv():
    rep = run_convergence(builtin_case("heat_det"), ["kkt", "lar"], [5, 10], trials=3, validation=FAST)
    rows = list(csv.DictReader(io.StringIO(rep.trials_csv())))
    aggs = list(csv.DictReader(io.StringIO(rep.aggregate_csv())))
    for agg in aggs:
        cell = [r for r in rows if r["method"] == agg["method"] and r["n_sim"] == agg["n_sim"]]
        assert int(agg["trials"]) == len(cell) == 3
        for m in ("r2_u", "r2_L", "r2_B", "r2", "eps_mean", "eps_max", "n_V", "p_selected"):
            vals = np.array([float(r[m]) for r in cell])
            assert float(agg[f"mean_{m}"]) == float(np.mean(vals))
            assert float(agg[f"sd_{m}"]) == float(np.std(vals))


def test_monotone_information_heat_kkt():
    grid = [5, 10, 15, 20]
    rep = run_convergence(builtin_case("heat_det"), ["kkt"], grid, trials=5, validation=FAST)
    means = {a["n_sim"]: a["mean_eps_mean"] for a in rep.aggregate()}
    violations = sum(
        means[a] < means[b] for i, a in enumerate(grid) for b in grid[i + 1:]
    )
    assert violations <= 1


def test_failed_trials_are_recorded_not_fatal():
    # p = 1 cannot host the Euler beam's four boundary conditions
    case = builtin_case("euler_beam")
    case.config.fit.p_range = (1, 1)
    case.config.bench.p_range = None
    rep = run_convergence(case, ["kkt"], [0], trials=2, validation=FAST)
    agg = rep.aggregate()[0]
    assert agg["failed"] == 2 and agg["flagged"] == 1
    assert all("error" in r for r in rep.rows)


def test_reference_local_stats_formula():
    problem = builtin_case("heat_uq").problem
    pts = np.array([[0.5, 0.0], [0.3, 0.4]])
    mean, var = reference_local_stats(problem, problem.reference, pts)
    t = 0.4
    expect = np.sin(0.3 * np.pi) * (np.exp(-0.2 * np.pi**2 * t) - np.exp(-0.8 * np.pi**2 * t)) / (0.6 * np.pi**2 * t)
    assert mean[0] == pytest.approx(1.0) and var[0] == pytest.approx(0.0, abs=1e-15)
    assert mean[1] == pytest.approx(expect, rel=1e-12)


@pytest.fixture(scope="module")
def heat_uq():
    return run_heat_uq(grid=(21, 21))


def test_heat_uq_tables(heat_uq):
    model, rep, tables = heat_uq
    assert rep.n_sim == 0 and rep.n_bc == 90 and rep.p == 10
    header = tables.table(("mean", "variance")).splitlines()[0]
    assert header == "x,t,mean,variance"
    assert len(tables.points) == 21 * 21


def test_heat_uq_mean_field(heat_uq):
    _, _, tables = heat_uq
    assert np.max(tables.values["mean_abs_error"]) < 1e-2


def test_heat_uq_initial_variance_vanishes(heat_uq):
    _, _, tables = heat_uq
    t0 = tables.points[:, 1] == 0.0
    assert np.max(np.abs(tables.values["variance"][t0])) < 1e-12


def test_heat_uq_deterministic_slice(heat_uq):
    model = heat_uq[0]
    x, t = np.meshgrid(np.linspace(0, 1, 21), np.linspace(0, 1, 21))
    pts = np.column_stack([x.ravel(), t.ravel(), np.full(x.size, 0.4)])
    exact = np.sin(np.pi * pts[:, 0]) * np.exp(-0.4 * np.pi**2 * pts[:, 1])
    assert np.max(np.abs(model.evaluate(pts) - exact)) < 1e-2
