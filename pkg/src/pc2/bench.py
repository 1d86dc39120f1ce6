"""Built-in benchmark problems and the replicated convergence study."""
from __future__ import annotations

import csv
import io
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from .config import ProblemConfig, parse_config
from .design import sample
from .expression import Expression
from .model import Pc2Model
from .operators import ProblemSpec
from .solver import FitError, TrainingData, child_seed, fit, fit_kkt
from .uq import error_breakdown, local_fields, reference_residuals

CASE_IDS = ("poisson1d", "euler_beam", "logistic", "wave2d", "heat_det", "heat_uq")

PDE_GATE = 1e-8
BC_GATE = 1e-10

TRIAL_COLUMNS = (
    "case", "method", "p_selected", "n_sim", "n_BC", "n_V", "trial", "seed",
    "r2_u", "r2_L", "r2_B", "r2", "eps_mean", "eps_max", "fit_ms",
)
METRICS = ("p_selected", "n_V", "r2_u", "r2_L", "r2_B", "r2", "eps_mean", "eps_max", "fit_ms")

# stream identifier for experimental designs
_DESIGN = 5


@dataclass
class BenchmarkCase:
    id: str
    config: ProblemConfig

    @property
    def problem(self) -> ProblemSpec:
        return self.config.problem

    @property
    def reference(self) -> Expression:
        return self.config.problem.reference

    @property
    def p_range(self) -> list[int]:
        lo, hi = self.config.bench.p_range or self.config.fit.p_range
        return list(range(lo, hi + 1))

    @property
    def n_bc(self):
        return self.config.fit.n_bc

    @property
    def n_sim_grid(self) -> tuple:
        return self.config.bench.n_sim_grid or (self.config.fit.n_sim,)

    @property
    def methods(self) -> tuple:
        return self.config.bench.methods


def case_text(case_id: str) -> str:
    if case_id not in CASE_IDS:
        raise KeyError(f"unknown case {case_id!r}; expected one of {', '.join(CASE_IDS)}")
    return resources.files("pc2.cases").joinpath(f"{case_id}.yaml").read_text(encoding="utf-8")


def check_reference(problem: ProblemSpec, reference: Expression, n: int = 1000, seed=0):
    """Raise ValueError unless ``reference`` satisfies the PDE and BCs of ``problem``."""
    pde, bc = reference_residuals(problem, reference, n, seed)
    if not pde < PDE_GATE:
        raise ValueError(f"{problem.name}: reference PDE residual {pde:.3e} exceeds {PDE_GATE}")
    if not bc < BC_GATE:
        raise ValueError(f"{problem.name}: reference boundary residual {bc:.3e} exceeds {BC_GATE}")
    return pde, bc


def builtin_case(case_id: str) -> BenchmarkCase:
    cfg = parse_config(case_text(case_id), source=f"{case_id}.yaml")
    check_reference(cfg.problem, cfg.problem.reference)
    return BenchmarkCase(case_id, cfg)


def synthetic_data(problem: ProblemSpec, reference: Expression, n_sim: int, seed, sampler="lhs") -> TrainingData:
    """Experimental design of ``n_sim`` points with responses from ``reference``."""
    xi = sample(sampler, n_sim, problem.M, seed)
    if n_sim == 0:
        return TrainingData.empty(problem.M)
    x = np.column_stack([v.from_standard(xi[:, i]) for i, v in enumerate(problem.variables)])
    return TrainingData(xi, reference.evaluate(problem.env(x), (n_sim,)))


def trial_seed(base_seed, n_sim: int, trial: int) -> int:
    return child_seed(base_seed, n_sim, trial)


def run_trial(case: BenchmarkCase, method: str, n_sim: int, trial: int, base_seed=0,
              validation=(10_000, 100), timing=False) -> dict:
    """One fit plus its validation metrics, as a CSV row."""
    seed = trial_seed(base_seed, n_sim, trial)
    cfg = case.config
    problem = case.problem
    data = synthetic_data(problem, case.reference, n_sim, child_seed(seed, _DESIGN), cfg.fit.design)
    row = {"case": case.id, "method": method, "n_sim": n_sim, "trial": trial, "seed": seed}
    t0 = time.perf_counter()
    try:
        model, rep = fit(problem, data, method, case.p_range, case.n_bc, seed, cfg.fit.sampler,
                         cfg.fit.n_iter, cfg.fit.tol)
    except (FitError, ValueError) as exc:
        row.update({k: math.nan for k in METRICS})
        row["n_BC"] = math.nan
        row["error"] = str(exc)
        return row
    elapsed = (time.perf_counter() - t0) * 1e3
    err = error_breakdown(model, problem, case.reference, *validation, seed=child_seed(seed, 7))
    row.update({
        "p_selected": rep.p,
        "n_BC": rep.n_bc if method != "lar" else _n_bc(case),
        "n_V": rep.n_v,
        "r2_u": err.r2_u,
        "r2_L": err.r2_L,
        "r2_B": err.r2_B,
        "r2": err.r2,
        "eps_mean": err.eps_mean,
        "eps_max": err.eps_max,
        "fit_ms": round(elapsed, 3) if timing else "",
    })
    return row


def _n_bc(case: BenchmarkCase) -> int:
    return case.n_bc if case.n_bc is not None else len(case.problem.bcs)


@dataclass
class ConvergenceReport:
    case: str
    rows: list
    trials: int
    flags: dict = field(default_factory=dict)

    def aggregate(self) -> list[dict]:
        """Mean and (population) standard deviation per (method, n_sim) cell."""
        cells: dict = {}
        for r in self.rows:
            cells.setdefault((r["method"], r["n_sim"]), []).append(r)
        out = []
        for (method, n_sim), rows in cells.items():
            ok = [r for r in rows if "error" not in r]
            agg = {"case": self.case, "method": method, "n_sim": n_sim, "trials": len(rows),
                   "failed": len(rows) - len(ok),
                   "flagged": int(len(rows) - len(ok) > 0.1 * len(rows))}
            for m in METRICS:
                vals = np.array([_num(r[m]) for r in ok], dtype=float)
                vals = vals[~np.isnan(vals)]
                agg[f"mean_{m}"] = float(np.mean(vals)) if vals.size else math.nan
                agg[f"sd_{m}"] = float(np.std(vals)) if vals.size else math.nan
            out.append(agg)
        return out

    def trials_csv(self) -> str:
        return _to_csv(self.rows, TRIAL_COLUMNS)

    def aggregate_csv(self) -> str:
        rows = self.aggregate()
        cols = ["case", "method", "n_sim", "trials", "failed", "flagged"]
        cols += [f"{s}_{m}" for m in METRICS for s in ("mean", "sd")]
        return _to_csv(rows, cols)


def _num(v) -> float:
    return math.nan if v == "" or v is None else float(v)


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v) if math.isfinite(v) else ("nan" if math.isnan(v) else str(v))
    return str(v)


def _to_csv(rows, columns) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_fmt(r.get(c, "")) for c in columns])
    return buf.getvalue()


def _trial_job(args):
    case_id, cfg, method, n_sim, trial, base_seed, validation, timing = args
    return run_trial(BenchmarkCase(case_id, cfg), method, n_sim, trial, base_seed, validation, timing)


def run_convergence(case: BenchmarkCase, methods=None, n_sim_grid=None, trials: int = 20, base_seed=0,
                    validation=(10_000, 100), jobs: int = 1, timing: bool = False) -> ConvergenceReport:
    """Replicated fits over an n_sim grid; deterministic for a given ``base_seed``.

    The experimental design of trial ``k`` at size ``n`` is shared by all
    methods. A failed fit is recorded as a row of NaNs; a cell with more than
    10% failures is flagged in the aggregate.
    """
    if trials < 1:
        raise ValueError("trials must be at least 1")
    methods = tuple(methods or case.methods)
    grid = tuple(n_sim_grid or case.n_sim_grid)
    jobs_list = [
        (case.id, case.config, m, n, k, base_seed, validation, timing)
        for m in methods for n in grid for k in range(trials)
    ]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_trial_job, jobs_list))
    else:
        rows = [_trial_job(j) for j in jobs_list]
    rep = ConvergenceReport(case.id, rows, trials)
    for agg in rep.aggregate():
        if agg["flagged"]:
            rep.flags[(agg["method"], agg["n_sim"])] = agg["failed"]
    return rep


# ---------------------------------------------------------------------------
# uncertainty quantification of the heat equation


def reference_local_stats(problem: ProblemSpec, reference: Expression, det_points, n_quad: int = 48):
    """Local mean and variance of an analytic reference by Gauss-Legendre quadrature over the random variables."""
    det = problem.deterministic_indices
    rand = problem.random_indices
    pts = np.atleast_2d(np.asarray(det_points, dtype=float))
    nodes, weights = np.polynomial.legendre.leggauss(n_quad)
    weights = weights / 2.0
    grids = np.meshgrid(*([nodes] * len(rand)), indexing="ij")
    xi_r = np.column_stack([g.ravel() for g in grids])
    w = np.ones(xi_r.shape[0])
    for g in np.meshgrid(*([weights] * len(rand)), indexing="ij"):
        w *= g.ravel()
    Q = xi_r.shape[0]
    full = np.zeros((pts.shape[0] * Q, problem.M))
    for c, i in enumerate(det):
        full[:, i] = np.repeat(pts[:, c], Q)
    for c, i in enumerate(rand):
        full[:, i] = np.tile(problem.variables[i].from_standard(xi_r[:, c]), pts.shape[0])
    u = reference.evaluate(problem.env(full), (full.shape[0],)).reshape(pts.shape[0], Q)
    mean = u @ w
    var = np.maximum((u - mean[:, None]) ** 2 @ w, 0.0)
    return mean, var


def mc_local_stats(problem: ProblemSpec, reference: Expression, det_points, n: int = 100_000, seed=0):
    """Local mean, variance and their standard errors from an LHS sample of the random variables."""
    det = problem.deterministic_indices
    rand = problem.random_indices
    pts = np.atleast_2d(np.asarray(det_points, dtype=float))
    xi = sample("lhs", n, len(rand), seed)
    out = []
    for p in pts:
        full = np.zeros((n, problem.M))
        for c, i in enumerate(det):
            full[:, i] = p[c]
        for c, i in enumerate(rand):
            full[:, i] = problem.variables[i].from_standard(xi[:, c])
        u = reference.evaluate(problem.env(full), (n,))
        m, v = float(np.mean(u)), float(np.var(u, ddof=1))
        m4 = float(np.mean((u - m) ** 4))
        out.append((m, v, math.sqrt(v / n), math.sqrt(max(m4 - v * v, 0.0) / n)))
    return np.array(out)


@dataclass
class FieldTables:
    """Fields on a tensor grid of the deterministic variables, one column per quantity."""

    names: tuple                      # deterministic variable names
    points: np.ndarray                # (N, n_det)
    values: dict                      # field name -> (N,) array

    def table(self, fields_: tuple) -> str:
        cols = list(self.names) + list(fields_)
        rows = [
            {**{n: float(self.points[i, j]) for j, n in enumerate(self.names)},
             **{f: float(self.values[f][i]) for f in fields_}}
            for i in range(self.points.shape[0])
        ]
        return _to_csv(rows, cols)


def det_grid(problem: ProblemSpec, sizes) -> np.ndarray:
    det = problem.deterministic_indices
    if len(sizes) != len(det):
        raise ValueError(f"need one grid size per deterministic variable ({len(det)})")
    axes = [np.linspace(problem.variables[i].lower, problem.variables[i].upper, n) for i, n in zip(det, sizes)]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.column_stack([m.ravel() for m in mesh])


def uq_fields(model: Pc2Model, problem: ProblemSpec, sizes, reference: Expression | None = None) -> FieldTables:
    pts = det_grid(problem, sizes)
    mean, var = local_fields(model, pts)
    sd = np.sqrt(var)
    values = {"mean": mean, "mean_minus_sigma": mean - sd, "mean_plus_sigma": mean + sd, "variance": var}
    if reference is not None:
        rm, rv = reference_local_stats(problem, reference, pts)
        values.update({
            "ref_mean": rm,
            "ref_variance": rv,
            "mean_abs_error": np.abs(mean - rm),
            "variance_abs_error": np.abs(var - rv),
        })
    names = tuple(problem.names[i] for i in problem.deterministic_indices)
    return FieldTables(names, pts, values)


def run_heat_uq(n_bc: int = 90, p: int = 10, seed=0, grid=(101, 101), sampler="mc"):
    """Physics-only fit of the uncertain heat equation and its local statistics.

    Returns (model, report, FieldTables).
    """
    case = builtin_case("heat_uq")
    problem = case.problem
    model, rep = fit_kkt(problem, TrainingData.empty(problem.M), p, n_bc, seed, sampler)
    return model, rep, uq_fields(model, problem, grid, case.reference)
