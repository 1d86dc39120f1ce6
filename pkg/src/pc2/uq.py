"""Analytic post-processing of fitted expansions.

Moments and Sobol indices follow from the coefficients because the basis is
orthonormal. When the model also depends on deterministic coordinates
(space, time) the statistics are local: the deterministic factors are
evaluated at the point of interest and folded into the coefficients of a
reduced expansion over the random variables alone.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .design import random_boundary_points, sample_mc
from .expression import Expression
from .model import Pc2Model
from .operators import ProblemSpec, function_residual, residual
from .polybasis import legendre_table


class UQError(ValueError):
    """Statistic requested for a model that cannot provide it."""


def _require_all_random(model: Pc2Model):
    det = [t.name for t in model.transforms if not t.is_random]
    if det:
        raise UQError(
            f"variables {det} are deterministic; global moments are undefined. "
            "Use local_stats at a fixed deterministic point instead"
        )


def global_mean(model: Pc2Model) -> float:
    _require_all_random(model)
    return _constant_term(model.basis.indices, model.coefficients)


def global_variance(model: Pc2Model) -> float:
    _require_all_random(model)
    idx = np.asarray(model.basis.indices)
    nonconst = idx.sum(axis=1) > 0
    return float(np.sum(model.coefficients[nonconst] ** 2))


def _constant_term(indices, coefficients) -> float:
    idx = np.asarray(indices)
    zero = idx.sum(axis=1) == 0
    return float(np.sum(np.asarray(coefficients)[zero]))


@dataclass
class ReducedPce:
    """Expansion over the random variables only, at one deterministic point."""

    random_vars: tuple            # positions of the random variables in the full model
    indices: np.ndarray           # (K, n_random) unique multi-indices, zero index first if present
    coefficients: np.ndarray      # (K,)

    @property
    def constant(self) -> float:
        return _constant_term(self.indices, self.coefficients) if len(self.coefficients) else 0.0

    @property
    def mean(self) -> float:
        return self.constant

    @property
    def variance(self) -> float:
        nonconst = self.indices.sum(axis=1) > 0
        return float(np.sum(self.coefficients[nonconst] ** 2))

    def evaluate(self, xi_random) -> np.ndarray:
        """Value at standardized random coordinates, shape (N, n_random)."""
        xi = np.atleast_2d(np.asarray(xi_random, dtype=float))
        if not self.random_vars:
            return np.full(xi.shape[0], self.constant)
        out = np.ones((xi.shape[0], len(self.coefficients)))
        for j in range(len(self.random_vars)):
            table = legendre_table(int(self.indices[:, j].max()), 0, xi[:, j])
            out *= table[:, self.indices[:, j]]
        return out @ self.coefficients


def _split(model: Pc2Model):
    idx = np.asarray(model.basis.indices)
    rmask = model.random_mask
    return idx, np.flatnonzero(rmask), np.flatnonzero(~rmask)


def _grouping(idx, rand):
    # unique random multi-indices and the group of every term
    keys = idx[:, rand] if rand.size else np.zeros((idx.shape[0], 0), dtype=int)
    uniq, inverse = np.unique(keys, axis=0, return_inverse=True)
    # np.unique sorts lexicographically, so the zero index (if present) comes first
    return uniq, np.asarray(inverse).reshape(-1)


def _det_factors(model: Pc2Model, det_points) -> np.ndarray:
    """Product of deterministic basis factors per term, shape (N, P)."""
    idx, rand, det = _split(model)
    pts = np.atleast_2d(np.asarray(det_points, dtype=float))
    if pts.shape[1] != det.size:
        raise ValueError(f"expected {det.size} deterministic coordinates, got {pts.shape[1]}")
    out = np.ones((pts.shape[0], idx.shape[0]))
    for col, var in enumerate(det):
        tr = model.transforms[var]
        xi = tr.to_standard(pts[:, col])
        table = legendre_table(int(idx[:, var].max()), 0, xi)
        out *= table[:, idx[:, var]]
    return out


def _as_det_point(model: Pc2Model, point) -> np.ndarray:
    _, _, det = _split(model)
    if isinstance(point, dict):
        missing = [model.names[i] for i in det if model.names[i] not in point]
        if missing:
            raise ValueError(f"point does not fix deterministic variables {missing}")
        return np.array([float(point[model.names[i]]) for i in det])
    return np.asarray(point, dtype=float).reshape(-1)


def reduced_coefficients(model: Pc2Model, det_points):
    """Reduced coefficients at many deterministic points: (unique indices, (N, K) array)."""
    idx, rand, _ = _split(model)
    uniq, group = _grouping(idx, rand)
    F = _det_factors(model, det_points) * model.coefficients
    G = np.zeros((idx.shape[0], uniq.shape[0]))
    G[np.arange(idx.shape[0]), group] = 1.0
    return uniq, F @ G


def reduce_at(model: Pc2Model, point) -> ReducedPce:
    """Reduced expansion at a deterministic point (physical coordinates).

    ``point`` is a mapping name -> value or a sequence ordered like the
    model's deterministic variables.
    """
    _, rand, _ = _split(model)
    uniq, coef = reduced_coefficients(model, _as_det_point(model, point)[None, :])
    return ReducedPce(tuple(int(r) for r in rand), uniq, coef[0])


def local_stats(model: Pc2Model, point) -> tuple[float, float]:
    red = reduce_at(model, point)
    return red.mean, red.variance


def local_fields(model: Pc2Model, det_points) -> tuple[np.ndarray, np.ndarray]:
    """Local mean and variance at each row of ``det_points``."""
    uniq, coef = reduced_coefficients(model, det_points)
    const = uniq.sum(axis=1) == 0
    mean = coef[:, const].sum(axis=1)
    var = np.sum(coef[:, ~const] ** 2, axis=1)
    return mean, var


def _random_expansion(obj, point=None):
    if isinstance(obj, ReducedPce):
        return obj.indices, obj.coefficients
    if point is not None:
        red = reduce_at(obj, point)
        return red.indices, red.coefficients
    _require_all_random(obj)
    return np.asarray(obj.basis.indices), obj.coefficients


def sobol_indices(obj, point=None) -> dict:
    """Variance share of every group of interacting random variables.

    Keys are tuples of variable positions (within the random expansion).
    The shares sum to one.
    """
    idx, coef = _random_expansion(obj, point)
    nonconst = idx.sum(axis=1) > 0
    var = float(np.sum(coef[nonconst] ** 2))
    if var <= 0.0:
        raise UQError("variance is zero; Sobol indices are undefined")
    out: dict = {}
    for a, b in zip(idx[nonconst], coef[nonconst]):
        key = tuple(int(i) for i in np.flatnonzero(a))
        out[key] = out.get(key, 0.0) + float(b * b / var)
    return dict(sorted(out.items(), key=lambda kv: (len(kv[0]), kv[0])))


def sobol_first_order(obj, i: int, point=None) -> float:
    """First-order index of random variable ``i`` (position within the random expansion)."""
    return sobol_indices(obj, point).get((int(i),), 0.0)


def sobol_total(obj, i: int, point=None) -> float:
    """Total index: one minus the share of terms that do not involve variable ``i``."""
    groups = sobol_indices(obj, point)
    return 1.0 - sum(v for k, v in groups.items() if int(i) not in k)


@dataclass
class ErrorBreakdown:
    eps_mean: float
    eps_max: float
    r2_u: float
    r2_L: float
    r2_B: float
    r2: float
    n_interior: int
    n_boundary: int
    flags: list = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "eps_mean": self.eps_mean,
            "eps_max": self.eps_max,
            "r2_u": self.r2_u,
            "r2_L": self.r2_L,
            "r2_B": self.r2_B,
            "r2": self.r2,
        }


def abs_error(model: Pc2Model, reference: Expression, x) -> np.ndarray:
    """Pointwise |u - u_hat| at physical points."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    env = {n: x[:, i] for i, n in enumerate(model.names)}
    return np.abs(reference.evaluate(env, (x.shape[0],)) - model.evaluate(x))


def error_breakdown(model: Pc2Model, problem: ProblemSpec, reference: Expression | None = None,
                    n_interior: int = 10_000, n_boundary: int = 100, seed=0,
                    outputs=None) -> ErrorBreakdown:
    """Solution, PDE and boundary errors of ``model`` on a random validation set.

    The solution error uses ``reference`` (or ``outputs``, a pair of physical
    inputs and responses). R2_u is normalized by the variance of the
    reference values when that variance exceeds 1e-12; eps_mean and eps_max
    are the raw mean and maximum squared errors.
    """
    if n_interior <= 0 or n_boundary <= 0:
        raise ValueError("validation sizes must be positive")
    reference = reference if reference is not None else problem.reference
    rng = np.random.default_rng(seed)
    xi = sample_mc(n_interior, problem.M, rng)
    flags = []
    if reference is not None:
        x = model.from_standard(xi)
        truth = reference.evaluate(problem.env(x), (n_interior,))
        pred = model.evaluate_standard(xi)
    elif outputs is not None:
        x, truth = outputs
        truth = np.asarray(truth, dtype=float).reshape(-1)
        pred = model.evaluate(np.asarray(x, dtype=float).reshape(truth.size, -1))
    else:
        truth = pred = None
        flags.append("no_reference")
    if truth is not None:
        sq = (truth - pred) ** 2
        eps_mean, eps_max = float(np.mean(sq)), float(np.max(sq))
        var = float(np.var(truth))
        r2_u = eps_mean / var if var > 1e-12 else eps_mean
    else:
        eps_mean = eps_max = r2_u = math.nan

    r2_L = float(np.mean(residual(problem.pde, model, xi) ** 2))
    bnd = random_boundary_points(problem.boundary_spec(n_boundary), problem.M, n_boundary, rng)
    res = [residual(bc.operator, model, bnd.for_condition(k)) for k, bc in enumerate(problem.bcs)
           if len(bnd.for_condition(k))]
    r2_B = float(np.mean(np.concatenate(res) ** 2)) if res else 0.0
    total = (0.0 if math.isnan(r2_u) else r2_u) + r2_L + r2_B
    return ErrorBreakdown(eps_mean, eps_max, r2_u, r2_L, r2_B, total, n_interior, len(bnd), flags)


def reference_residuals(problem: ProblemSpec, reference: Expression, n: int = 1000, seed=0):
    """Max |PDE residual| and max |BC residual| of an analytic reference at random points."""
    rng = np.random.default_rng(seed)
    xi = sample_mc(n, problem.M, rng)
    x = np.column_stack([v.from_standard(xi[:, i]) for i, v in enumerate(problem.variables)])
    pde = float(np.max(np.abs(function_residual(problem.pde, reference, problem.names, x))))
    bnd = random_boundary_points(problem.boundary_spec(n), problem.M, n, rng)
    worst = 0.0
    for k, bc in enumerate(problem.bcs):
        pts = bnd.for_condition(k)
        if len(pts):
            xb = np.column_stack([v.from_standard(pts[:, i]) for i, v in enumerate(problem.variables)])
            r = function_residual(bc.operator, reference, problem.names, xb)
            worst = max(worst, float(np.max(np.abs(r))))
    return pde, worst
