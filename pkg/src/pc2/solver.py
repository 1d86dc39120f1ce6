"""Coefficient estimation: OLS, constrained KKT, LAR-KKT and the iterative nonlinear solver.

The constrained problem is

    min ||Y - Psi beta||^2   subject to   A beta = c

where the rows of ``A`` are boundary-condition rows followed by PDE rows at
virtual points. Its stationarity conditions form the symmetric indefinite
system ``[[Psi^T Psi, A^T], [A, 0]] [beta; lambda] = [Psi^T Y; c]``, solved by
a dense pivoted LU factorization.
"""
from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from .design import (
    BoundaryPoints,
    OverConstrainedError,
    boundary_points,
    random_boundary_points,
    sample,
    virtual_point_count,
)
from .model import Pc2Model
from .operators import OperatorMatrices, ProblemSpec
from .polybasis import BasisSet, eval_basis, multi_index_set

log = logging.getLogger(__name__)

# the KKT form squares the conditioning of A; accuracy is checked through the
# constraint violation, so only numerically exact singularity is rejected here
RCOND_MIN = 1e-30
CONSTRAINT_TOL = 1e-8


class FitError(RuntimeError):
    """A fit could not produce a model."""


class SingularKKTError(FitError):
    def __init__(self, message: str, rcond: float = float("nan")):
        self.rcond = rcond
        super().__init__(f"{message} (reciprocal condition estimate {rcond:.3e})")


class DivergenceError(FitError):
    pass


def child_seed(seed, *keys) -> int:
    """Independent integer seed derived from ``seed`` and a tuple of integer keys."""
    base = 0 if seed is None else int(seed)
    return int(np.random.SeedSequence([base, *[int(k) for k in keys]]).generate_state(1)[0])


# stream identifiers for child_seed
_VIRTUAL, _BOUNDARY, _SCORE, _RETRY = 1, 2, 3, 4


@dataclass
class TrainingData:
    """Experimental design in standardized coordinates with model responses."""

    inputs: np.ndarray
    outputs: np.ndarray

    def __post_init__(self):
        self.outputs = np.asarray(self.outputs, dtype=float).reshape(-1)
        inputs = np.asarray(self.inputs, dtype=float)
        self.inputs = inputs if inputs.ndim == 2 else inputs.reshape(self.outputs.size, -1)
        if self.inputs.shape[0] != self.outputs.size:
            raise ValueError("inputs and outputs disagree in length")

    @classmethod
    def empty(cls, M: int) -> "TrainingData":
        return cls(np.empty((0, M)), np.empty(0))

    @classmethod
    def from_physical(cls, transforms, x, y) -> "TrainingData":
        from .polybasis import to_standard

        x = np.asarray(x, dtype=float).reshape(len(np.atleast_1d(y)), -1)
        return cls(to_standard(transforms, x) if len(x) else x, y)

    def __len__(self):
        return self.outputs.size

    def append(self, inputs, outputs) -> "TrainingData":
        return TrainingData(np.vstack([self.inputs, inputs]), np.concatenate([self.outputs, outputs]))


@dataclass
class ConstraintSet:
    A: np.ndarray
    c: np.ndarray
    kinds: np.ndarray  # "boundary" or "virtual" per row

    def __len__(self):
        return self.c.size

    @property
    def n_bc(self) -> int:
        return int(np.sum(self.kinds == "boundary"))

    @property
    def n_v(self) -> int:
        return int(np.sum(self.kinds == "virtual"))

    def violation(self, beta) -> float:
        if not len(self):
            return 0.0
        return float(np.max(np.abs(self.A @ beta - self.c)))


@dataclass
class FitReport:
    r2_u: float = 0.0
    r2_L: float = 0.0
    r2_B: float = 0.0
    r2: float = 0.0
    method: str = "kkt"
    p: int | None = None
    selected: list = field(default_factory=list)
    n_sim: int = 0
    n_bc: int = 0
    n_v: int = 0
    iterations: int = 0
    converged: bool = True
    last_update: float = 0.0
    constraint_violation: float = 0.0
    rcond: float = float("nan")
    flags: list = field(default_factory=list)

    def set_scores(self, r2_u, r2_L, r2_B):
        self.r2_u, self.r2_L, self.r2_B = float(r2_u), float(r2_L), float(r2_B)
        self.r2 = self.r2_u + self.r2_L + self.r2_B

    def as_dict(self) -> dict:
        return {
            "method": self.method,
            "p": self.p,
            "basis_size": len(self.selected),
            "n_sim": self.n_sim,
            "n_BC": self.n_bc,
            "n_V": self.n_v,
            "r2_u": self.r2_u,
            "r2_L": self.r2_L,
            "r2_B": self.r2_B,
            "r2": self.r2,
            "iterations": self.iterations,
            "converged": self.converged,
            "last_update": self.last_update,
            "constraint_violation": self.constraint_violation,
            "rcond": self.rcond,
            "flags": list(self.flags),
        }


# ---------------------------------------------------------------------------
# plain regression


def fit_ols(data: TrainingData, basis: BasisSet, transforms) -> Pc2Model:
    """Least squares fit by column-pivoted QR; minimum-norm on rank deficiency."""
    if len(data) == 0:
        raise FitError("OLS needs at least one training point")
    Psi = eval_basis(basis, data.inputs)
    beta, _, rank, _ = linalg.lstsq(Psi, data.outputs, lapack_driver="gelsy")
    if rank < basis.P:
        # gelsy is not minimum-norm in the rank-deficient case
        beta = linalg.lstsq(Psi, data.outputs, lapack_driver="gelsd")[0]
    meta = {"method": "ols", "rank": int(rank), "rank_deficient": bool(rank < basis.P)}
    return Pc2Model(basis, beta, transforms, meta)


def assemble_kkt(data: TrainingData, constraints: ConstraintSet, basis: BasisSet):
    """KKT matrix [[Psi^T Psi, A^T], [A, 0]] and right-hand side [Psi^T Y, c]."""
    P = basis.P
    A = np.atleast_2d(constraints.A)
    if len(constraints) and A.shape[1] != P:
        raise ValueError(f"constraint matrix has {A.shape[1]} columns, basis has {P}")
    if len(constraints) > P:
        raise OverConstrainedError(f"{len(constraints)} constraints exceed the basis size {P}")
    n_c = len(constraints)
    K = np.zeros((P + n_c, P + n_c))
    rhs = np.zeros(P + n_c)
    if len(data):
        Psi = eval_basis(basis, data.inputs)
        K[:P, :P] = Psi.T @ Psi
        rhs[:P] = Psi.T @ data.outputs
    if n_c:
        K[P:, :P] = A
        K[:P, P:] = A.T
        rhs[P:] = constraints.c
    return K, rhs


def _equilibrate(K, iterations: int = 8) -> np.ndarray:
    """Symmetric Ruiz scaling vector d such that diag(d) K diag(d) has rows of unit max-norm."""
    d = np.ones(K.shape[0])
    Ks = K.copy()
    for _ in range(iterations):
        r = np.max(np.abs(Ks), axis=1)
        r[r == 0] = 1.0
        s = 1.0 / np.sqrt(r)
        Ks *= s[:, None]
        Ks *= s[None, :]
        d *= s
    return d


def _lu_solve_checked(K, rhs, refine: int = 2):
    lu, piv = linalg.lu_factor(K, check_finite=False)
    anorm = np.linalg.norm(K, 1)
    rcond, info = linalg.lapack.dgecon(lu, anorm, norm="1")
    if not np.isfinite(rcond) or rcond < RCOND_MIN or np.any(np.diag(lu) == 0):
        raise SingularKKTError("KKT matrix is singular", float(rcond))
    x = linalg.lu_solve((lu, piv), rhs, check_finite=False)
    for _ in range(refine):
        x = x + linalg.lu_solve((lu, piv), rhs - K @ x, check_finite=False)
    # dgecon's last bits vary with workspace state; keep reports reproducible
    return x, float(f"{rcond:.6e}")


def solve_kkt(data: TrainingData, constraints: ConstraintSet, basis: BasisSet, transforms):
    """Constrained least squares fit; returns (model, report).

    Raises SingularKKTError when the KKT matrix is singular or the solution
    misses the constraints by more than 1e-8 relative to ``max|c| + 1``.
    """
    K, rhs = assemble_kkt(data, constraints, basis)
    P = basis.P
    if len(constraints) == 0:
        model = fit_ols(data, basis, transforms)
        rep = FitReport(method="ols", p=basis.p, selected=list(range(P)), n_sim=len(data))
        return model, rep
    # solve diag(d) K diag(d) y = diag(d) rhs, then x = diag(d) y
    d = _equilibrate(K)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", linalg.LinAlgWarning)
        sol, rcond = _lu_solve_checked(K * d[:, None] * d[None, :], rhs * d)
    beta = (sol * d)[:P]
    viol = constraints.violation(beta)
    if not np.all(np.isfinite(beta)) or viol > CONSTRAINT_TOL * (np.max(np.abs(constraints.c)) + 1.0):
        raise SingularKKTError(f"KKT solution violates the constraints by {viol:.3e}", rcond)
    rep = FitReport(
        method="kkt",
        p=basis.p,
        selected=list(range(P)),
        n_sim=len(data),
        n_bc=constraints.n_bc,
        n_v=constraints.n_v,
        constraint_violation=viol,
        rcond=rcond,
    )
    model = Pc2Model(basis, beta, transforms, {"method": "kkt"})
    return model, rep


# ---------------------------------------------------------------------------
# LAR ranking


def lar_rank(data: TrainingData, basis: BasisSet):
    """Order in which basis terms enter a least angle regression path.

    Returns (order, fallback). The intercept (term 0) is always first; terms
    never activated by LAR follow in basis order. Without usable data the
    basis order itself is returned and ``fallback`` is True.
    """
    from sklearn.linear_model import lars_path

    P = basis.P
    n = len(data)
    if n < 2 or P == 1:
        return list(range(P)), True
    Psi = eval_basis(basis, data.inputs)[:, 1:]
    X = Psi - Psi.mean(axis=0)
    norms = np.linalg.norm(X, axis=0)
    usable = norms > 1e-12 * max(1.0, float(norms.max()))
    y = data.outputs - data.outputs.mean()
    order = [0]
    if usable.any() and np.linalg.norm(y) > 0:
        cols = np.flatnonzero(usable)
        Xs = X[:, cols] / norms[cols]
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            _, active, _ = lars_path(Xs, y, method="lar", max_iter=min(n, cols.size))
        order += [int(cols[a]) + 1 for a in active]
    seen = set(order)
    order += [j for j in range(P) if j not in seen]
    return order, False


# ---------------------------------------------------------------------------
# collocation machinery shared by the fitters


@dataclass
class ScoreSet:
    """Points at which PDE and boundary residuals are averaged for model selection."""

    interior: np.ndarray
    boundary: BoundaryPoints

    @classmethod
    def draw(cls, problem: ProblemSpec, n_interior: int = 1000, n_boundary: int = 100, seed=0):
        rng = np.random.default_rng(seed)
        interior = sample("mc", n_interior, problem.M, rng)
        bnd = random_boundary_points(problem.boundary_spec(n_boundary), problem.M, n_boundary, rng)
        return cls(interior, bnd)


class Collocation:
    """Constraint and score matrices for one full basis.

    Holds operator matrices at boundary points, at a pool of virtual points and
    at the score points, so any LAR prefix of the basis is a column selection.
    """

    def __init__(self, problem: ProblemSpec, basis: BasisSet, bnd: BoundaryPoints,
                 virtual: np.ndarray, score: ScoreSet | None = None):
        self.problem = problem
        self.basis = basis
        self.bnd = bnd
        tr = problem.variables
        self.bc_mats = [
            OperatorMatrices(bc.operator, basis, tr, bnd.for_condition(k)) for k, bc in enumerate(problem.bcs)
        ]
        self.v_mats = OperatorMatrices(problem.pde, basis, tr, virtual)
        self.score = score
        if score is not None:
            self.s_pde = OperatorMatrices(problem.pde, basis, tr, score.interior)
            self.s_bc = [
                OperatorMatrices(bc.operator, basis, tr, score.boundary.for_condition(k))
                for k, bc in enumerate(problem.bcs)
            ]

    @property
    def n_bc(self) -> int:
        return len(self.bnd)

    def constraints(self, columns=None, n_v=None, u_prev=None, include_pde=True) -> ConstraintSet:
        lin = self.problem.linearization
        blocks, rhs, kinds = [], [], []
        for m in self.bc_mats:
            if len(m):
                A, c = m.rows(columns, u_prev, lin)
                blocks.append(A)
                rhs.append(c)
                kinds += ["boundary"] * len(c)
        if include_pde:
            A, c = self.v_mats.rows(columns, u_prev, lin)
            if n_v is not None:
                A, c = A[:n_v], c[:n_v]
            blocks.append(A)
            rhs.append(c)
            kinds += ["virtual"] * len(c)
        width = self.basis.P if columns is None else len(columns)
        A = np.vstack(blocks) if blocks else np.empty((0, width))
        c = np.concatenate(rhs) if rhs else np.empty(0)
        return ConstraintSet(A, c, np.array(kinds, dtype=object))

    def score_model(self, model: Pc2Model, beta, columns, data: TrainingData):
        """(R2_u, R2_L, R2_B) of a candidate restricted to ``columns``."""
        lin = self.problem.linearization
        if len(data):
            pred = model.evaluate_standard(data.inputs)
            r2_u = float(np.mean((data.outputs - pred) ** 2))
            var = float(np.var(data.outputs))
            if var > 1e-12:
                r2_u /= var
        else:
            r2_u = 0.0
        A, c = self.s_pde.rows(columns, model, lin)
        r2_L = float(np.mean((A @ beta - c) ** 2)) if len(c) else 0.0
        res = []
        for m in self.s_bc:
            if len(m):
                A, c = m.rows(columns, model, lin)
                res.append(A @ beta - c)
        r2_B = float(np.mean(np.concatenate(res) ** 2)) if res else 0.0
        return r2_u, r2_L, r2_B


def _prepare_boundary(problem: ProblemSpec, n_bc: int | None, seed) -> BoundaryPoints:
    if n_bc is None:
        n_bc = len(problem.bcs)
    return boundary_points(
        problem.boundary_spec(n_bc),
        problem.random_indices,
        problem.M,
        child_seed(seed, _BOUNDARY),
        same_operator=problem.same_bc_operator,
    )


def _sub_model(basis: BasisSet, columns, beta, transforms, meta=None) -> Pc2Model:
    return Pc2Model(basis.subset(columns), beta, transforms, dict(meta or {}))


def _solve_candidate(coll: Collocation, data: TrainingData, columns, n_v, n_iter, tol):
    """KKT (or iterative KKT for nonlinear operators) on a column subset."""
    problem = coll.problem
    sub = coll.basis.subset(columns)
    tr = problem.variables
    sub_data = data
    if not problem.pde.nonlinear:
        cs = coll.constraints(columns, n_v)
        model, rep = solve_kkt(sub_data, cs, sub, tr)
        rep.iterations = 1
        return model, rep
    return _iterate_nonlinear(coll, data, columns, sub, n_v, n_iter, tol)


def _iterate_nonlinear(coll, data, columns, sub, n_v, n_iter, tol):
    tr = coll.problem.variables
    flags = []
    cs_bc = coll.constraints(columns, include_pde=False)
    try:
        model, _ = solve_kkt(data, cs_bc, sub, tr)
    except (SingularKKTError, OverConstrainedError):
        # no data to pin the free directions: minimum-norm start satisfying the BCs
        beta0 = linalg.lstsq(cs_bc.A, cs_bc.c, lapack_driver="gelsd")[0] if len(cs_bc) else np.zeros(sub.P)
        model = Pc2Model(sub, beta0, tr, {})
        flags.append("min_norm_start")
    check = tol is not None and math.isfinite(tol)
    norms = [float(np.max(np.abs(model.coefficients)))]
    converged, delta, rep = False, float("inf"), None
    it = 0
    for it in range(1, n_iter + 1):
        cs = coll.constraints(columns, n_v, u_prev=model)
        new, rep = solve_kkt(data, cs, sub, tr)
        delta = float(np.max(np.abs(new.coefficients - model.coefficients)))
        model = new
        norms.append(float(np.max(np.abs(model.coefficients))))
        if len(norms) > 3 and norms[-1] > 1e3 * max(norms[-4], 1e-300):
            raise DivergenceError(f"coefficients grew by more than 1e3 over 3 iterations (iteration {it})")
        if check and delta < tol:
            converged = True
            break
    rep.iterations = it
    rep.converged = converged
    rep.last_update = delta
    rep.flags += flags
    return model, rep


def _virtual_pool(problem, n, p, seed, sampler, attempt=0):
    return sample(sampler, n, problem.M, child_seed(seed, _VIRTUAL, p, attempt))


def _fit_fixed_p(problem, data, p, n_bc, seed, sampler, score, columns_fn, n_iter, tol, method, patience):
    """All candidates for one polynomial degree; returns (model, report) of the best."""
    basis = multi_index_set(problem.M, p)
    bnd = _prepare_boundary(problem, n_bc, seed)
    nb = len(bnd)
    n_v_max = virtual_point_count(basis.P, nb)
    errors = []
    for attempt in range(2):
        vpool = _virtual_pool(problem, n_v_max, p, seed if attempt == 0 else child_seed(seed, _RETRY), sampler)
        coll = Collocation(problem, basis, bnd, vpool, score)
        best, best_score, stale = None, math.inf, 0
        candidates = columns_fn(basis, nb)
        for k, cols in enumerate(candidates):
            is_full = len(cols) == basis.P
            if stale >= patience and not is_full:
                continue
            n_v = max(1, len(cols) - nb)
            try:
                model, rep = _solve_candidate(coll, data, cols, n_v, n_iter, tol)
            except (SingularKKTError, OverConstrainedError, DivergenceError) as exc:
                errors.append(f"p={p}, {len(cols)} terms: {exc}")
                stale += 1
                continue
            scores = coll.score_model(model, model.coefficients, cols, data)
            rep.set_scores(*scores)
            rep.method, rep.p, rep.selected = method, p, [int(c) for c in cols]
            if rep.r2 < best_score:
                best, best_score, stale = (model, rep), rep.r2, 0
            else:
                stale += 1
        if best is not None:
            if attempt:
                best[1].flags.append("virtual_resampled")
            return best, errors
        log.info("p=%d: singular KKT system, resampling virtual points", p)
    return None, errors


def _fit_over_p(problem, data, p_values, n_bc, seed, sampler, columns_fn, method, n_iter, tol,
                patience, score_sizes):
    score = ScoreSet.draw(problem, *score_sizes, seed=child_seed(seed, _SCORE))
    best, best_r2, stale = None, math.inf, 0
    failures = []
    for p in p_values:
        if stale >= patience:
            break
        try:
            found, errors = _fit_fixed_p(
                problem, data, p, n_bc, seed, sampler, score, columns_fn, n_iter, tol, method, patience
            )
        except OverConstrainedError as exc:
            failures.append(f"p={p}: {exc}")
            continue
        failures += errors
        if found is None:
            stale += 1
            continue
        if found[1].r2 < best_r2:
            best, best_r2, stale = found, found[1].r2, 0
        else:
            stale += 1
    if best is None:
        detail = "; ".join(failures[:10]) or "no candidate"
        raise FitError(f"no solvable candidate for p in {list(p_values)}: {detail}")
    model, rep = best
    model.metadata.update({"method": method, "p": rep.p})
    return model, rep


def _as_range(p_range):
    if isinstance(p_range, int):
        return [p_range]
    vals = list(p_range)
    if not vals:
        raise ValueError("p_range must not be empty")
    return vals


def fit_kkt(problem: ProblemSpec, data: TrainingData, p_range, n_bc=None, seed=0, sampler="mc",
            n_iter=20, tol=1e-10, patience=3, score_sizes=(1000, 100)):
    """Full-basis KKT fit with virtual points, adaptive over ``p_range``.

    Nonlinear operators are handled by the iterative scheme. Returns
    (model, report) for the degree with the smallest total score R2.
    """
    return _fit_over_p(
        problem, data, _as_range(p_range), n_bc, seed, sampler,
        lambda basis, nb: [list(range(basis.P))], "kkt", n_iter, tol, patience, score_sizes,
    )


def fit_lar_kkt(problem: ProblemSpec, data: TrainingData, p_range, n_bc=None, seed=0, sampler="mc",
                n_iter=20, tol=1e-10, patience=3, score_sizes=(1000, 100)):
    """Sparse fit: LAR ordering of the basis, KKT solve for every prefix, best R2 wins.

    For each degree the prefixes grow from n_BC + 1 terms; the sweep stops after
    ``patience`` consecutive non-improving prefixes, but the full basis is
    always evaluated. Virtual points are drawn once per degree and shared by
    all prefixes. Ties keep the smaller degree, then the shorter prefix.
    """
    def prefixes(basis, nb):
        order, _ = lar_rank(data, basis)
        start = min(nb + 1, basis.P)
        # sorted columns keep sub-bases in canonical order; the full prefix equals the KKT basis
        return [sorted(order[:i]) for i in range(start, basis.P + 1)]

    return _fit_over_p(
        problem, data, _as_range(p_range), n_bc, seed, sampler, prefixes, "lar-kkt",
        n_iter, tol, patience, score_sizes,
    )


def fit_nonlinear(problem: ProblemSpec, data: TrainingData, p: int, n_bc=None, seed=0, sampler="lhs",
                  n_iter=20, tol=1e-10, score_sizes=(1000, 100)):
    """Iterative KKT at a single degree.

    Starts from the boundary-only KKT fit, then re-linearizes the PDE rows
    around the current iterate at a fixed set of virtual points until the
    coefficient update drops below ``tol`` (sup norm) or ``n_iter`` iterations
    have run. A non-finite ``tol`` disables the convergence test. Linear
    operators finish after one iteration.
    """
    if n_iter < 1:
        raise ValueError("n_iter must be at least 1")
    basis = multi_index_set(problem.M, p)
    bnd = _prepare_boundary(problem, n_bc, seed)
    n_v = virtual_point_count(basis.P, len(bnd))
    vpool = _virtual_pool(problem, n_v, p, seed, sampler)
    score = ScoreSet.draw(problem, *score_sizes, seed=child_seed(seed, _SCORE))
    coll = Collocation(problem, basis, bnd, vpool, score)
    cols = list(range(basis.P))
    model, rep = _solve_candidate(coll, data, cols, n_v, n_iter, tol)
    rep.set_scores(*coll.score_model(model, model.coefficients, cols, data))
    rep.method, rep.p, rep.selected = "kkt", p, cols
    model.metadata.update({"method": "kkt", "p": p})
    return model, rep


# ---------------------------------------------------------------------------
# unconstrained baseline


def dirichlet_data(problem: ProblemSpec, n_bc=None, seed=0) -> TrainingData:
    """Boundary points of pure Dirichlet conditions as extra training data."""
    bnd = _prepare_boundary(problem, n_bc, seed)
    xs, ys = [], []
    for k, bc in enumerate(problem.bcs):
        op = bc.operator
        if len(op.terms) != 1 or op.terms[0].orders or not op.terms[0].coeff.is_constant:
            continue
        pts = bnd.for_condition(k)
        if not len(pts):
            continue
        x = np.column_stack([v.from_standard(pts[:, i]) for i, v in enumerate(problem.variables)])
        env = problem.env(x)
        coeff = float(op.terms[0].coeff.evaluate({}))
        xs.append(pts)
        ys.append(op.rhs.evaluate(env, (len(pts),)) / coeff)
    if not xs:
        return TrainingData.empty(problem.M)
    return TrainingData(np.vstack(xs), np.concatenate(ys))


def loo_error(Psi: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, float]:
    """OLS coefficients and the leave-one-out mean squared error (hat-matrix form)."""
    Q, R = np.linalg.qr(Psi)
    if np.min(np.abs(np.diag(R))) < 1e-12 * np.max(np.abs(np.diag(R))):
        return None, math.inf
    beta = linalg.solve_triangular(R, Q.T @ y)
    h = np.sum(Q**2, axis=1)
    if np.any(h > 1 - 1e-10):
        return beta, math.inf
    r = (y - Psi @ beta) / (1.0 - h)
    return beta, float(np.mean(r**2))


def fit_lar(problem: ProblemSpec, data: TrainingData, p_range, n_bc=None, seed=0, patience=3,
            score_sizes=(1000, 100)):
    """Unconstrained sparse PCE: LAR ordering plus OLS, selected by leave-one-out error.

    Dirichlet boundary points join the experimental design; no other physics
    enters the fit. The report still carries R2 components for comparison.
    """
    train = data.append(*_unpack(dirichlet_data(problem, n_bc, seed)))
    if len(train) < 2:
        raise FitError("the unconstrained baseline needs at least two training points")
    score = ScoreSet.draw(problem, *score_sizes, seed=child_seed(seed, _SCORE))
    var = float(np.var(train.outputs))
    best, best_err, stale_p = None, math.inf, 0
    for p in _as_range(p_range):
        if stale_p >= patience:
            break
        basis = multi_index_set(problem.M, p)
        order, _ = lar_rank(train, basis)
        Psi_full = eval_basis(basis, train.inputs)
        improved_p, stale = False, 0
        for i in range(1, min(basis.P, len(train) - 1) + 1):
            if stale >= patience:
                break
            cols = order[:i]
            beta, err = loo_error(Psi_full[:, cols], train.outputs)
            if beta is None or not math.isfinite(err):
                stale += 1
                continue
            err = err / var if var > 1e-12 else err
            if err < best_err:
                best, best_err, stale, improved_p = (p, list(cols), beta, basis), err, 0, True
            else:
                stale += 1
        stale_p = 0 if improved_p else stale_p + 1
    if best is None:
        raise FitError("no usable LAR candidate")
    p, cols, beta, basis = best
    model = _sub_model(basis, cols, beta, problem.variables, {"method": "lar", "p": p, "loo": best_err})
    coll = Collocation(problem, basis, _prepare_boundary(problem, n_bc, seed), np.empty((0, problem.M)), score)
    rep = FitReport(method="lar", p=p, selected=[int(c) for c in cols], n_sim=len(data))
    rep.set_scores(*coll.score_model(model, beta, cols, data))
    return model, rep


def _unpack(d: TrainingData):
    return d.inputs, d.outputs


METHODS = ("kkt", "lar-kkt", "lar")


def fit(problem: ProblemSpec, data: TrainingData, method: str, p_range, n_bc=None, seed=0,
        sampler="mc", n_iter=20, tol=1e-10, patience=3, score_sizes=(1000, 100)):
    """Dispatch to :func:`fit_kkt`, :func:`fit_lar_kkt` or :func:`fit_lar` by name."""
    if method == "kkt":
        return fit_kkt(problem, data, p_range, n_bc, seed, sampler, n_iter, tol, patience, score_sizes)
    if method == "lar-kkt":
        return fit_lar_kkt(problem, data, p_range, n_bc, seed, sampler, n_iter, tol, patience, score_sizes)
    if method == "lar":
        return fit_lar(problem, data, p_range, n_bc, seed, patience, score_sizes)
    raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")
