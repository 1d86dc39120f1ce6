"""Differential and boundary operators, problem definitions and constraint rows.

An operator is a sum of terms ``coeff(x) * d^k u / dx^k`` and imposes
``L(u) = rhs`` pointwise. Coefficients and right-hand sides are evaluated in
physical coordinates; basis derivatives carry the chain-rule factor
2/(x_max - x_min) per derivative.

Weak nonlinearity enters only through the reserved symbol ``u_prev`` in a
coefficient, bound to the previous iterate of the surrogate.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .design import BoundarySampleSpec, BoundarySegment
from .expression import RESERVED, U_PREV, Expression
from .polybasis import DETERMINISTIC, BasisSet, VariableTransform, eval_basis, from_standard

LINEARIZATIONS = ("coefficient", "rhs")


class ProblemError(ValueError):
    """Inconsistent problem definition."""


@dataclass(frozen=True)
class OperatorTerm:
    coeff: Expression
    orders: tuple  # ((variable name, order), ...) with order > 0, sorted by name

    @classmethod
    def make(cls, coeff, orders=None) -> "OperatorTerm":
        coeff = coeff if isinstance(coeff, Expression) else Expression(coeff)
        items = tuple(sorted((str(k), int(v)) for k, v in (orders or {}).items() if int(v) != 0))
        if any(v < 0 for _, v in items):
            raise ProblemError("derivative orders must be non-negative")
        return cls(coeff, items)

    @property
    def order_map(self) -> dict:
        return dict(self.orders)

    def order_vector(self, names) -> np.ndarray:
        m = self.order_map
        return np.array([m.get(n, 0) for n in names], dtype=int)


@dataclass(frozen=True)
class LinearOperator:
    terms: tuple
    rhs: Expression

    def __post_init__(self):
        if not self.terms:
            raise ProblemError("an operator needs at least one term")

    @classmethod
    def make(cls, terms, rhs) -> "LinearOperator":
        terms = tuple(t if isinstance(t, OperatorTerm) else OperatorTerm.make(*t) for t in terms)
        rhs = rhs if isinstance(rhs, Expression) else Expression(rhs)
        return cls(terms, rhs)

    @classmethod
    def dirichlet(cls, rhs) -> "LinearOperator":
        return cls.make([("1", {})], rhs)

    @property
    def nonlinear(self) -> bool:
        return any(t.coeff.uses_u_prev for t in self.terms) or self.rhs.uses_u_prev

    @property
    def names(self) -> set:
        out = set(self.rhs.names)
        for t in self.terms:
            out |= t.coeff.names | {n for n, _ in t.orders}
        return out

    def same_lhs(self, other: "LinearOperator") -> bool:
        key = lambda op: sorted((t.coeff.canonical(), t.orders) for t in op.terms)  # noqa: E731
        return key(self) == key(other)


@dataclass(frozen=True)
class BoundaryCondition:
    operator: LinearOperator
    location: tuple  # ((variable name, physical value), ...)

    @classmethod
    def make(cls, operator, location) -> "BoundaryCondition":
        return cls(operator, tuple(sorted((str(k), float(v)) for k, v in location.items())))

    @property
    def location_map(self) -> dict:
        return dict(self.location)


@dataclass
class ProblemSpec:
    """Variables, PDE operator, boundary conditions and an optional reference solution."""

    variables: tuple
    pde: LinearOperator
    bcs: tuple = ()
    reference: Expression | None = None
    name: str = "problem"
    linearization: str = "coefficient"

    def __post_init__(self):
        self.variables = tuple(self.variables)
        self.bcs = tuple(self.bcs)
        if self.linearization not in LINEARIZATIONS:
            raise ProblemError(f"linearization must be one of {LINEARIZATIONS}")
        self.validate()

    @property
    def names(self) -> list[str]:
        return [v.name for v in self.variables]

    @property
    def M(self) -> int:
        return len(self.variables)

    @property
    def random_indices(self) -> list[int]:
        return [i for i, v in enumerate(self.variables) if v.is_random]

    @property
    def deterministic_indices(self) -> list[int]:
        return [i for i, v in enumerate(self.variables) if not v.is_random]

    @property
    def scales(self) -> np.ndarray:
        return np.array([v.scale for v in self.variables])

    @property
    def nonlinear(self) -> bool:
        return self.pde.nonlinear or any(bc.operator.nonlinear for bc in self.bcs)

    def variable(self, name: str) -> VariableTransform:
        return self.variables[self.names.index(name)]

    def validate(self):
        names = self.names
        if len(set(names)) != len(names):
            raise ProblemError("duplicate variable names")
        for n in names:
            if n in RESERVED:
                raise ProblemError(f"variable name {n!r} is reserved")
        det = {v.name for v in self.variables if v.kind == DETERMINISTIC}
        declared = set(names) | {U_PREV}

        def check_op(op: LinearOperator, where: str):
            for i, t in enumerate(op.terms):
                unknown = t.coeff.names - declared
                if unknown:
                    raise ProblemError(f"{where}.terms[{i}].coeff: unknown identifier {sorted(unknown)[0]!r}")
                for n, _ in t.orders:
                    if n not in det:
                        raise ProblemError(
                            f"{where}.terms[{i}]: derivative with respect to {n!r}, "
                            "which is not a deterministic variable"
                        )
            unknown = op.rhs.names - declared
            if unknown:
                raise ProblemError(f"{where}.rhs: unknown identifier {sorted(unknown)[0]!r}")

        check_op(self.pde, "pde")
        for k, bc in enumerate(self.bcs):
            check_op(bc.operator, f"bc[{k}]")
            loc = bc.location_map
            if not any(n in det for n in loc):
                raise ProblemError(f"bc[{k}]: location must fix at least one deterministic variable")
            for n, v in loc.items():
                if n not in names:
                    raise ProblemError(f"bc[{k}].location: unknown variable {n!r}")
                var = self.variable(n)
                # interior point conditions (e.g. u(0) = 0.5 on [-5, 5]) are allowed
                if not var.lower <= v <= var.upper:
                    raise ProblemError(f"bc[{k}].location: {n}={v} lies outside [{var.lower}, {var.upper}]")
        if self.reference is not None:
            unknown = self.reference.names - set(names)
            if unknown:
                raise ProblemError(f"reference.solution: unknown identifier {sorted(unknown)[0]!r}")

    def boundary_spec(self, n_bc: int) -> BoundarySampleSpec:
        segs = []
        for k, bc in enumerate(self.bcs):
            fixed = {self.names.index(n): float(self.variable(n).to_standard(v)) for n, v in bc.location}
            segs.append(BoundarySegment(k, fixed))
        return BoundarySampleSpec(n_bc, tuple(segs))

    def same_bc_operator(self, i: int, j: int) -> bool:
        return self.bcs[i].operator.same_lhs(self.bcs[j].operator)

    def env(self, x) -> dict:
        x = np.atleast_2d(x)
        return {n: x[:, i] for i, n in enumerate(self.names)}


class OperatorMatrices:
    """Per-term basis-derivative matrices of one operator at fixed points.

    Rows for any column subset of the basis and any previous iterate are
    cheap to produce from the cached matrices.
    """

    def __init__(self, op: LinearOperator, basis: BasisSet, transforms, xi):
        self.op = op
        self.basis = basis
        self.transforms = tuple(transforms)
        self.names = [t.name for t in self.transforms]
        self.xi = np.atleast_2d(np.asarray(xi, dtype=float)).reshape(-1, basis.M)
        self.x = from_standard(self.transforms, self.xi) if len(self.xi) else self.xi.copy()
        n = self.xi.shape[0]
        scales = np.array([t.scale for t in self.transforms])
        self.env = {name: self.x[:, i] for i, name in enumerate(self.names)}
        self.term_mats = [eval_basis(basis, self.xi, t.order_vector(self.names), scales) for t in op.terms]
        self.coeffs = [
            None if t.coeff.uses_u_prev else t.coeff.evaluate(self.env, (n,)) for t in op.terms
        ]
        self.rhs = None if op.rhs.uses_u_prev else op.rhs.evaluate(self.env, (n,))

    def __len__(self):
        return self.xi.shape[0]

    def _env_with(self, u_prev):
        if u_prev is None:
            return self.env
        return {**self.env, U_PREV: u_prev.evaluate(self.x)}

    def rows(self, columns=None, u_prev=None, linearization="coefficient"):
        """Constraint block (A, c) for basis ``columns`` (all by default)."""
        n = len(self)
        cols = slice(None) if columns is None else np.asarray(columns)
        if self.op.nonlinear and u_prev is None:
            raise ValueError("operator references u_prev but no previous iterate was supplied")
        env = self._env_with(u_prev) if self.op.nonlinear else self.env
        width = self.basis.P if columns is None else len(cols)
        A = np.zeros((n, width))
        c = (self.op.rhs.evaluate(env, (n,)) if self.rhs is None else self.rhs).copy()
        for term, mat, coeff in zip(self.op.terms, self.term_mats, self.coeffs):
            if coeff is None:
                coeff = term.coeff.evaluate(env, (n,))
                if linearization == "rhs":
                    c -= coeff * u_prev.evaluate(self.x, term.order_vector(self.names))
                    continue
            A += coeff[:, None] * mat[:, cols]
        return A, c


def constraint_rows(op: LinearOperator, basis: BasisSet, transforms, xi, u_prev=None,
                    linearization="coefficient"):
    """Rows a_j = L(Psi_j)(xi) and targets c = rhs(x) at standardized points ``xi``."""
    return OperatorMatrices(op, basis, transforms, xi).rows(u_prev=u_prev, linearization=linearization)


def constraint_row(op: LinearOperator, basis: BasisSet, transforms, xi, u_prev=None,
                   linearization="coefficient"):
    """Single-point version of :func:`constraint_rows`; returns (row, scalar)."""
    A, c = constraint_rows(op, basis, transforms, np.reshape(xi, (1, -1)), u_prev, linearization)
    return A[0], float(c[0])


def apply_operator(op: LinearOperator, model, xi) -> np.ndarray:
    """L(u)(x) - rhs(x) for a model, with ``u_prev`` bound to the model itself."""
    xi = np.atleast_2d(np.asarray(xi, dtype=float))
    x = model.from_standard(xi)
    names = model.names
    env = {n: x[:, i] for i, n in enumerate(names)}
    if op.nonlinear:
        env[U_PREV] = model.evaluate_standard(xi)
    out = np.zeros(xi.shape[0])
    for t in op.terms:
        out += t.coeff.evaluate(env, out.shape) * model.evaluate_standard(xi, t.order_vector(names))
    return out - op.rhs.evaluate(env, out.shape)


def residual(op: LinearOperator, model, xi):
    """Pointwise residual of ``op`` for ``model``; scalar for a single point."""
    xi = np.asarray(xi, dtype=float)
    out = apply_operator(op, model, xi)
    return float(out[0]) if xi.ndim <= 1 else out


def function_residual(op: LinearOperator, func: Expression, names, x) -> np.ndarray:
    """Residual of ``op`` for an analytic function given as an expression, at physical x."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    env = {n: x[:, i] for i, n in enumerate(names)}
    shape = (x.shape[0],)
    if op.nonlinear:
        env[U_PREV] = func.evaluate(env, shape)
    out = np.zeros(shape)
    for t in op.terms:
        d = func
        for n, k in t.orders:
            for _ in range(k):
                d = d.diff(n)
        out += t.coeff.evaluate(env, shape) * d.evaluate(env, shape)
    return out - op.rhs.evaluate(env, shape)
