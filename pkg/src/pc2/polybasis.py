"""Orthonormal Legendre basis, exact derivatives and total-degree index sets.

Univariate polynomials are orthonormal with respect to the uniform density
1/2 on [-1, 1]::

    psi_n(xi) = sqrt(2n + 1) * P_n(xi)

Derivatives of any order are produced by differentiating the three-term
recurrence, so constraint rows built from them are exact up to rounding.
"""
from __future__ import annotations

from dataclasses import dataclass
from math import comb

import numpy as np

DETERMINISTIC = "deterministic"
RANDOM = "random"


@dataclass(frozen=True)
class BasisSet:
    """Ordered set of multi-indices; row ``j`` holds the degrees of term ``j``."""

    M: int
    p: int
    indices: np.ndarray

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.int64).reshape(-1, self.M)
        idx.setflags(write=False)
        object.__setattr__(self, "indices", idx)

    def __len__(self) -> int:
        return self.indices.shape[0]

    @property
    def P(self) -> int:
        return self.indices.shape[0]

    @property
    def total_degree(self) -> np.ndarray:
        return self.indices.sum(axis=1)

    def subset(self, columns) -> "BasisSet":
        columns = np.asarray(columns, dtype=np.int64)
        p = int(self.indices[columns].sum(axis=1).max()) if len(columns) else 0
        return BasisSet(self.M, p, self.indices[columns])

    def as_tuples(self) -> list[tuple[int, ...]]:
        return [tuple(int(a) for a in row) for row in self.indices]


def cardinality(M: int, p: int) -> int:
    return comb(M + p, p)


def multi_index_set(M: int, p: int) -> BasisSet:
    """All multi-indices with total degree <= p in graded lexicographic order.

    Within one total degree the tuples are sorted in descending lexicographic
    order, so for ``M=2, p=1`` the order is (0, 0), (1, 0), (0, 1).
    """
    if M < 1 or p < 0:
        raise ValueError(f"need M >= 1 and p >= 0, got M={M}, p={p}")
    out: list[tuple[int, ...]] = []
    for degree in range(p + 1):
        out.extend(_compositions(degree, M))
    return BasisSet(M, p, np.array(out, dtype=np.int64).reshape(-1, M))


def _compositions(total: int, parts: int):
    # descending lexicographic order of all non-negative tuples summing to total
    if parts == 1:
        yield (total,)
        return
    for first in range(total, -1, -1):
        for rest in _compositions(total - first, parts - 1):
            yield (first,) + rest


def legendre_table(n_max: int, k: int, xi) -> np.ndarray:
    """k-th derivatives of psi_0..psi_{n_max} at ``xi``; shape (len(xi), n_max + 1).

    Uses the differentiated recurrence

        (n+1) P^(k)_{n+1} = (2n+1) (x P^(k)_n + k P^(k-1)_n) - n P^(k)_{n-1}
    """
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    prev = None  # table for derivative order k-1
    for order in range(k + 1):
        cur = np.zeros((xi.size, n_max + 1))
        if order == 0:
            cur[:, 0] = 1.0
        if n_max >= 1:
            if order == 0:
                cur[:, 1] = xi
            elif order == 1:
                cur[:, 1] = 1.0
            for n in range(1, n_max):
                val = (2 * n + 1) * xi * cur[:, n] - n * cur[:, n - 1]
                if order > 0:
                    val = val + (2 * n + 1) * order * prev[:, n]
                cur[:, n + 1] = val / (n + 1)
        prev = cur
    return prev * np.sqrt(2.0 * np.arange(n_max + 1) + 1.0)


def legendre_orthonormal(n: int, xi):
    """psi_n(xi); scalar in, scalar out."""
    out = legendre_table(n, 0, xi)[:, n]
    return out[0] if np.ndim(xi) == 0 else out


def legendre_derivative(n: int, k: int, xi):
    """k-th derivative of psi_n with respect to xi (zero when k > n)."""
    if n < 0 or k < 0:
        raise ValueError("degree and derivative order must be non-negative")
    out = legendre_table(n, k, xi)[:, n]
    return out[0] if np.ndim(xi) == 0 else out


def eval_basis(basis: BasisSet, xi, orders=None, scales=None) -> np.ndarray:
    """Evaluate every basis function (or a mixed partial of it) at points ``xi``.

    Parameters
    ----------
    basis : BasisSet
    xi : array_like, shape (N, M) or (M,)
        Standardized coordinates.
    orders : sequence of int, optional
        Derivative order per variable, all zero by default.
    scales : sequence of float, optional
        Chain-rule factors 2/(x_max - x_min). Each derivative in variable i is
        multiplied by ``scales[i] ** orders[i]`` so the result is in physical
        units.

    Returns
    -------
    ndarray, shape (N, P), or (P,) for a single point.
    """
    xi = np.asarray(xi, dtype=float)
    single = xi.ndim == 1
    xi = np.atleast_2d(xi)
    if xi.shape[1] != basis.M:
        raise ValueError(f"point dimension {xi.shape[1]} != basis dimension {basis.M}")
    orders = np.zeros(basis.M, dtype=int) if orders is None else np.asarray(orders, dtype=int)
    out = np.ones((xi.shape[0], basis.P))
    factor = 1.0
    for i in range(basis.M):
        deg = basis.indices[:, i]
        table = legendre_table(int(deg.max()), int(orders[i]), xi[:, i])
        out *= table[:, deg]
        if scales is not None and orders[i]:
            factor *= float(scales[i]) ** int(orders[i])
    if factor != 1.0:
        out *= factor
    return out[0] if single else out


def eval_basis_row(basis: BasisSet, xi, orders=None, scales=None) -> np.ndarray:
    return eval_basis(basis, np.asarray(xi, dtype=float).reshape(basis.M), orders, scales)


@dataclass(frozen=True)
class VariableTransform:
    """Affine map between a physical interval and [-1, 1]."""

    name: str
    kind: str
    lower: float
    upper: float

    def __post_init__(self):
        if self.kind not in (DETERMINISTIC, RANDOM):
            raise ValueError(f"variable {self.name!r}: unknown role {self.kind!r}")
        if not self.lower < self.upper:
            raise ValueError(f"variable {self.name!r}: need lower < upper, got [{self.lower}, {self.upper}]")

    @property
    def scale(self) -> float:
        return 2.0 / (self.upper - self.lower)

    @property
    def is_random(self) -> bool:
        return self.kind == RANDOM

    def to_standard(self, x):
        # written so that both endpoints land exactly on -1 and 1
        x = np.asarray(x, dtype=float)
        return 2.0 * ((x - self.lower) / (self.upper - self.lower)) - 1.0

    def from_standard(self, xi):
        xi = np.asarray(xi, dtype=float)
        half = 0.5 * (self.upper - self.lower)
        return np.where(xi < 0, self.lower + (xi + 1.0) * half, self.upper - (1.0 - xi) * half)

    def inside(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return (x >= self.lower) & (x <= self.upper)


def to_standard(transforms, x) -> np.ndarray:
    """Map physical points (N, M) to standardized coordinates."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    return np.column_stack([t.to_standard(x[:, i]) for i, t in enumerate(transforms)])


def from_standard(transforms, xi) -> np.ndarray:
    xi = np.atleast_2d(np.asarray(xi, dtype=float))
    return np.column_stack([t.from_standard(xi[:, i]) for i, t in enumerate(transforms)])


def extrapolated(transforms, x) -> np.ndarray:
    """Boolean mask of physical points lying outside the domain box."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    inside = np.ones(x.shape[0], dtype=bool)
    for i, t in enumerate(transforms):
        inside &= t.inside(x[:, i])
    return ~inside
