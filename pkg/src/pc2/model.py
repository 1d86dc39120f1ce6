"""The fitted surrogate: basis, coefficients and variable transforms."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .polybasis import BasisSet, eval_basis, extrapolated, from_standard, to_standard


@dataclass
class Pc2Model:
    """u(x) = sum_j beta_j Psi_j(T(x)) over physical points x."""

    basis: BasisSet
    coefficients: np.ndarray
    transforms: tuple
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.coefficients = np.asarray(self.coefficients, dtype=float).reshape(-1)
        self.transforms = tuple(self.transforms)
        if self.coefficients.size != self.basis.P:
            raise ValueError(f"{self.coefficients.size} coefficients for a basis of size {self.basis.P}")
        if len(self.transforms) != self.basis.M:
            raise ValueError("one transform per basis dimension is required")

    @property
    def M(self) -> int:
        return self.basis.M

    @property
    def names(self) -> list[str]:
        return [t.name for t in self.transforms]

    @property
    def scales(self) -> np.ndarray:
        return np.array([t.scale for t in self.transforms])

    @property
    def random_mask(self) -> np.ndarray:
        return np.array([t.is_random for t in self.transforms])

    def to_standard(self, x) -> np.ndarray:
        return to_standard(self.transforms, x)

    def from_standard(self, xi) -> np.ndarray:
        return from_standard(self.transforms, xi)

    def evaluate_standard(self, xi, orders=None) -> np.ndarray:
        xi = np.atleast_2d(np.asarray(xi, dtype=float))
        return eval_basis(self.basis, xi, orders, self.scales) @ self.coefficients

    def evaluate(self, x, orders=None) -> np.ndarray:
        """Surrogate (or its mixed partial, in physical units) at physical points."""
        return self.evaluate_standard(self.to_standard(x), orders)

    __call__ = evaluate

    def derivative(self, x, orders) -> np.ndarray:
        return self.evaluate(x, orders)

    def extrapolated(self, x) -> np.ndarray:
        return extrapolated(self.transforms, x)
