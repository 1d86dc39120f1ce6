"""Experimental designs, virtual points and boundary points.

Samplers work in standardized coordinates ([-1, 1]^M) and are pure
functions of their arguments and the seed.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

SAMPLERS = ("lhs", "mc")


def _rng(seed) -> np.random.Generator:
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def sample_lhs(n: int, M: int, seed=None) -> np.ndarray:
    """Latin hypercube sample of ``n`` points in [-1, 1]^M.

    Each of the ``n`` equal strata per dimension receives exactly one point,
    placed uniformly at random inside its stratum.
    """
    if n < 0:
        raise ValueError("sample size must be non-negative")
    rng = _rng(seed)
    if n == 0:
        return np.empty((0, M))
    u = np.empty((n, M))
    for j in range(M):
        u[:, j] = (rng.permutation(n) + rng.random(n)) / n
    return 2.0 * u - 1.0


def sample_mc(n: int, M: int, seed=None) -> np.ndarray:
    """Crude Monte Carlo sample of ``n`` points in [-1, 1]^M."""
    if n < 0:
        raise ValueError("sample size must be non-negative")
    return _rng(seed).uniform(-1.0, 1.0, size=(n, M))


def sample(kind: str, n: int, M: int, seed=None) -> np.ndarray:
    if kind == "lhs":
        return sample_lhs(n, M, seed)
    if kind == "mc":
        return sample_mc(n, M, seed)
    raise ValueError(f"unknown sampler {kind!r}; expected one of {SAMPLERS}")


class OverConstrainedError(ValueError):
    """Boundary rows leave no room for PDE collocation rows."""


def virtual_point_count(P: int, n_bc: int) -> int:
    """Number of virtual points that makes the KKT system square in the constraints."""
    if P <= n_bc:
        raise OverConstrainedError(
            f"basis of size {P} cannot host {n_bc} boundary constraints plus PDE rows; "
            "raise p or reduce n_BC"
        )
    return P - n_bc


@dataclass(frozen=True)
class BoundarySegment:
    """Where one boundary condition applies.

    ``fixed`` maps variable index -> standardized coordinate held constant;
    every other variable ranges over [-1, 1].
    """

    condition: int
    fixed: dict = field(default_factory=dict)


@dataclass(frozen=True)
class BoundarySampleSpec:
    n_bc: int
    segments: tuple


@dataclass
class BoundaryPoints:
    points: np.ndarray        # (n, M) standardized
    condition: np.ndarray     # (n,) index of the boundary condition per point

    def __len__(self):
        return self.points.shape[0]

    def for_condition(self, k: int) -> np.ndarray:
        return self.points[self.condition == k]


def split_counts(total: int, parts: int) -> list[int]:
    """Round-robin split: counts differ by at most one, earlier parts get extras."""
    base, extra = divmod(total, parts)
    return [base + (1 if i < extra else 0) for i in range(parts)]


def _face_points(n: int, free_det: list[int], M: int) -> np.ndarray:
    # evenly spaced points (endpoints included) over the free deterministic variables
    pts = np.zeros((n, M))
    if not free_det or n == 0:
        return pts
    if len(free_det) == 1:
        grid = np.linspace(-1.0, 1.0, n) if n > 1 else np.zeros(1)
        pts[:, free_det[0]] = grid
        return pts
    m = int(np.ceil(n ** (1.0 / len(free_det))))
    axes = [np.linspace(-1.0, 1.0, m) if m > 1 else np.zeros(1)] * len(free_det)
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, len(free_det))
    take = np.round(np.linspace(0, mesh.shape[0] - 1, n)).astype(int)
    pts[:, free_det] = mesh[take]
    return pts


def boundary_points(spec: BoundarySampleSpec, random_vars, M: int, seed=None,
                    same_operator=None) -> BoundaryPoints:
    """Deterministic boundary points for a box domain.

    Segments whose deterministic variables are all fixed (1D endpoints) get a
    single point. The remaining ``n_bc`` budget is split round-robin over the
    face segments and spread evenly along each face, endpoints included.
    Coordinates of random variables are drawn by LHS from ``seed``.

    ``same_operator(i, j)`` tells whether conditions i and j impose the same
    operator; a point already constrained by an identical operator is dropped
    because it would duplicate a constraint row.
    """
    random_vars = set(random_vars)
    segs = list(spec.segments)
    free = [[i for i in range(M) if i not in s.fixed and i not in random_vars] for s in segs]
    for s in segs:
        for i, v in s.fixed.items():
            if not -1.0 - 1e-12 <= v <= 1.0 + 1e-12:
                raise ValueError(f"boundary location {v} for variable {i} lies outside the domain")
    point_segs = [k for k, f in enumerate(free) if not f]
    face_segs = [k for k, f in enumerate(free) if f]
    counts = [0] * len(segs)
    for k in point_segs:
        counts[k] = 1
    budget = spec.n_bc - len(point_segs)
    if face_segs:
        if budget < len(face_segs):
            raise ValueError(
                f"n_BC={spec.n_bc} is too small: {len(point_segs)} point conditions "
                f"and {len(face_segs)} face conditions need at least one point each"
            )
        for k, c in zip(face_segs, split_counts(budget, len(face_segs))):
            counts[k] = c
    elif budget != 0:
        raise ValueError(
            f"n_BC={spec.n_bc} does not match the {len(point_segs)} point-wise boundary conditions"
        )

    rng = _rng(seed)
    rand_idx = sorted(random_vars)
    pts, cond = [], []
    for k, s in enumerate(segs):
        block = _face_points(counts[k], free[k], M)
        for i, v in s.fixed.items():
            block[:, i] = v
        if rand_idx and counts[k]:
            block[:, rand_idx] = sample_lhs(counts[k], len(rand_idx), rng)
        pts.append(block)
        cond.extend([s.condition] * counts[k])
    points = np.vstack(pts) if pts else np.empty((0, M))
    cond = np.array(cond, dtype=int)

    keep = np.ones(len(cond), dtype=bool)
    for a in range(len(cond)):
        for b in range(a):
            if not keep[b] or not np.array_equal(points[a], points[b]):
                continue
            if cond[a] == cond[b] or (same_operator is not None and same_operator(cond[a], cond[b])):
                keep[a] = False
                break
    return BoundaryPoints(points[keep], cond[keep])


def random_boundary_points(spec: BoundarySampleSpec, M: int, n: int, seed=None) -> BoundaryPoints:
    """Uniformly random points on the boundary segments, for validation.

    Segments with every variable fixed get one point; the other ``n`` points
    are split round-robin over the remaining segments.
    """
    rng = _rng(seed)
    segs = list(spec.segments)
    free = [[i for i in range(M) if i not in s.fixed] for s in segs]
    face = [k for k, f in enumerate(free) if f]
    counts = [0 if free[k] else 1 for k in range(len(segs))]
    if face:
        for k, c in zip(face, split_counts(max(n - (len(segs) - len(face)), len(face)), len(face))):
            counts[k] = c
    pts, cond = [], []
    for k, s in enumerate(segs):
        block = np.zeros((counts[k], M))
        if free[k]:
            block[:, free[k]] = rng.uniform(-1.0, 1.0, size=(counts[k], len(free[k])))
        for i, v in s.fixed.items():
            block[:, i] = v
        pts.append(block)
        cond.extend([s.condition] * counts[k])
    points = np.vstack(pts) if pts else np.empty((0, M))
    return BoundaryPoints(points, np.array(cond, dtype=int))
