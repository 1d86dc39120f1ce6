import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from pc2.design import (
    BoundarySampleSpec,
    BoundarySegment,
    OverConstrainedError,
    boundary_points,
    sample_lhs,
    sample_mc,
    split_counts,
    virtual_point_count,
)
from pc2.polybasis import cardinality


def test_lhs_quarters():
    pts = sample_lhs(4, 1, seed=3)[:, 0]
    bins = np.floor((pts + 1) / 0.5).astype(int)
    assert sorted(bins) == [0, 1, 2, 3]


@given(st.integers(1, 60), st.integers(1, 4), st.integers(0, 2**31))
def test_lhs_stratification_every_dimension(n, M, seed):
    pts = sample_lhs(n, M, seed)
    assert pts.shape == (n, M)
    assert np.all(np.abs(pts) <= 1)
    for j in range(M):
        bins = np.minimum(np.floor((pts[:, j] + 1) / 2 * n).astype(int), n - 1)
        assert sorted(bins) == list(range(n))


def test_samplers_deterministic():
    np.testing.assert_array_equal(sample_lhs(10, 2, 7), sample_lhs(10, 2, 7))
    np.testing.assert_array_equal(sample_mc(10, 2, 7), sample_mc(10, 2, 7))


def test_sampler_moments():
    assert abs(sample_lhs(1000, 1, 1).mean()) < 0.05
    assert sample_mc(0, 3, 1).shape == (0, 3)
    assert abs(sample_mc(10000, 1, 1).var() - 1 / 3) < 0.02


def test_virtual_point_count():
    assert virtual_point_count(10, 2) == 8
    with pytest.raises(OverConstrainedError):
        virtual_point_count(5, 5)
    assert virtual_point_count(231, 90) == 141
    assert cardinality(2, 20) == 231


def test_poisson_endpoints():
    spec = BoundarySampleSpec(2, (BoundarySegment(0, {0: -1.0}), BoundarySegment(1, {0: 1.0})))
    bp = boundary_points(spec, [], 1)
    np.testing.assert_array_equal(bp.points[:, 0], [-1.0, 1.0])
    np.testing.assert_array_equal(bp.condition, [0, 1])


def test_wave_split_even():
    # x in dim 0, t in dim 1; u_t(t=0), u(x=0), u(x=1), u(t=0)
    segs = (
        BoundarySegment(0, {1: -1.0}),
        BoundarySegment(1, {0: -1.0}),
        BoundarySegment(2, {0: 1.0}),
        BoundarySegment(3, {1: -1.0}),
    )
    bp = boundary_points(BoundarySampleSpec(10, segs), [], 2)
    counts = np.bincount(bp.condition, minlength=4)
    assert counts.sum() <= 10  # duplicates of one operator on shared corners may be dropped
    planned = split_counts(10, 4)
    assert max(planned) - min(planned) <= 1


def test_heat_face_three_points():
    spec = BoundarySampleSpec(3, (BoundarySegment(0, {0: -1.0}),))
    bp = boundary_points(spec, [], 2)
    t = (bp.points[:, 1] + 1) / 2  # t in [0, 1]
    np.testing.assert_allclose(sorted(t), [0.0, 0.5, 1.0])


@given(st.integers(3, 40), st.integers(0, 1000))
def test_boundary_points_inside_domain_and_deterministic(n_bc, seed):
    segs = (BoundarySegment(0, {0: -1.0}), BoundarySegment(1, {0: 1.0}), BoundarySegment(2, {1: -1.0}))
    spec = BoundarySampleSpec(n_bc, segs)
    a = boundary_points(spec, [2], 3, seed)
    b = boundary_points(spec, [2], 3, seed)
    np.testing.assert_array_equal(a.points, b.points)
    assert np.all(np.abs(a.points) <= 1.0)


def test_boundary_location_outside_rejected():
    with pytest.raises(ValueError):
        boundary_points(BoundarySampleSpec(1, (BoundarySegment(0, {0: 1.5}),)), [], 1)


@given(st.integers(0, 200), st.integers(1, 9))
def test_split_counts(total, parts):
    c = split_counts(total, parts)
    assert sum(c) == total and max(c) - min(c) <= 1
