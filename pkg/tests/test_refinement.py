import math
import warnings

import numpy as np
import pytest

from opmatch.geometry import TWO_PI, OrientedPoint, PointSet, angular_distance
from opmatch.refinement import (
    CloudClampWarning,
    CloudSpec,
    GridSpec,
    angle_cloud,
    cloud_size,
    expand_grid,
    expand_grid_cloud,
    grid_cloud_params,
    grid_params,
    square_grid,
)


def test_square_grid_examples():
    assert square_grid(GridSpec((1.5, -2.0), 0.3, 0)).tolist() == [[1.5, -2.0]]
    assert len(square_grid(GridSpec((0, 0), 1.0, 3))) == 49
    g = square_grid(GridSpec((0.0, 0.0), 2.0, 1))
    assert g.tolist() == [[x, y] for x in (-2.0, 0.0, 2.0) for y in (-2.0, 0.0, 2.0)]
    with pytest.raises(ValueError):
        GridSpec((0, 0), 0.0, 1)


def test_angle_cloud_examples():
    c = OrientedPoint(1, 2, 0.7)
    one = angle_cloud(CloudSpec(c, 1))
    assert len(one) == 1 and math.isclose(one[0].a, 0.7)
    four = angle_cloud(CloudSpec(OrientedPoint(0, 0, 0), 4))
    assert np.allclose([p.a for p in four], [math.pi / 2, math.pi, 1.5 * math.pi, 0.0])
    assert all((p.x, p.y) == (0.0, 0.0) for p in four)
    with pytest.raises(ValueError):
        CloudSpec(c, 0)


@pytest.mark.parametrize("k", [1, 3, 7, 50])
def test_cloud_gap(k):
    rng = np.random.default_rng(k)
    cloud = [p.a for p in angle_cloud(CloudSpec(OrientedPoint(0, 0, rng.uniform(0, TWO_PI)), k))]
    targets = rng.uniform(0, TWO_PI, 2000)
    worst = max(min(angular_distance(t, a) for a in cloud) for t in targets)
    assert worst <= math.pi / k + 1e-12


def test_grid_params_closed_forms():
    s = grid_params(1.0, 2.0, 1.0, "l1")
    assert math.isclose(s.l, 0.5) and s.k == 2 and s.per_point == 25
    s = grid_params(3.0, 4.0, 0.25, "l2")
    assert math.isclose(s.l, math.sqrt(2) * 0.25 * 3.0 / 12.0)
    assert s.k == math.ceil(12.0 / (math.sqrt(2) * 0.25))


def test_grid_cloud_params_closed_forms():
    h = 0.5
    s = grid_cloud_params(h, 2.0, 1.0, "l1")
    assert math.isclose(s.l, h / 4) and s.k == 4
    assert s.cloud == math.ceil(4 * math.pi / h)
    s = grid_cloud_params(h, 2.0, 1.0, "l2")
    assert math.isclose(s.l, h / 2) and s.k == 2
    assert s.cloud == math.ceil(math.sqrt(2) * math.pi * 2 / h)


def test_cloud_clamp_warns():
    with pytest.warns(CloudClampWarning):
        k, clamped = cloud_size(1e-9, 3.0, 0.5, "l1")
    assert clamped and k == math.ceil(TWO_PI / 1e-4)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        assert cloud_size(1.0, 3.0, 0.5, "l1") == (math.ceil(TWO_PI * 6 / 0.5), False)


def test_degenerate_parameters():
    for bad in [(-1.0, 2.0, 1.0), (1.0, 1.0, 1.0), (1.0, 2.0, 0.0), (math.inf, 2.0, 1.0)]:
        with pytest.raises(ValueError):
            grid_params(*bad, "l1")
    B = PointSet([(0, 0, 1.0), (3, 4, 2.0)])
    assert expand_grid(B, 0.0, 2.0, 1.0, "l1") is B
    assert expand_grid_cloud(B, 0.0, 2.0, 1.0, "l2") is B


@pytest.mark.parametrize("metric", ["l1", "l2"])
def test_expand_grid_sizes_and_orientation(metric):
    B = PointSet([(0, 0, 1.0), (3, 4, 2.0), (-1, 5, 0.1)])
    E = expand_grid(B, 0.8, 3.0, 0.5, metric)
    spec = grid_params(0.8, 3.0, 0.5, metric)
    assert len(E) == 3 * spec.per_point
    per = spec.per_point
    for b in range(3):
        block = E.data[b * per:(b + 1) * per]
        assert np.all(block[:, 2] == B.data[b, 2])
        assert np.allclose(block[:, :2], square_grid(GridSpec(tuple(B.data[b, :2]), spec.l, spec.k)))


@pytest.mark.parametrize("metric", ["l1", "l2"])
def test_expand_grid_cloud_sizes(metric):
    B = PointSet([(0, 0, 1.0), (3, 4, 2.0)])
    spec = grid_cloud_params(2.0, 2.0, 1.0, metric)
    E = expand_grid_cloud(B, 2.0, 2.0, 1.0, metric)
    assert len(E) == 2 * spec.per_point
    assert spec.per_point == (2 * spec.k + 1) ** 2 * spec.cloud


@pytest.mark.parametrize("metric", ["l1", "l2"])
def test_expand_grid_cloud_covers_neighbourhood(metric):
    # any oriented point within h_apr of b is within eps*h/(A^2-A) of the expansion
    h, A, eps = 1.0, 2.0, 1.0
    b = np.array([[0.3, -0.2, 2.5]])
    E = expand_grid_cloud(b, h, A, eps, metric).data
    rng = np.random.default_rng(5)
    bound = eps * h / (A * A - A)
    worst = 0.0
    for _ in range(3000):
        q = b[0] + np.array([rng.uniform(-h, h), rng.uniform(-h, h), rng.uniform(-math.pi, math.pi)])
        dx = np.abs(E[:, 0] - q[0])
        dy = np.abs(E[:, 1] - q[1])
        da = np.abs(E[:, 2] - q[2] % TWO_PI)
        da = np.minimum(da, TWO_PI - da)
        d = (dx + dy + da).min() if metric == "l1" else np.sqrt(dx**2 + dy**2 + da**2).min()
        worst = max(worst, d)
    assert worst <= bound + 1e-12


def test_expand_grid_row_major_order():
    B = PointSet([(10.0, 20.0, 0.0)])
    E = expand_grid(B, 1.0, 2.0, 1.0, "l1").data
    s = grid_params(1.0, 2.0, 1.0, "l1")
    i, j = np.divmod(np.arange(len(E)), 2 * s.k + 1)
    assert np.allclose(E[:, 0], 10.0 + (i - s.k) * s.l)
    assert np.allclose(E[:, 1], 20.0 + (j - s.k) * s.l)
