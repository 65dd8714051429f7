"""Grid and angular-cloud generators used by the (1+eps) schemes."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .geometry import TWO_PI, Metric, OrientedPoint, PointSet, as_pointset, normalize_angles

SQRT2 = math.sqrt(2.0)
MIN_ANGULAR_STEP = 1e-4
# refuse to materialize expansions larger than this many points
MAX_MATERIALIZED = 20_000_000


class CloudClampWarning(RuntimeWarning):
    """Emitted when the angular cloud size is clamped."""


@dataclass(frozen=True, slots=True)
class GridSpec:
    center: tuple[float, float]
    l: float
    k: int

    def __post_init__(self) -> None:
        if not self.l > 0.0:
            raise ValueError(f"grid spacing must be positive, got {self.l}")
        if self.k < 0:
            raise ValueError(f"grid half-width must be >= 0, got {self.k}")

    @property
    def size(self) -> int:
        return (2 * self.k + 1) ** 2


@dataclass(frozen=True, slots=True)
class CloudSpec:
    center: OrientedPoint
    k: int

    def __post_init__(self) -> None:
        if self.k < 1:
            raise ValueError(f"cloud size must be >= 1, got {self.k}")


@dataclass(frozen=True, slots=True)
class RefinementSpec:
    """Grid spacing ``l``, half-width ``k`` and cloud size (1 for pure grids)."""

    l: float
    k: int
    cloud: int = 1
    clamped: bool = False

    @property
    def per_point(self) -> int:
        return (2 * self.k + 1) ** 2 * self.cloud


def square_grid(spec: GridSpec) -> np.ndarray:
    """``(2k+1)^2`` positions, row-major in ``(i, j)`` with ``i`` the x offset."""
    r = np.arange(-spec.k, spec.k + 1, dtype=np.float64) * spec.l
    ii, jj = np.meshgrid(r, r, indexing="ij")
    return np.column_stack([spec.center[0] + ii.ravel(), spec.center[1] + jj.ravel()])


def angle_cloud(spec: CloudSpec) -> list[OrientedPoint]:
    c = spec.center
    i = np.arange(1, spec.k + 1, dtype=np.float64)
    angles = normalize_angles(c.a + TWO_PI * i / spec.k)
    return [OrientedPoint(c.x, c.y, float(a)) for a in angles]


def _check(h_apr: float, A: float, eps: float) -> None:
    if not (h_apr >= 0.0 and math.isfinite(h_apr)):
        raise ValueError(f"h_apr must be finite and >= 0, got {h_apr}")
    if not A > 1.0:
        raise ValueError(f"A must exceed 1, got {A}")
    if not eps > 0.0:
        raise ValueError(f"eps must be positive, got {eps}")


def grid_params(h_apr: float, A: float, eps: float, metric: Metric | str) -> RefinementSpec:
    """Spacing for the translation / large-diameter schemes."""
    _check(h_apr, A, eps)
    metric = Metric.parse(metric)
    c = A * A - A
    if metric is Metric.L1:
        return RefinementSpec(eps * h_apr / c, math.ceil(c / eps))
    return RefinementSpec(SQRT2 * eps * h_apr / c, math.ceil(c / (SQRT2 * eps)))


def cloud_size(h_apr: float, A: float, eps: float, metric: Metric | str,
               min_step: float = MIN_ANGULAR_STEP) -> tuple[int, bool]:
    """Number of cloud orientations and whether it was clamped."""
    _check(h_apr, A, eps)
    metric = Metric.parse(metric)
    c = A * A - A
    cap = math.ceil(TWO_PI / min_step)
    if h_apr == 0.0:
        return cap, True
    if metric is Metric.L1:
        k = math.ceil(TWO_PI * c / (eps * h_apr))
    else:
        k = math.ceil(SQRT2 * math.pi * c / (eps * h_apr))
    if k > cap:
        warnings.warn(f"angular cloud size {k} clamped to {cap}", CloudClampWarning, stacklevel=3)
        return cap, True
    return max(k, 1), False


def grid_cloud_params(h_apr: float, A: float, eps: float, metric: Metric | str,
                      min_step: float = MIN_ANGULAR_STEP) -> RefinementSpec:
    """Spacing and cloud size for the small-diameter schemes."""
    _check(h_apr, A, eps)
    metric = Metric.parse(metric)
    c = A * A - A
    if metric is Metric.L1:
        l, k = eps * h_apr / (2.0 * c), math.ceil(2.0 * c / eps)
    else:
        l, k = eps * h_apr / c, math.ceil(c / eps)
    K, clamped = cloud_size(h_apr, A, eps, metric, min_step)
    return RefinementSpec(l, k, K, clamped)


def _guard(total: int) -> None:
    if total > MAX_MATERIALIZED:
        raise MemoryError(f"expansion would hold {total} points; the matchers search it implicitly instead")


def expand_grid(B, h_apr: float, A: float, eps: float, metric: Metric | str) -> PointSet:
    """Replace each background point by its grid; points keep the source orientation."""
    B = as_pointset(B)
    if h_apr == 0.0:
        return B
    spec = grid_params(h_apr, A, eps, metric)
    _guard(len(B) * spec.per_point)
    off = np.arange(-spec.k, spec.k + 1, dtype=np.float64) * spec.l
    ii, jj = np.meshgrid(off, off, indexing="ij")
    ii, jj = ii.ravel(), jj.ravel()
    d = B.data
    out = np.empty((len(B), ii.size, 3))
    out[:, :, 0] = d[:, None, 0] + ii[None, :]
    out[:, :, 1] = d[:, None, 1] + jj[None, :]
    out[:, :, 2] = d[:, None, 2]
    return PointSet(out.reshape(-1, 3), role=B.role)


def expand_grid_cloud(B, h_apr: float, A: float, eps: float, metric: Metric | str,
                      min_step: float = MIN_ANGULAR_STEP) -> PointSet:
    """Grid with halved spacing, each grid point replaced by an angle cloud."""
    B = as_pointset(B)
    if h_apr == 0.0:
        return B
    spec = grid_cloud_params(h_apr, A, eps, metric, min_step)
    _guard(len(B) * spec.per_point)
    off = np.arange(-spec.k, spec.k + 1, dtype=np.float64) * spec.l
    ii, jj = np.meshgrid(off, off, indexing="ij")
    ii, jj = ii.ravel(), jj.ravel()
    steps = TWO_PI * np.arange(1, spec.cloud + 1, dtype=np.float64) / spec.cloud
    d = B.data
    G = ii.size
    out = np.empty((len(B), G, spec.cloud, 3))
    out[:, :, :, 0] = (d[:, None, 0] + ii[None, :])[:, :, None]
    out[:, :, :, 1] = (d[:, None, 1] + jj[None, :])[:, :, None]
    out[:, :, :, 2] = normalize_angles(d[:, None, None, 2] + steps[None, None, :])
    return PointSet(out.reshape(-1, 3), role=B.role)
