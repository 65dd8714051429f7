"""Oriented point sets, the cylinder metrics and similarity transforms.

Points are ``(x, y, a)`` triples with the orientation ``a`` kept in
``[0, 2*pi)``.  Sets are stored as read-only ``(n, 3)`` float64 arrays so the
numeric kernels can consume them without copies.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

import numpy as np

TWO_PI = 2.0 * math.pi


class EmptySetError(ValueError):
    """Raised when an operation needs a non-empty point set."""


class Metric(str, enum.Enum):
    L1 = "l1"
    L2 = "l2"

    @classmethod
    def parse(cls, value: "Metric | str") -> "Metric":
        if isinstance(value, Metric):
            return value
        v = str(value).lower()
        aliases = {"l1": cls.L1, "h1": cls.L1, "mu1": cls.L1, "l2": cls.L2, "h2": cls.L2, "mu2": cls.L2}
        try:
            return aliases[v]
        except KeyError:
            raise ValueError(f"unknown metric {value!r}") from None

    @property
    def code(self) -> int:
        return 0 if self is Metric.L1 else 1


def normalize_angle(a: float) -> float:
    """Reduce ``a`` into ``[0, 2*pi)``; mirrors the compiled kernel bit for bit."""
    r = math.fmod(a, TWO_PI)
    if r < 0.0:
        r += TWO_PI
    if r >= TWO_PI:
        r = 0.0
    return r


def normalize_angles(a: np.ndarray) -> np.ndarray:
    r = np.fmod(np.asarray(a, dtype=np.float64), TWO_PI)
    r = np.where(r < 0.0, r + TWO_PI, r)
    return np.where(r >= TWO_PI, 0.0, r)


@dataclass(frozen=True, slots=True)
class OrientedPoint:
    x: float
    y: float
    a: float

    def __post_init__(self) -> None:
        x, y, a = float(self.x), float(self.y), float(self.a)
        if not (math.isfinite(x) and math.isfinite(y) and math.isfinite(a)):
            raise ValueError(f"non-finite oriented point ({x}, {y}, {a})")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "a", normalize_angle(a))

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.x, self.y, self.a)


class PointSet(Sequence[OrientedPoint]):
    """Ordered, immutable collection of oriented points.

    ``role`` is a free tag (``"pattern"``/``"background"``) carried for
    diagnostics only.
    """

    __slots__ = ("_data", "role")

    def __init__(self, data: "np.ndarray | Iterable", role: str = "background") -> None:
        arr = np.array(_rows(data), dtype=np.float64, copy=True)
        if arr.size == 0:
            arr = arr.reshape(0, 3)
        if arr.ndim != 2 or arr.shape[1] != 3:
            raise ValueError(f"expected an (n, 3) array of (x, y, a), got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("point set contains non-finite values")
        arr[:, 2] = normalize_angles(arr[:, 2])
        arr.setflags(write=False)
        self._data = arr
        self.role = role

    @classmethod
    def from_points(cls, points: Iterable, role: str = "background") -> "PointSet":
        return cls(list(points), role=role)

    @property
    def data(self) -> np.ndarray:
        return self._data

    @property
    def xy(self) -> np.ndarray:
        return self._data[:, :2]

    @property
    def angles(self) -> np.ndarray:
        return self._data[:, 2]

    def __len__(self) -> int:
        return self._data.shape[0]

    def __getitem__(self, i):  # type: ignore[override]
        if isinstance(i, slice):
            return PointSet(self._data[i], role=self.role)
        x, y, a = self._data[i]
        return OrientedPoint(x, y, a)

    def __iter__(self) -> Iterator[OrientedPoint]:
        for x, y, a in self._data:
            yield OrientedPoint(x, y, a)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, PointSet):
            return NotImplemented
        return self._data.shape == other._data.shape and bool(np.array_equal(self._data, other._data))

    def __hash__(self) -> int:
        return hash(self._data.tobytes())

    def __repr__(self) -> str:
        return f"PointSet(n={len(self)}, role={self.role!r})"

    def require_nonempty(self, what: str = "point set") -> "PointSet":
        if len(self) == 0:
            raise EmptySetError(f"{what} is empty")
        return self


def _rows(data):
    if isinstance(data, PointSet):
        return data.data
    if isinstance(data, np.ndarray):
        return data
    return [p.as_tuple() if isinstance(p, OrientedPoint) else tuple(p) for p in data]


def as_pointset(data, role: str = "background") -> PointSet:
    if isinstance(data, PointSet):
        return data
    return PointSet(data, role=role)


def angular_distance(a1: float, a2: float) -> float:
    d = abs(a1 - a2)
    return min(d, TWO_PI - d)


def mu(metric: Metric | str, p, q) -> float:
    """Distance between two oriented points under the L1- or L2-style cylinder metric."""
    metric = Metric.parse(metric)
    p = p if isinstance(p, OrientedPoint) else OrientedPoint(*p)
    q = q if isinstance(q, OrientedPoint) else OrientedPoint(*q)
    dx = abs(p.x - q.x)
    dy = abs(p.y - q.y)
    da = angular_distance(p.a, q.a)
    if metric is Metric.L1:
        return dx + dy + da
    return math.sqrt(dx * dx + dy * dy + da * da)


def pairwise_mu(metric: Metric | str, P: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Dense ``(len(P), len(B))`` matrix of metric distances (brute force)."""
    metric = Metric.parse(metric)
    P = np.asarray(P, dtype=np.float64)
    B = np.asarray(B, dtype=np.float64)
    dx = np.abs(P[:, None, 0] - B[None, :, 0])
    dy = np.abs(P[:, None, 1] - B[None, :, 1])
    da = np.abs(P[:, None, 2] - B[None, :, 2])
    da = np.minimum(da, TWO_PI - da)
    if metric is Metric.L1:
        return dx + dy + da
    return np.sqrt(dx * dx + dy * dy + da * da)


@dataclass(frozen=True, slots=True)
class SimilarityTransform:
    """``(x, y, a) -> (s * R(theta) @ (x, y) + t, a + theta mod 2*pi)``."""

    theta: float = 0.0
    scale: float = 1.0
    tx: float = 0.0
    ty: float = 0.0

    def __post_init__(self) -> None:
        vals = (float(self.theta), float(self.scale), float(self.tx), float(self.ty))
        if not all(math.isfinite(v) for v in vals):
            raise ValueError(f"non-finite transform parameters {vals}")
        if vals[1] <= 0.0:
            raise ValueError(f"scale must be positive, got {vals[1]}")
        object.__setattr__(self, "theta", normalize_angle(vals[0]))
        object.__setattr__(self, "scale", vals[1])
        object.__setattr__(self, "tx", vals[2])
        object.__setattr__(self, "ty", vals[3])

    @classmethod
    def identity(cls) -> "SimilarityTransform":
        return cls()

    @classmethod
    def translation(cls, vx: float, vy: float) -> "SimilarityTransform":
        return cls(0.0, 1.0, vx, vy)

    @classmethod
    def translate_point_to(cls, p, b) -> "SimilarityTransform":
        return cls.translation(b[0] - p[0], b[1] - p[1])

    @classmethod
    def rotation_about(cls, c, theta: float) -> "SimilarityTransform":
        co, si = math.cos(theta), math.sin(theta)
        cx, cy = c[0], c[1]
        return cls(theta, 1.0, cx - (co * cx - si * cy), cy - (si * cx + co * cy))

    @classmethod
    def scaling_about(cls, c, s: float) -> "SimilarityTransform":
        cx, cy = c[0], c[1]
        return cls(0.0, s, cx - s * cx, cy - s * cy)

    def then(self, other: "SimilarityTransform") -> "SimilarityTransform":
        """Transform equal to applying ``self`` first, then ``other``."""
        co, si = math.cos(other.theta), math.sin(other.theta)
        tx = other.scale * (co * self.tx - si * self.ty) + other.tx
        ty = other.scale * (si * self.tx + co * self.ty) + other.ty
        return SimilarityTransform(self.theta + other.theta, self.scale * other.scale, tx, ty)

    def inverse(self) -> "SimilarityTransform":
        co, si = math.cos(-self.theta), math.sin(-self.theta)
        inv_s = 1.0 / self.scale
        tx = -inv_s * (co * self.tx - si * self.ty)
        ty = -inv_s * (si * self.tx + co * self.ty)
        return SimilarityTransform(-self.theta, inv_s, tx, ty)

    def apply_point(self, p) -> OrientedPoint:
        x, y, a = (p.x, p.y, p.a) if isinstance(p, OrientedPoint) else p
        co, si = math.cos(self.theta), math.sin(self.theta)
        s = self.scale
        return OrientedPoint(s * (co * x - si * y) + self.tx, s * (si * x + co * y) + self.ty, normalize_angle(a + self.theta))

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.theta, self.scale, self.tx, self.ty)


def apply_transform_array(E: SimilarityTransform, data: np.ndarray) -> np.ndarray:
    # Same operation order as the compiled kernel so results match exactly.
    co, si = math.cos(E.theta), math.sin(E.theta)
    s = E.scale
    x = data[:, 0]
    y = data[:, 1]
    out = np.empty_like(data, dtype=np.float64)
    out[:, 0] = s * (co * x - si * y) + E.tx
    out[:, 1] = s * (si * x + co * y) + E.ty
    out[:, 2] = normalize_angles(data[:, 2] + E.theta)
    return out


def apply_transform(E: SimilarityTransform, P) -> PointSet:
    P = as_pointset(P, role="pattern")
    return PointSet(apply_transform_array(E, P.data), role=P.role)


def directed_hausdorff(P, B, metric: Metric | str, nn=None) -> float:
    """``max_p min_b mu(p, b)``.

    ``nn=None`` uses an exact linear scan; otherwise ``nn`` must be an
    :class:`~opmatch.ann.OrientedNnIndex` built over ``B``.
    """
    P = as_pointset(P, role="pattern").require_nonempty("pattern")
    B = as_pointset(B).require_nonempty("background")
    metric = Metric.parse(metric)
    if nn is None:
        best = np.inf * np.ones(len(P))
        for lo in range(0, len(B), 4096):
            best = np.minimum(best, pairwise_mu(metric, P.data, B.data[lo:lo + 4096]).min(axis=1))
        return float(best.max())
    return nn.hausdorff(P.data, SimilarityTransform.identity())


HULL_THRESHOLD = 2048


def convex_hull_indices(xy: np.ndarray) -> np.ndarray:
    """Indices of the convex hull vertices (monotone chain, collinear points dropped)."""
    xy = np.asarray(xy, dtype=np.float64)
    order = np.lexsort((xy[:, 1], xy[:, 0]))
    if len(order) <= 2:
        return order

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    def chain(idx):
        out: list[int] = []
        for i in idx:
            while len(out) >= 2 and cross(xy[out[-2]], xy[out[-1]], xy[i]) <= 0.0:
                out.pop()
            out.append(int(i))
        return out

    lower = chain(order)
    upper = chain(order[::-1])
    return np.array(lower[:-1] + upper[:-1], dtype=np.int64)


def _diameter_brute(xy: np.ndarray, ids: np.ndarray) -> tuple[int, int, float]:
    best = (-1.0, 0, 0)
    for a in range(len(ids) - 1):
        i = ids[a]
        rest = ids[a + 1:]
        d = np.hypot(xy[rest, 0] - xy[i, 0], xy[rest, 1] - xy[i, 1])
        j = int(np.argmax(d))
        if d[j] > best[0]:
            best = (float(d[j]), int(i), int(rest[j]))
    return best[1], best[2], best[0]


def diameter_pair(P, method: str = "auto") -> tuple[int, int, float]:
    """Indices of the two points farthest apart (positions only) and their distance.

    ``method`` is ``"brute"`` (all pairs; ties go to the lexicographically
    smallest index pair), ``"hull"`` (pairs of hull vertices only) or
    ``"auto"`` (hull above ``HULL_THRESHOLD`` points).
    """
    P = as_pointset(P, role="pattern").require_nonempty("pattern")
    xy = P.xy
    m = len(xy)
    if m == 1:
        return 0, 0, 0.0
    if method not in ("auto", "brute", "hull"):
        raise ValueError(f"unknown diameter method {method!r}")
    if method == "hull" or (method == "auto" and m > HULL_THRESHOLD):
        ids = np.sort(convex_hull_indices(xy))
        if len(ids) < 2:
            # all points coincide
            return 0, 1, 0.0
    else:
        ids = np.arange(m)
    i, j, D = _diameter_brute(xy, ids)
    if D <= 0.0:
        return 0, 1, 0.0
    return i, j, D


def max_radius_from(P, idx: int) -> float:
    xy = as_pointset(P).xy
    return float(np.hypot(xy[:, 0] - xy[idx, 0], xy[:, 1] - xy[idx, 1]).max())
