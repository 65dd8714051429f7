"""Implicit search over the refined candidate sets of the (1+eps) schemes.

The refined candidate sets are products of grids (and angle clouds) around
background points; materializing them is hopeless beyond toy sizes.  They
are searched instead by branch and bound over integer index boxes:

* a cell is a box of grid / cloud offsets for one background point (or one
  ordered pair of background points);
* its representative is the candidate at the box midpoint;
* ``delta`` bounds how far (in the cylinder metric) each pattern point ``x``
  can move when the representative is replaced by another candidate of the
  cell: ``sa + sb * |x - pin|`` in position and ``sang`` in angle.  Hence
  ``h(E) >= d(E_rep x, B) - delta_x`` for every ``E`` in the cell and every
  ``x``;
* a cell is discarded once some ``x`` has ``d(E_rep x, B) >= best * rel + delta_x``.

With an exact index this returns a candidate within a factor ``1/rel`` of
the best candidate of the full set.  Cells that cannot be discarded are
halved along their widest weighted dimension until they are single
candidates.
"""
from __future__ import annotations

import math

import numpy as np

from .ann import Evaluator
from .geometry import TWO_PI, Metric, normalize_angles

SQRT2 = math.sqrt(2.0)
# inflation of every displacement bound, absorbing floating-point rounding
SAFETY_REL = 1e-9
SAFETY_ABS = 1e-12
COLLAPSE_DIRECTIONS = 64


def _slack(metric: Metric, trans_l1, trans_l2, lever, ang):
    """Per-point displacement bound ``(sa, sb, sang)``.

    ``trans_*`` bound the common translation part (L1 / L2), ``lever`` the
    L2 displacement per unit distance from the pin, ``ang`` the rotation.
    """
    n = np.shape(trans_l2)
    if metric is Metric.L1:
        sa, sb = trans_l1, SQRT2 * np.asarray(lever)
    else:
        sa, sb = trans_l2, np.asarray(lever)
    f = 1.0 + SAFETY_REL
    return (
        np.broadcast_to(np.asarray(sa) * f + SAFETY_ABS, n),
        np.broadcast_to(sb * f, n),
        np.broadcast_to(np.asarray(ang) * f, n),
    )


def _half_extent(lo, hi, rep):
    return np.maximum(rep - lo, hi - rep)


def cloud_range(K: int) -> tuple[int, int]:
    """Offsets for a cloud of ``K`` orientations whose midpoint is offset 0."""
    a = -((K - 1) // 2)
    return a, a + K - 1


class Scheme:
    """Base class; subclasses describe one family of refined candidates."""

    ndim: int
    weights: np.ndarray

    def __init__(self, metric: Metric, pattern: np.ndarray, background: np.ndarray, pin: int):
        self.metric = metric
        self.P = pattern
        self.B = background
        d = pattern[:, :2] - pattern[pin, :2]
        self.rho = np.hypot(d[:, 0], d[:, 1])

    # hooks ----------------------------------------------------------------
    def roots(self) -> np.ndarray:
        raise NotImplementedError

    def keep(self, cells, rep) -> np.ndarray:
        return np.ones(len(cells), dtype=bool)

    def skip_leaf(self, cells, rep) -> np.ndarray:
        return np.zeros(len(cells), dtype=bool)

    def collapsed(self, cells, rep) -> np.ndarray:
        return np.zeros(len(cells), dtype=bool)

    def lb_only(self, cells, rep) -> np.ndarray:
        """Cells whose representative is not itself a candidate."""
        return np.zeros(len(cells), dtype=bool)

    def params(self, cells, rep, continuous: bool = False):
        raise NotImplementedError

    def delta(self, cells, rep):
        """Per-point slack triple ``(sa, sb, sang)`` for non-leaf cells."""
        raise NotImplementedError

    def extents(self, cells, rep) -> np.ndarray:
        """Weighted extent per dimension; cells are halved along the largest."""
        return (cells[:, 3::2] - cells[:, 2::2]) * self.weights[None, :]

    def size(self) -> int:
        """Closed-form size of the candidate set being searched."""
        raise NotImplementedError

    # helpers --------------------------------------------------------------
    def _grid(self, b, ri, rj, l):
        return self.B[b, 0] + ri * l, self.B[b, 1] + rj * l

    def _grid_radius(self, cells, rep, col_i, l):
        lo = cells[:, 2 + 2 * col_i]
        hi = cells[:, 3 + 2 * col_i]
        ei = _half_extent(lo, hi, rep[:, col_i])
        lo = cells[:, 4 + 2 * col_i]
        hi = cells[:, 5 + 2 * col_i]
        ej = _half_extent(lo, hi, rep[:, col_i + 1])
        return (ei + ej) * l, np.hypot(ei, ej) * l


def _transform_pin(gx, gy, theta, s, px, py):
    """Canonical parameters of: rotate/scale about ``p`` then move ``p`` to ``g``."""
    c = np.cos(theta)
    sn = np.sin(theta)
    tx = gx - s * (c * px - sn * py)
    ty = gy - s * (sn * px + c * py)
    return tx, ty


def _cells(b, b2, ranges) -> np.ndarray:
    b = np.asarray(b, dtype=np.int64)
    n = b.shape[0]
    out = np.empty((n, 2 + 2 * len(ranges)), dtype=np.int64)
    out[:, 0] = b
    out[:, 1] = b2
    for d, (lo, hi) in enumerate(ranges):
        out[:, 2 + 2 * d] = lo
        out[:, 3 + 2 * d] = hi
    return out


class TransGrid(Scheme):
    """Pin pattern point ``pin`` onto every grid point; translations only."""

    ndim = 2

    def __init__(self, metric, pattern, background, pin: int, l: float, k: int):
        super().__init__(metric, pattern, background, pin)
        self.pin, self.l, self.k = pin, l, k
        self.weights = np.array([l, l])

    def roots(self):
        n = self.B.shape[0]
        k = self.k
        return _cells(np.arange(n), 0, [(-k, k), (-k, k)])

    def size(self):
        return self.B.shape[0] * (2 * self.k + 1) ** 2

    def params(self, cells, rep, continuous=False):
        gx, gy = self._grid(cells[:, 0], rep[:, 0], rep[:, 1], self.l)
        p = self.P[self.pin]
        N = len(cells)
        return np.zeros(N), np.ones(N), gx - p[0], gy - p[1]

    def delta(self, cells, rep):
        r1, r2 = self._grid_radius(cells, rep, 0, self.l)
        return _slack(self.metric, r1, r2, 0.0, 0.0)


class PinCloud(Scheme):
    """Pin ``pin`` onto each grid point, rotated to each cloud orientation."""

    ndim = 3

    def __init__(self, metric, pattern, background, pin: int, l: float, k: int, K: int):
        super().__init__(metric, pattern, background, pin)
        self.pin, self.l, self.k, self.K = pin, l, k, K
        self.R0 = float(self.rho.max())
        self.weights = np.array([l, l, TWO_PI / K * max(self.R0, 1.0)])

    def roots(self):
        n = self.B.shape[0]
        k = self.k
        return _cells(np.arange(n), 0, [(-k, k), (-k, k), cloud_range(self.K)])

    def size(self):
        return self.B.shape[0] * (2 * self.k + 1) ** 2 * self.K

    def params(self, cells, rep, continuous=False):
        b = cells[:, 0]
        gx, gy = self._grid(b, rep[:, 0], rep[:, 1], self.l)
        p = self.P[self.pin]
        theta = normalize_angles(self.B[b, 2] + TWO_PI * rep[:, 2] / self.K - p[2])
        s = np.ones(len(cells))
        tx, ty = _transform_pin(gx, gy, theta, s, p[0], p[1])
        return theta, s, tx, ty

    def delta(self, cells, rep):
        r1, r2 = self._grid_radius(cells, rep, 0, self.l)
        eo = _half_extent(cells[:, 6], cells[:, 7], rep[:, 2])
        dphi = np.minimum(TWO_PI * eo / self.K, math.pi)
        return _slack(self.metric, r1, r2, 2.0 * np.sin(dphi / 2.0), dphi)


class _PairBase(Scheme):
    """Pairs ``(g, g2)`` of grid points around background points ``b``, ``b2``."""

    def __init__(self, metric, pattern, background, p: int, q: int, l: float, k: int):
        super().__init__(metric, pattern, background, p)
        self.p, self.q, self.l, self.k = p, q, l, k
        dq = pattern[q, :2] - pattern[p, :2]
        self.D = float(math.hypot(dq[0], dq[1]))
        self.phi = math.atan2(dq[1], dq[0])

    def _pair_roots(self, extra=()):
        n = self.B.shape[0]
        k = self.k
        b, b2 = np.divmod(np.arange(n * n, dtype=np.int64), n)
        return _cells(b, b2, [(-k, k), (-k, k), *extra, (-k, k), (-k, k)])

    def _points(self, cells, rep, i2col):
        gx, gy = self._grid(cells[:, 0], rep[:, 0], rep[:, 1], self.l)
        hx, hy = self._grid(cells[:, 1], rep[:, i2col], rep[:, i2col + 1], self.l)
        return gx, gy, hx, hy


class PairRigid(_PairBase):
    """Pin ``p`` onto ``g``, rotate about it so ``q`` lies on the ray toward ``g2``."""

    ndim = 4

    def __init__(self, metric, pattern, background, p, q, l, k):
        super().__init__(metric, pattern, background, p, q, l, k)
        self.weights = np.array([l, l, l, l])
        # both pinned images of a rigid optimum are within l/sqrt(2) of a grid point
        self.tol = SQRT2 * l * (1.0 + SAFETY_REL) + SAFETY_ABS

    def roots(self):
        return self._pair_roots()

    def size(self):
        return (self.B.shape[0] * (2 * self.k + 1) ** 2) ** 2

    def _radii(self, cells, rep):
        r1a, r1 = self._grid_radius(cells, rep, 0, self.l)
        r2a, r2 = self._grid_radius(cells, rep, 2, self.l)
        return r1a, r1, r2a, r2

    def keep(self, cells, rep):
        gx, gy, hx, hy = self._points(cells, rep, 2)
        L0 = np.hypot(hx - gx, hy - gy)
        _, r1, _, r2 = self._radii(cells, rep)
        spread = (r1 + r2) * (1.0 + SAFETY_REL)
        return (L0 - spread <= self.D + self.tol) & (L0 + spread >= self.D - self.tol)

    def params(self, cells, rep, continuous=False):
        gx, gy, hx, hy = self._points(cells, rep, 2)
        vx, vy = hx - gx, hy - gy
        zero = (vx == 0.0) & (vy == 0.0)
        theta = np.where(zero, 0.0, normalize_angles(np.arctan2(vy, vx) - self.phi))
        s = np.ones(len(cells))
        p = self.P[self.p]
        tx, ty = _transform_pin(gx, gy, theta, s, p[0], p[1])
        return theta, s, tx, ty

    def delta(self, cells, rep):
        gx, gy, hx, hy = self._points(cells, rep, 2)
        L0 = np.hypot(hx - gx, hy - gy)
        r1a, r1, r2a, r2 = self._radii(cells, rep)
        rr = r1 + r2
        with np.errstate(divide="ignore", invalid="ignore"):
            dphi = np.where(L0 > rr, np.arcsin(np.minimum(1.0, rr / np.where(L0 > 0, L0, 1.0))), math.pi)
        return _slack(self.metric, r1a, r1, 2.0 * np.sin(dphi / 2.0), dphi)


class PairScale(_PairBase):
    """As :class:`PairRigid`, additionally scaling about ``p`` so ``q`` lands on ``g2``."""

    ndim = 4

    def __init__(self, metric, pattern, background, p, q, l, k, directions: int = COLLAPSE_DIRECTIONS):
        super().__init__(metric, pattern, background, p, q, l, k)
        self.weights = np.array([l, l, l, l])
        self.J = directions

    def roots(self):
        return self._pair_roots()

    def size(self):
        return (self.B.shape[0] * (2 * self.k + 1) ** 2) ** 2

    def _geom(self, cells, rep):
        gx, gy, hx, hy = self._points(cells, rep, 2)
        L0 = np.hypot(hx - gx, hy - gy)
        r1a, r1 = self._grid_radius(cells, rep, 0, self.l)
        r2a, r2 = self._grid_radius(cells, rep, 2, self.l)
        return gx, gy, L0, r1a, r1, r2a, r2

    def skip_leaf(self, cells, rep):
        # coincident pins give the plain translation, searched by TransGrid
        _, _, L0, *_ = self._geom(cells, rep)
        return L0 == 0.0

    def collapsed(self, cells, rep):
        _, _, L0, _, r1, _, r2 = self._geom(cells, rep)
        return L0 <= r1 + r2

    def params(self, cells, rep, continuous=False):
        gx, gy, hx, hy = self._points(cells, rep, 2)
        vx, vy = hx - gx, hy - gy
        L = np.hypot(vx, vy)
        zero = L == 0.0
        theta = np.where(zero, 0.0, normalize_angles(np.arctan2(vy, vx) - self.phi))
        s = np.where(zero, 1.0, L / self.D)
        p = self.P[self.p]
        tx, ty = _transform_pin(gx, gy, theta, s, p[0], p[1])
        return theta, s, tx, ty

    def delta(self, cells, rep):
        _, _, L0, r1a, r1, r2a, r2 = self._geom(cells, rep)
        rr = r1 + r2
        with np.errstate(divide="ignore", invalid="ignore"):
            dphi = np.where(L0 > rr, np.arcsin(np.minimum(1.0, rr / np.where(L0 > 0, L0, 1.0))), math.pi)
        # |E(x) - E_rep(x)| <= |dg| + |dv| |x - p| / D  (complex-linear form)
        return _slack(self.metric, r1a, r1, rr / self.D, dphi)

    def collapse_configs(self, cells, rep):
        """Every candidate of a near-diagonal cell maps the whole pattern into a
        small disc around ``g_rep``; compare against ``J`` fully collapsed
        configurations with evenly spaced rotations."""
        gx, gy, L0, r1a, r1, r2a, r2 = self._geom(cells, rep)
        J = self.J
        # E(x) = g + v (x - p) / (q - p) with |v| <= L0 + r1 + r2
        sa, sb, sang = _slack(self.metric, r1a, r1, (L0 + r1 + r2) / self.D, np.full(len(cells), math.pi / J))
        thetas = TWO_PI * np.arange(J) / J
        N = len(cells)
        th = np.tile(thetas, N)
        slack = (np.repeat(sa, J), np.repeat(sb, J), np.repeat(sang, J))
        return th, np.zeros(N * J), np.repeat(gx, J), np.repeat(gy, J), slack


class CloudScale(_PairBase):
    """Pin ``p`` onto ``g`` with a cloud orientation, scale so the diameter equals ``|g - g2|``.

    The transform depends on ``g2`` only through ``L = |g - g2|``, so the
    second background point is searched by its rank in the distance order
    around ``b``: a cell spanning several ranks covers an interval of scales
    and is bounded with a continuous representative scale.
    """

    ndim = 6

    def __init__(self, metric, pattern, background, p, q, l, k, K):
        super().__init__(metric, pattern, background, p, q, l, k)
        self.K = K
        B = background[:, :2]
        dist = np.hypot(B[:, None, 0] - B[None, :, 0], B[:, None, 1] - B[None, :, 1])
        self.order = np.argsort(dist, axis=1, kind="stable")
        self.dsorted = np.take_along_axis(dist, self.order, axis=1)

    def roots(self):
        n = self.B.shape[0]
        k = self.k
        return _cells(np.arange(n), 0, [(-k, k), (-k, k), cloud_range(self.K), (0, n - 1), (-k, k), (-k, k)])

    def size(self):
        # literal count: both pins range over the full expanded set
        return (self.B.shape[0] * (2 * self.k + 1) ** 2 * self.K) ** 2

    def _geom(self, cells, rep):
        """Pin position, bounds on the scale numerator ``L`` and grid radii."""
        b = cells[:, 0]
        gx, gy = self._grid(b, rep[:, 0], rep[:, 1], self.l)
        r1a, r1 = self._grid_radius(cells, rep, 0, self.l)
        _, r2 = self._grid_radius(cells, rep, 4, self.l)
        j0, j1 = cells[:, 8], cells[:, 9]
        single = j0 == j1
        b2 = self.order[b, j0]
        hx, hy = self._grid(b2, rep[:, 4], rep[:, 5], self.l)
        L0 = np.where(single, np.hypot(hx - gx, hy - gy), 0.0)
        # several ranks: the second pin is anywhere near the ranked points
        e = np.hypot(gx - self.B[b, 0], gy - self.B[b, 1])
        lmin = np.maximum(0.0, self.dsorted[b, j0] - e - r1 - r2)
        lmax = self.dsorted[b, j1] + e + r1 + r2
        # one rank: exact distance range from g_rep to the second grid box
        x0, y0 = self._grid(b2, cells[:, 10], cells[:, 12], self.l)
        x1, y1 = self._grid(b2, cells[:, 11], cells[:, 13], self.l)
        near = np.hypot(np.maximum.reduce([x0 - gx, gx - x1, np.zeros_like(gx)]),
                        np.maximum.reduce([y0 - gy, gy - y1, np.zeros_like(gy)]))
        far = np.hypot(np.maximum(np.abs(gx - x0), np.abs(gx - x1)), np.maximum(np.abs(gy - y0), np.abs(gy - y1)))
        lo1 = np.maximum(0.0, near - r1)
        hi1 = far + r1
        Lc = np.where(single, L0, 0.5 * (lmin + lmax))
        half = np.where(single, np.maximum(L0 - lo1, hi1 - L0), 0.5 * (lmax - lmin))
        return gx, gy, hx, hy, single, L0, Lc, half, r1a, r1

    def extents(self, cells, rep):
        gx, gy, hx, hy, single, L0, Lc, half, *_ = self._geom(cells, rep)
        ext = (cells[:, 3::2] - cells[:, 2::2]).astype(np.float64)
        ext[:, 0:2] *= self.l
        # angular slack counts once directly and once through the lever
        ext[:, 2] *= TWO_PI / self.K * (1.0 + Lc)
        ext[:, 3] = np.where(single, 0.0, 2.0 * half)
        # the second grid only matters through the radial direction, and
        # only once the rank is fixed
        safe = np.where(L0 > 0.0, L0, 1.0)
        ux = np.where(L0 > 0.0, np.abs(hx - gx) / safe, 1.0)
        uy = np.where(L0 > 0.0, np.abs(hy - gy) / safe, 1.0)
        w = np.where(single, self.l, 0.0)
        ext[:, 4] *= w * ux
        ext[:, 5] *= w * uy
        return ext

    def skip_leaf(self, cells, rep):
        single, L0 = self._geom(cells, rep)[4:6]
        return single & (L0 == 0.0)

    def lb_only(self, cells, rep):
        single, L0 = self._geom(cells, rep)[4:6]
        return ~single | (L0 == 0.0)

    def params(self, cells, rep, continuous=False):
        b = cells[:, 0]
        gx, gy, _, _, single, L0, Lc, *_ = self._geom(cells, rep)
        p = self.P[self.p]
        theta = normalize_angles(self.B[b, 2] + TWO_PI * rep[:, 2] / self.K - p[2])
        if continuous:
            s = Lc / self.D
        else:
            s = np.where(L0 == 0.0, 1.0, L0 / self.D)
        tx, ty = _transform_pin(gx, gy, theta, s, p[0], p[1])
        return theta, s, tx, ty

    def delta(self, cells, rep):
        *_, Lc, half, r1a, r1 = self._geom(cells, rep)
        eo = _half_extent(cells[:, 6], cells[:, 7], rep[:, 2])
        dphi = np.minimum(TWO_PI * eo / self.K, math.pi)
        # |s R - s0 R0| <= |s - s0| + s0 |R - R0|
        lever = (half + 2.0 * Lc * np.sin(dphi / 2.0)) / self.D
        return _slack(self.metric, r1a, r1, lever, dphi)


def _split(cells: np.ndarray, ext: np.ndarray) -> np.ndarray:
    lo = cells[:, 2::2]
    hi = cells[:, 3::2]
    # any splittable dimension beats a zero-weight one
    ext = np.where(hi > lo, np.maximum(ext, 1e-300), -1.0)
    d = np.argmax(ext, axis=1)
    rows = np.arange(len(cells))
    mid = (lo[rows, d] + hi[rows, d]) // 2
    left = cells.copy()
    right = cells.copy()
    left[rows, 3 + 2 * d] = mid
    right[rows, 2 + 2 * d] = mid + 1
    out = np.empty((2 * len(cells), cells.shape[1]), dtype=np.int64)
    out[0::2] = left
    out[1::2] = right
    return out


class SearchState:
    def __init__(self, best: float = np.inf, transform=None):
        self.best = float(best)
        self.transform = transform
        self.levels = 0


def _evaluate(scheme: Scheme, ev: Evaluator, cells, rel: float, state: SearchState):
    """Filter ``cells`` and evaluate their representatives.

    Returns the surviving cells, their leaf mask and the representative
    values (``inf`` once a cell is discarded).
    """
    lo = cells[:, 2::2]
    hi = cells[:, 3::2]
    rep = (lo + hi) // 2
    keep = scheme.keep(cells, rep)
    leaf = np.all(lo == hi, axis=1)
    if leaf.any():
        keep &= ~(leaf & scheme.skip_leaf(cells, rep))
    if not keep.all():
        cells, rep, leaf = cells[keep], rep[keep], leaf[keep]
    h = np.full(len(cells), np.inf)
    if not len(cells):
        return cells, leaf, h

    coll = ~leaf & scheme.collapsed(cells, rep)
    if coll.any():
        idx = np.nonzero(coll)[0]
        th, s, tx, ty, sl = scheme.collapse_configs(cells[idx], rep[idx])
        hc, _, _ = ev.run(th, s, tx, ty, sl, rho=scheme.rho, incumbent=state.best, update=False, rel=rel)
        h[idx] = hc.reshape(len(idx), -1).min(axis=1)

    lbo = ~coll & ~leaf & scheme.lb_only(cells, rep)
    real = ~coll & ~lbo
    for mask, upd in ((lbo, False), (real, True)):
        if not mask.any():
            continue
        idx = np.nonzero(mask)[0]
        c, r = cells[idx], rep[idx]
        th, s, tx, ty = scheme.params(c, r, continuous=not upd)
        lf = leaf[idx]
        sl = tuple(np.where(lf, 0.0, v) for v in scheme.delta(c, r))
        hv, best, pos = ev.run(th, s, tx, ty, sl, rho=scheme.rho, incumbent=state.best, update=upd, rel=rel)
        h[idx] = hv
        if upd and pos >= 0:
            state.best = best
            state.transform = (float(th[pos]), float(s[pos]), float(tx[pos]), float(ty[pos]))
    return cells, leaf, h


def _extents(scheme: Scheme, cells):
    return scheme.extents(cells, (cells[:, 2::2] + cells[:, 3::2]) // 2)


def _dive(scheme: Scheme, ev: Evaluator, cell, rel: float, state: SearchState) -> None:
    """Follow the better child down to a leaf to tighten the incumbent early."""
    cells = cell[None, :]
    while True:
        cells = _split(cells, _extents(scheme, cells))
        cells, leaf, h = _evaluate(scheme, ev, cells, rel, state)
        ok = ~leaf & np.isfinite(h)
        if not ok.any():
            return
        i = np.nonzero(ok)[0]
        cells = cells[i[np.argmin(h[i])]][None, :]


def branch_and_bound(scheme: Scheme, ev: Evaluator, rel: float, state: SearchState) -> SearchState:
    """Search ``scheme`` and tighten ``state`` in place (also returned)."""
    cells = scheme.roots()
    while len(cells):
        state.levels += 1
        cells, leaf, h = _evaluate(scheme, ev, cells, rel, state)
        alive = ~leaf & np.isfinite(h)
        if not alive.any():
            break
        idx = np.nonzero(alive)[0]
        idx = idx[np.argsort(h[idx], kind="stable")]
        cells = cells[idx]
        _dive(scheme, ev, cells[0], rel, state)
        cells = _split(cells, _extents(scheme, cells))
    return state
