"""Pure-Python kernels; the reference the compiled module must match exactly.

Metric codes: 0 = L1 cylinder, 1 = L2 cylinder, 2 = planar L2 (angles ignored).
"""
from __future__ import annotations

import math

import numpy as np

TWO_PI = 2.0 * math.pi
INF = math.inf


def _norm_angle(a: float) -> float:
    r = math.fmod(a, TWO_PI)
    if r < 0.0:
        r += TWO_PI
    if r >= TWO_PI:
        r = 0.0
    return r


class Kernel:
    def __init__(self, pts, orig, start, end, left, right, lo, hi, bg, metric_code: int, eps: float):
        self.pts = [tuple(map(float, row)) for row in pts]
        self.orig = [int(v) for v in orig]
        self.start = [int(v) for v in start]
        self.end = [int(v) for v in end]
        self.left = [int(v) for v in left]
        self.right = [int(v) for v in right]
        self.lo = [tuple(map(float, row)) for row in lo]
        self.hi = [tuple(map(float, row)) for row in hi]
        self.bg = [tuple(map(float, row)) for row in bg]
        self.metric = int(metric_code)
        self.eps = float(eps)
        f = 1.0 + self.eps
        self.factor = f if self.metric == 0 else f * f

    def _boxdist(self, node: int, qx: float, qy: float, qa: float) -> float:
        lo = self.lo[node]
        hi = self.hi[node]
        q = (qx, qy, qa)
        acc = 0.0
        ndim = 2 if self.metric == 2 else 3
        for d in range(ndim):
            v = q[d]
            if v < lo[d]:
                g = lo[d] - v
            elif v > hi[d]:
                g = v - hi[d]
            else:
                g = 0.0
            if self.metric == 0:
                acc += g
            else:
                acc += g * g
        return acc

    def _query(self, qx: float, qy: float, qa: float) -> tuple[int, float]:
        metric = self.metric
        if metric == 2:
            qa = 0.0
        pts = self.pts
        orig = self.orig
        left = self.left
        f = self.factor
        best = INF
        bj = -1
        stack = [(0, self._boxdist(0, qx, qy, qa))]
        while stack:
            node, bd = stack.pop()
            if bd * f > best:
                continue
            if left[node] < 0:
                for j in range(self.start[node], self.end[node]):
                    px, py, pa = pts[j]
                    dx = qx - px
                    dy = qy - py
                    if metric == 0:
                        d = abs(dx) + abs(dy) + abs(qa - pa)
                    elif metric == 1:
                        da = qa - pa
                        d = dx * dx + dy * dy + da * da
                    else:
                        d = dx * dx + dy * dy
                    if d < best or (d == best and orig[j] < orig[bj]):
                        best = d
                        bj = j
            else:
                ln = left[node]
                rn = self.right[node]
                dl = self._boxdist(ln, qx, qy, qa)
                dr = self._boxdist(rn, qx, qy, qa)
                if dl <= dr:
                    stack.append((rn, dr))
                    stack.append((ln, dl))
                else:
                    stack.append((ln, dl))
                    stack.append((rn, dr))
        b = orig[bj]
        bx, by, ba = self.bg[b]
        dx = abs(qx - bx)
        dy = abs(qy - by)
        if metric == 2:
            return b, math.sqrt(dx * dx + dy * dy)
        da = abs(qa - ba)
        if TWO_PI - da < da:
            da = TWO_PI - da
        if metric == 0:
            return b, dx + dy + da
        return b, math.sqrt(dx * dx + dy * dy + da * da)

    def query_many(self, q):
        q = np.asarray(q, dtype=np.float64)
        k = q.shape[0]
        idx = np.empty(k, dtype=np.int64)
        dist = np.empty(k, dtype=np.float64)
        for i in range(k):
            idx[i], dist[i] = self._query(float(q[i, 0]), float(q[i, 1]), float(q[i, 2]))
        return idx, dist

    def hausdorff_batch(self, pattern, theta, scale, tx, ty, sa, sb, sang, rho, incumbent: float,
                        prune: bool, update: bool, rel: float = 1.0):
        """Directed Hausdorff value of every candidate transform, with early exit.

        Point ``i`` of candidate ``k`` is granted the slack
        ``combine(sa[k] + sb[k] * rho[i], sang[k])`` (sum for code 0,
        Euclidean norm otherwise).  A candidate is abandoned (value ``inf``)
        as soon as one point's distance reaches ``best * rel`` plus its slack;
        ``best`` starts at ``incumbent`` and, when ``update`` is set, drops to
        every strictly smaller completed value.  Returns
        ``(h, best, best_k, queries)``.
        """
        pat = [tuple(map(float, row)) for row in np.asarray(pattern)]
        rh = [float(v) for v in rho]
        m = len(pat)
        kk = len(theta)
        h = np.empty(kk, dtype=np.float64)
        order = list(range(m))
        best = float(incumbent)
        best_k = -1
        nq = 0
        l1 = self.metric == 0
        for k in range(kk):
            th = float(theta[k])
            c = math.cos(th)
            sn = math.sin(th)
            s = float(scale[k])
            tk_x = float(tx[k])
            tk_y = float(ty[k])
            a0 = float(sa[k])
            b0 = float(sb[k])
            g0 = float(sang[k])
            base = best * rel if prune else INF
            cur = 0.0
            abandoned = False
            for ii in range(m):
                i = order[ii]
                x, y, a = pat[i]
                X = s * (c * x - sn * y) + tk_x
                Y = s * (sn * x + c * y) + tk_y
                A = _norm_angle(a + th)
                _, d = self._query(X, Y, A)
                nq += 1
                if d > cur:
                    cur = d
                pos = a0 + b0 * rh[i]
                if l1:
                    sl = pos + g0
                else:
                    sl = math.sqrt(pos * pos + g0 * g0)
                if d >= base + sl:
                    abandoned = True
                    order[0], order[ii] = order[ii], order[0]
                    break
            if abandoned:
                h[k] = INF
            else:
                h[k] = cur
                if update and cur < best:
                    best = cur
                    best_k = k
        return h, best, best_k, nq
