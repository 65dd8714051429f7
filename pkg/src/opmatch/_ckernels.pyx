# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels.  Must agree bit for bit with ``_pykernels``."""
import numpy as np
cimport numpy as cnp
import math
from libc.math cimport fabs, sqrt, fmod, INFINITY
from libc.stdlib cimport malloc, free

cnp.import_array()

cdef double TWO_PI = 6.283185307179586


cdef inline double _norm_angle(double a) noexcept nogil:
    cdef double r = fmod(a, TWO_PI)
    if r < 0.0:
        r += TWO_PI
    if r >= TWO_PI:
        r = 0.0
    return r


cdef class Kernel:
    cdef const double[:, ::1] pts
    cdef const long long[::1] orig
    cdef const long long[::1] start
    cdef const long long[::1] end
    cdef const long long[::1] left
    cdef const long long[::1] right
    cdef const double[:, ::1] lo
    cdef const double[:, ::1] hi
    cdef const double[:, ::1] bg
    cdef int metric
    cdef double eps
    cdef double factor

    def __init__(self, pts, orig, start, end, left, right, lo, hi, bg, int metric_code, double eps):
        self.pts = np.ascontiguousarray(pts, dtype=np.float64)
        self.orig = np.ascontiguousarray(orig, dtype=np.int64)
        self.start = np.ascontiguousarray(start, dtype=np.int64)
        self.end = np.ascontiguousarray(end, dtype=np.int64)
        self.left = np.ascontiguousarray(left, dtype=np.int64)
        self.right = np.ascontiguousarray(right, dtype=np.int64)
        self.lo = np.ascontiguousarray(lo, dtype=np.float64)
        self.hi = np.ascontiguousarray(hi, dtype=np.float64)
        self.bg = np.ascontiguousarray(bg, dtype=np.float64)
        self.metric = metric_code
        self.eps = eps
        cdef double f = 1.0 + eps
        self.factor = f if metric_code == 0 else f * f

    cdef inline double _boxdist(self, long long node, double qx, double qy, double qa) noexcept nogil:
        cdef double acc = 0.0
        cdef double g, v
        cdef int d
        cdef int ndim = 2 if self.metric == 2 else 3
        for d in range(ndim):
            if d == 0:
                v = qx
            elif d == 1:
                v = qy
            else:
                v = qa
            if v < self.lo[node, d]:
                g = self.lo[node, d] - v
            elif v > self.hi[node, d]:
                g = v - self.hi[node, d]
            else:
                g = 0.0
            if self.metric == 0:
                acc += g
            else:
                acc += g * g
        return acc

    cdef double _query(self, double qx, double qy, double qa, long long* nstack, double* dstack,
                       long long* out_b) noexcept nogil:
        cdef int metric = self.metric
        cdef double f = self.factor
        cdef double best = INFINITY
        cdef long long bj = -1
        cdef int sp = 0
        cdef long long node, ln, rn, j, b
        cdef double bd, dl, dr, dx, dy, da, d
        if metric == 2:
            qa = 0.0
        nstack[0] = 0
        dstack[0] = self._boxdist(0, qx, qy, qa)
        sp = 1
        while sp > 0:
            sp -= 1
            node = nstack[sp]
            bd = dstack[sp]
            if bd * f > best:
                continue
            if self.left[node] < 0:
                for j in range(self.start[node], self.end[node]):
                    dx = qx - self.pts[j, 0]
                    dy = qy - self.pts[j, 1]
                    if metric == 0:
                        d = fabs(dx) + fabs(dy) + fabs(qa - self.pts[j, 2])
                    elif metric == 1:
                        da = qa - self.pts[j, 2]
                        d = dx * dx + dy * dy + da * da
                    else:
                        d = dx * dx + dy * dy
                    if d < best or (d == best and self.orig[j] < self.orig[bj]):
                        best = d
                        bj = j
            else:
                ln = self.left[node]
                rn = self.right[node]
                dl = self._boxdist(ln, qx, qy, qa)
                dr = self._boxdist(rn, qx, qy, qa)
                if sp + 2 > 256:
                    # unreachable for trees built by _kdtree (depth << 128)
                    out_b[0] = -1
                    return -1.0
                if dl <= dr:
                    nstack[sp] = rn
                    dstack[sp] = dr
                    nstack[sp + 1] = ln
                    dstack[sp + 1] = dl
                else:
                    nstack[sp] = ln
                    dstack[sp] = dl
                    nstack[sp + 1] = rn
                    dstack[sp + 1] = dr
                sp += 2
        b = self.orig[bj]
        out_b[0] = b
        dx = fabs(qx - self.bg[b, 0])
        dy = fabs(qy - self.bg[b, 1])
        if metric == 2:
            return sqrt(dx * dx + dy * dy)
        da = fabs(qa - self.bg[b, 2])
        if TWO_PI - da < da:
            da = TWO_PI - da
        if metric == 0:
            return dx + dy + da
        return sqrt(dx * dx + dy * dy + da * da)

    def query_many(self, q):
        cdef const double[:, ::1] qv = np.ascontiguousarray(q, dtype=np.float64)
        cdef Py_ssize_t k = qv.shape[0]
        cdef Py_ssize_t i
        idx = np.empty(k, dtype=np.int64)
        dist = np.empty(k, dtype=np.float64)
        cdef long long[::1] iv = idx
        cdef double[::1] dv = dist
        cdef long long nstack[256]
        cdef double dstack[256]
        cdef long long b = 0
        with nogil:
            for i in range(k):
                dv[i] = self._query(qv[i, 0], qv[i, 1], qv[i, 2], nstack, dstack, &b)
                iv[i] = b
        if k and idx.min() < 0:
            raise RuntimeError("kd-tree traversal stack overflow")
        return idx, dist

    def hausdorff_batch(self, pattern, theta, scale, tx, ty, sa, sb, sang, rho, double incumbent,
                        bint prune, bint update, double rel=1.0):
        cdef const double[:, ::1] pat = np.ascontiguousarray(pattern, dtype=np.float64)
        cdef const double[::1] thv = np.ascontiguousarray(theta, dtype=np.float64)
        # cos/sin come from Python's math module: a C compiler may fuse them
        # into sincos, which is not bitwise identical.
        cdef double[::1] cv = np.fromiter((math.cos(t) for t in thv), dtype=np.float64, count=thv.shape[0])
        cdef double[::1] snv = np.fromiter((math.sin(t) for t in thv), dtype=np.float64, count=thv.shape[0])
        cdef const double[::1] sv = np.ascontiguousarray(scale, dtype=np.float64)
        cdef const double[::1] txv = np.ascontiguousarray(tx, dtype=np.float64)
        cdef const double[::1] tyv = np.ascontiguousarray(ty, dtype=np.float64)
        cdef const double[::1] sav = np.ascontiguousarray(sa, dtype=np.float64)
        cdef const double[::1] sbv = np.ascontiguousarray(sb, dtype=np.float64)
        cdef const double[::1] sgv = np.ascontiguousarray(sang, dtype=np.float64)
        cdef const double[::1] rhv = np.ascontiguousarray(rho, dtype=np.float64)
        cdef Py_ssize_t m = pat.shape[0]
        cdef Py_ssize_t kk = thv.shape[0]
        if rhv.shape[0] != m:
            raise ValueError("rho must have one entry per pattern point")
        h = np.empty(kk, dtype=np.float64)
        cdef double[::1] hv = h
        cdef long long* order = <long long*> malloc(max(m, 1) * sizeof(long long))
        if order == NULL:
            raise MemoryError()
        cdef long long nstack[256]
        cdef double dstack[256]
        cdef long long b = 0
        cdef long long nq = 0
        cdef long long best_k = -1
        cdef double best = incumbent
        cdef bint l1 = self.metric == 0
        cdef double th, c, sn, s, tkx, tky, a0, b0, g0, base, cur, x, y, a, X, Y, A, d, pos, sl
        cdef Py_ssize_t k, ii
        cdef long long i, tmp
        cdef bint abandoned, overflow = False
        for ii in range(m):
            order[ii] = ii
        with nogil:
            for k in range(kk):
                th = thv[k]
                c = cv[k]
                sn = snv[k]
                s = sv[k]
                tkx = txv[k]
                tky = tyv[k]
                a0 = sav[k]
                b0 = sbv[k]
                g0 = sgv[k]
                if prune:
                    base = best * rel
                else:
                    base = INFINITY
                cur = 0.0
                abandoned = False
                for ii in range(m):
                    i = order[ii]
                    x = pat[i, 0]
                    y = pat[i, 1]
                    a = pat[i, 2]
                    X = s * (c * x - sn * y) + tkx
                    Y = s * (sn * x + c * y) + tky
                    A = _norm_angle(a + th)
                    d = self._query(X, Y, A, nstack, dstack, &b)
                    if b < 0:
                        overflow = True
                    nq += 1
                    if d > cur:
                        cur = d
                    pos = a0 + b0 * rhv[i]
                    if l1:
                        sl = pos + g0
                    else:
                        sl = sqrt(pos * pos + g0 * g0)
                    if d >= base + sl:
                        abandoned = True
                        tmp = order[0]
                        order[0] = order[ii]
                        order[ii] = tmp
                        break
                if abandoned:
                    hv[k] = INFINITY
                else:
                    hv[k] = cur
                    if update and cur < best:
                        best = cur
                        best_k = k
        free(order)
        if overflow:
            raise RuntimeError("kd-tree traversal stack overflow")
        return h, best, best_k, nq
