"""Approximate nearest-neighbour index over angle-lifted background points.

Each background point ``(x, y, a)`` is stored three times, with angles
``a - 2*pi``, ``a`` and ``a + 2*pi``.  For query angles in ``[0, 2*pi)`` the
plain L1/L2 distance to the closest copy equals the wrapped cylinder metric,
so an ordinary kd-tree in R^3 answers oriented queries.
"""
from __future__ import annotations

import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import _backend
from ._kdtree import build_kdtree
from .geometry import (
    TWO_PI,
    EmptySetError,
    Metric,
    SimilarityTransform,
    as_pointset,
    pairwise_mu,
)

POSITIONAL = 2  # kernel metric code: planar L2, orientation ignored

CHUNK = 1024
BATCH_CHUNKS = 8


@dataclass(frozen=True, slots=True)
class LiftedPoint:
    x: float
    y: float
    a_lifted: float
    origin_index: int


def lift(B: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Return the ``(3n, 3)`` lifted coordinates and their origin indices."""
    B = np.asarray(B, dtype=np.float64)
    n = B.shape[0]
    shifts = (0.0, TWO_PI, -TWO_PI)
    pts = np.concatenate([B + np.array([0.0, 0.0, s]) for s in shifts])
    return pts, np.tile(np.arange(n, dtype=np.int64), 3)


class OrientedNnIndex:
    """Read-only (1+eps_nn)-ANN structure; safe for concurrent queries.

    ``metric`` may also be ``"positional"``, in which case the index is built
    over the unlifted positions and orientations are ignored (used by the
    unoriented baseline).
    """

    def __init__(self, B, metric: Metric | str, eps_nn: float = 0.0, backend: str | None = None):
        B = as_pointset(B).require_nonempty("background")
        if not eps_nn >= 0.0:
            raise ValueError(f"eps_nn must be >= 0, got {eps_nn}")
        self.background = B
        self.eps_nn = float(eps_nn)
        if metric == "positional":
            self.metric = None
            code = POSITIONAL
            pts = np.column_stack([B.xy, np.zeros(len(B))])
            orig = np.arange(len(B), dtype=np.int64)
        else:
            self.metric = Metric.parse(metric)
            code = self.metric.code
            pts, orig = lift(B.data)
        self.metric_code = code
        self._lifted = pts
        self._orig = orig
        tree = build_kdtree(pts)
        perm = tree["perm"]
        K = _backend.kernel_class(backend)
        self._kernel = K(
            pts[perm], orig[perm], tree["start"], tree["end"], tree["left"], tree["right"],
            tree["lo"], tree["hi"], B.data, code, self.eps_nn,
        )
        self._lock = threading.Lock()
        self._queries = 0

    # -- bookkeeping -------------------------------------------------------
    @property
    def query_count(self) -> int:
        return self._queries

    def _count(self, k: int) -> None:
        with self._lock:
            self._queries += int(k)

    def reset_count(self) -> None:
        with self._lock:
            self._queries = 0

    @property
    def lifted_count(self) -> int:
        return self._lifted.shape[0]

    def lifted_points(self) -> list[LiftedPoint]:
        return [LiftedPoint(float(x), float(y), float(a), int(o)) for (x, y, a), o in zip(self._lifted, self._orig)]

    # -- queries -----------------------------------------------------------
    def query(self, q) -> tuple[int, float]:
        q = np.asarray(tuple(q.as_tuple()) if hasattr(q, "as_tuple") else q, dtype=np.float64).reshape(1, 3)
        idx, dist = self.query_many(q)
        return int(idx[0]), float(dist[0])

    def query_many(self, Q) -> tuple[np.ndarray, np.ndarray]:
        Q = np.ascontiguousarray(np.asarray(Q, dtype=np.float64).reshape(-1, 3))
        idx, dist = self._kernel.query_many(Q)
        self._count(Q.shape[0])
        return idx, dist

    def hausdorff(self, data, E: SimilarityTransform) -> float:
        """Directed Hausdorff distance of ``E(data)`` to the background via the index."""
        data = np.ascontiguousarray(np.asarray(data, dtype=np.float64).reshape(-1, 3))
        if data.shape[0] == 0:
            raise EmptySetError("pattern is empty")
        z = np.zeros(1)
        h, _, _, nq = self._kernel.hausdorff_batch(
            data, [E.theta], [E.scale], [E.tx], [E.ty], z, z, z, np.zeros(data.shape[0]), np.inf, False, False, 1.0
        )
        self._count(nq)
        return float(h[0])

    def evaluate(self, pattern, theta, scale, tx, ty, sa, sb, sang, rho, incumbent: float, prune: bool,
                 update: bool, rel: float = 1.0):
        """One kernel batch; :class:`Evaluator` drives these in chunks."""
        out = self._kernel.hausdorff_batch(pattern, theta, scale, tx, ty, sa, sb, sang, rho, incumbent,
                                           prune, update, rel)
        self._count(out[3])
        return out


def build_index(B, metric: Metric | str, eps_nn: float = 0.0, backend: str | None = None) -> OrientedNnIndex:
    return OrientedNnIndex(B, metric, eps_nn, backend=backend)


def query_exact(B, q, metric: Metric | str) -> tuple[int, float]:
    """Linear scan; ties go to the lowest index."""
    B = as_pointset(B).require_nonempty("background")
    q = np.asarray(tuple(q.as_tuple()) if hasattr(q, "as_tuple") else q, dtype=np.float64).reshape(1, 3)
    d = pairwise_mu(metric, q, B.data)[0]
    i = int(np.argmin(d))
    return i, float(d[i])


# -- batched candidate evaluation --------------------------------------------

def _worker_pool(threads: int):
    return ThreadPoolExecutor(max_workers=threads) if threads > 1 else None


def resolve_threads(threads: int | str | None) -> int:
    if threads is None:
        return 1
    if threads == "max":
        import os
        return max(1, len(os.sched_getaffinity(0)) if hasattr(os, "sched_getaffinity") else (os.cpu_count() or 1))
    t = int(threads)
    if t < 1:
        raise ValueError(f"threads must be >= 1, got {threads}")
    return t


class Evaluator:
    """Evaluates candidate transforms in fixed-size chunks.

    Each chunk of a batch starts from the incumbent as it stood at the start
    of the batch, and chunk results are reduced by ``(value, position)``.
    The outcome is therefore independent of the number of worker threads.
    """

    def __init__(self, index: OrientedNnIndex, pattern: np.ndarray, threads: int = 1,
                 chunk: int = CHUNK, batch_chunks: int = BATCH_CHUNKS):
        self.index = index
        self.pattern = np.ascontiguousarray(pattern, dtype=np.float64)
        self.threads = resolve_threads(threads)
        self.chunk = chunk
        self.batch = chunk * batch_chunks
        self.pool = _worker_pool(self.threads)
        self.evaluated = 0
        self.queries = 0

    def close(self) -> None:
        if self.pool is not None:
            self.pool.shutdown()
            self.pool = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def run(self, theta, scale, tx, ty, slack=None, *, rho=None, incumbent: float = np.inf, prune: bool = True,
            update: bool = True, rel: float = 1.0) -> tuple[np.ndarray, float, int]:
        """Evaluate all candidates; returns ``(h, best, best_pos)``.

        ``slack`` is ``None`` or a triple ``(sa, sb, sang)`` of per-candidate
        arrays; pattern point ``i`` then tolerates ``sa + sb * rho[i]`` of
        positional and ``sang`` of angular displacement before the candidate
        is abandoned.  ``h[k]`` is ``inf`` for abandoned candidates and
        ``best_pos`` is ``-1`` if no candidate beat ``incumbent``.
        """
        theta = np.ascontiguousarray(theta, dtype=np.float64)
        K = theta.shape[0]

        def vec(v):
            return np.ascontiguousarray(np.broadcast_to(np.asarray(v, dtype=np.float64), (K,)))

        scale, tx, ty = vec(scale), vec(tx), vec(ty)
        if slack is None:
            sa = sb = sang = np.zeros(K)
        else:
            sa, sb, sang = (vec(v) for v in slack)
        rho = np.zeros(self.pattern.shape[0]) if rho is None else np.ascontiguousarray(rho, dtype=np.float64)
        h = np.empty(K, dtype=np.float64)
        best = float(incumbent)
        best_pos = -1
        for b0 in range(0, K, self.batch):
            b1 = min(K, b0 + self.batch)
            bounds = [(c0, min(b1, c0 + self.chunk)) for c0 in range(b0, b1, self.chunk)]
            start_best = best

            def job(span, start_best=start_best):
                c0, c1 = span
                return self.index.evaluate(
                    self.pattern, theta[c0:c1], scale[c0:c1], tx[c0:c1], ty[c0:c1],
                    sa[c0:c1], sb[c0:c1], sang[c0:c1], rho, start_best, prune, update, rel,
                )

            if self.pool is not None and len(bounds) > 1:
                results = list(self.pool.map(job, bounds))
            else:
                results = [job(s) for s in bounds]
            for (c0, c1), (hc, cb, ck, nq) in zip(bounds, results):
                h[c0:c1] = hc
                self.queries += nq
                if update and ck >= 0 and cb < best:
                    best = cb
                    best_pos = c0 + ck
        self.evaluated += K
        return h, best, best_pos


def evaluate_candidates(index: OrientedNnIndex, pattern, theta, scale, tx, ty, *, threads: int = 1,
                        prune: bool = True, incumbent: float = np.inf) -> tuple[np.ndarray, float, int, int]:
    """Convenience wrapper: ``(h, best, best_pos, nn_queries)``."""
    with Evaluator(index, as_pointset(pattern, role="pattern").data, threads) as ev:
        h, best, pos = ev.run(theta, scale, tx, ty, incumbent=incumbent, prune=prune)
        return h, best, pos, ev.queries



def contract_violations(n: int, queries: int, eps_nn: float, seed=None, metric: Metric | str = Metric.L2,
                        box: float = 1.0, backend: str | None = None, chunk: int = 1024) -> tuple[int, float]:
    """Compare the index against a linear scan on random data.

    Returns the number of queries whose reported distance exceeds
    ``(1 + eps_nn)`` times the exact one, and the worst observed ratio.
    """
    rng = np.random.default_rng(seed)
    B = np.column_stack([rng.uniform(0.0, box, (n, 2)), rng.uniform(0.0, TWO_PI, n)])
    Q = np.column_stack([rng.uniform(-0.1 * box, 1.1 * box, (queries, 2)), rng.uniform(0.0, TWO_PI, queries)])
    index = OrientedNnIndex(B, metric, eps_nn, backend=backend)
    idx, dist = index.query_many(Q)
    bad = 0
    worst = 0.0
    for c0 in range(0, queries, chunk):
        exact = pairwise_mu(index.metric, Q[c0:c0 + chunk], B).min(axis=1)
        got = dist[c0:c0 + chunk]
        # the reported distance must also be the true distance to the reported point
        true = pairwise_mu(index.metric, Q[c0:c0 + chunk], B)[np.arange(len(got)), idx[c0:c0 + chunk]]
        tol = 1e-12 * np.maximum(exact, 1.0)
        bad += int(np.count_nonzero((got > (1.0 + eps_nn) * exact + tol) | (np.abs(got - true) > tol)))
        with np.errstate(divide="ignore", invalid="ignore"):
            r = np.where(exact > 0, got / exact, np.where(got > 0, np.inf, 1.0))
        worst = max(worst, float(r.max()))
    return bad, worst
