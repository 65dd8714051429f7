"""Compare the compiled and pure-Python kernels on identical workloads.

    python3 benchmarks/bench_kernels.py [--n 2000] [--queries 20000] [--candidates 2000]
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from opmatch import _backend
from opmatch.ann import Evaluator, OrientedNnIndex


def _best_of(fn, repeats: int) -> float:
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main(argv=None) -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=2000)
    ap.add_argument("--m", type=int, default=20)
    ap.add_argument("--queries", type=int, default=20000)
    ap.add_argument("--candidates", type=int, default=2000)
    ap.add_argument("--eps-nn", type=float, default=0.1)
    ap.add_argument("--repeats", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    rng = np.random.default_rng(args.seed)
    B = np.column_stack([rng.uniform(0, 10, (args.n, 2)), rng.uniform(0, 2 * np.pi, args.n)])
    P = np.column_stack([rng.uniform(0, 3, (args.m, 2)), rng.uniform(0, 2 * np.pi, args.m)])
    Q = np.column_stack([rng.uniform(0, 10, (args.queries, 2)), rng.uniform(0, 2 * np.pi, args.queries)])
    K = args.candidates
    th = rng.uniform(0, 2 * np.pi, K)
    tx = rng.uniform(0, 7, K)
    ty = rng.uniform(0, 7, K)

    backends = ["python"]
    if _backend.compiled_available():
        backends.insert(0, "cython")
    print(f"default backend: {_backend.BACKEND}")
    print(f"{'backend':<8} {'metric':<6} {'queries/s':>12} {'candidates/s':>14}")
    rates = {}
    for metric in ("l1", "l2"):
        for be in backends:
            index = OrientedNnIndex(B, metric, args.eps_nn, backend=be)
            # the pure-Python kernel is slow; give it a smaller slice of the workload
            nq = args.queries if be == "cython" else max(1, args.queries // 20)
            nc = K if be == "cython" else max(1, K // 20)
            tq = _best_of(lambda: index.query_many(Q[:nq]), args.repeats)
            ev = Evaluator(index, P)
            tc = _best_of(lambda: ev.run(th[:nc], 1.0, tx[:nc], ty[:nc], prune=False), args.repeats)
            rates[be, metric] = (nq / tq, nc / tc)
            print(f"{be:<8} {metric:<6} {nq / tq:12.0f} {nc / tc:14.0f}")
    if len(backends) == 2:
        for metric in ("l1", "l2"):
            q = rates["cython", metric][0] / rates["python", metric][0]
            c = rates["cython", metric][1] / rates["python", metric][1]
            print(f"speedup {metric}: queries x{q:.0f}, candidates x{c:.0f}")


if __name__ == "__main__":
    main()
