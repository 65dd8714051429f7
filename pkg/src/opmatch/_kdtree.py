"""Flat-array kd-tree construction shared by both kernel backends."""
from __future__ import annotations

import numpy as np

LEAF_SIZE = 8


def build_kdtree(points: np.ndarray, leaf_size: int = LEAF_SIZE) -> dict[str, np.ndarray]:
    """Build a kd-tree over ``points`` (N, 3).

    Returns the permutation ``perm`` (tree order -> input row) and per-node
    arrays: index range ``[start, end)``, children (``-1`` for leaves) and
    tight bounding boxes.  Splits are on the widest box side at the median.
    """
    pts = np.ascontiguousarray(points, dtype=np.float64)
    n = pts.shape[0]
    perm = np.arange(n, dtype=np.int64)
    start, end, left, right, lo, hi = [], [], [], [], [], []

    def new_node(s: int, e: int) -> int:
        sub = pts[perm[s:e]]
        start.append(s)
        end.append(e)
        left.append(-1)
        right.append(-1)
        lo.append(sub.min(axis=0))
        hi.append(sub.max(axis=0))
        return len(start) - 1

    root = new_node(0, n)
    stack = [root]
    while stack:
        node = stack.pop()
        s, e = start[node], end[node]
        if e - s <= leaf_size:
            continue
        dim = int(np.argmax(hi[node] - lo[node]))
        if hi[node][dim] <= lo[node][dim]:
            continue  # all points coincide
        idx = perm[s:e]
        # lexsort makes the split deterministic under ties
        order = np.lexsort((idx, pts[idx, dim]))
        perm[s:e] = idx[order]
        mid = s + (e - s) // 2
        lnode = new_node(s, mid)
        rnode = new_node(mid, e)
        left[node] = lnode
        right[node] = rnode
        stack.append(rnode)
        stack.append(lnode)

    return {
        "perm": perm,
        "start": np.asarray(start, dtype=np.int64),
        "end": np.asarray(end, dtype=np.int64),
        "left": np.asarray(left, dtype=np.int64),
        "right": np.asarray(right, dtype=np.int64),
        "lo": np.ascontiguousarray(np.asarray(lo, dtype=np.float64).reshape(-1, 3)),
        "hi": np.ascontiguousarray(np.asarray(hi, dtype=np.float64).reshape(-1, 3)),
    }
