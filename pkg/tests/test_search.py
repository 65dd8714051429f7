import itertools
import math

import numpy as np
import pytest

from opmatch._search import (
    CloudScale,
    PairRigid,
    PairScale,
    PinCloud,
    SearchState,
    TransGrid,
    _split,
    branch_and_bound,
    cloud_range,
)
from opmatch.ann import Evaluator, OrientedNnIndex
from opmatch.geometry import TWO_PI, Metric, SimilarityTransform, apply_transform_array, directed_hausdorff


def _instance(n, m, seed, box=3.0):
    rng = np.random.default_rng(seed)
    B = np.column_stack([rng.uniform(0, box, (n, 2)), rng.uniform(0, TWO_PI, n)])
    P = np.column_stack([rng.uniform(0, 1.5, (m, 2)), rng.uniform(0, TWO_PI, m)])
    return P, B


def _leaves(scheme):
    """Every single-candidate cell under the roots."""
    out = []
    for root in scheme.roots():
        ranges = [range(root[2 + 2 * d], root[3 + 2 * d] + 1) for d in range((len(root) - 2) // 2)]
        for combo in itertools.product(*ranges):
            row = [root[0], root[1]]
            for v in combo:
                row += [v, v]
            out.append(row)
    return np.array(out, dtype=np.int64)


def _brute(scheme, metric):
    cells = _leaves(scheme)
    rep = cells[:, 2::2]
    ok = scheme.keep(cells, rep) & ~scheme.skip_leaf(cells, rep)
    th, s, tx, ty = scheme.params(cells[ok], rep[ok])
    vals = [directed_hausdorff(apply_transform_array(SimilarityTransform(*e), scheme.P), scheme.B, metric)
            for e in zip(th, s, tx, ty)]
    return min(vals), int(ok.sum())


class _NoKeep(PairRigid):
    def keep(self, cells, rep):
        return np.ones(len(cells), dtype=bool)


def _schemes(metric, P, B):
    return {
        "trans": TransGrid(metric, P, B, 0, 0.2, 2),
        "pincloud": PinCloud(metric, P, B, 1, 0.15, 1, 5),
        "pairrigid": _NoKeep(metric, P, B, 0, 2, 0.2, 1),
        "pairscale": PairScale(metric, P, B, 0, 2, 0.2, 1),
        "cloudscale": CloudScale(metric, P, B, 0, 2, 0.15, 1, 3),
    }


@pytest.mark.parametrize("metric", [Metric.L1, Metric.L2])
@pytest.mark.parametrize("name", ["trans", "pincloud", "pairrigid", "pairscale", "cloudscale"])
@pytest.mark.parametrize("seed", [0, 1])
def test_branch_and_bound_finds_brute_force_minimum(metric, name, seed):
    n = 4 if name == "cloudscale" else 5
    P, B = _instance(n, 4, seed)
    scheme = _schemes(metric, P, B)[name]
    target, count = _brute(scheme, metric)
    assert count > 0
    with Evaluator(OrientedNnIndex(B, metric), P) as ev:
        state = branch_and_bound(scheme, ev, 1.0, SearchState())
    assert state.best <= target * (1 + 1e-12) + 1e-12
    # the reported value is the true value of the reported transform
    E = SimilarityTransform(*state.transform)
    assert math.isclose(directed_hausdorff(apply_transform_array(E, P), B, metric), state.best, rel_tol=1e-12)


@pytest.mark.parametrize("rel", [0.9, 2 / 3])
def test_relative_pruning_guarantee(rel):
    P, B = _instance(5, 4, 3)
    scheme = PinCloud(Metric.L2, P, B, 0, 0.15, 1, 7)
    target, _ = _brute(scheme, Metric.L2)
    with Evaluator(OrientedNnIndex(B, "l2"), P) as ev:
        state = branch_and_bound(scheme, ev, rel, SearchState())
    assert state.best <= target / rel * (1 + 1e-12)


def test_incumbent_is_never_worsened():
    P, B = _instance(5, 4, 4)
    scheme = TransGrid(Metric.L1, P, B, 0, 0.2, 2)
    with Evaluator(OrientedNnIndex(B, "l1"), P) as ev:
        state = branch_and_bound(scheme, ev, 1.0, SearchState(best=1e-6, transform="seed"))
    assert state.best == 1e-6 and state.transform == "seed"


def test_pair_rigid_keep_admits_exact_distance_leaves():
    # a leaf whose pin pair is exactly at the pattern diameter is never filtered
    P, B = _instance(5, 4, 5)
    s = PairRigid(Metric.L2, P, B, 0, 2, 0.2, 1)
    cells = _leaves(s)
    rep = cells[:, 2::2]
    gx, gy, hx, hy = s._points(cells, rep, 2)
    L = np.hypot(hx - gx, hy - gy)
    near = np.abs(L - s.D) <= s.tol
    assert np.all(s.keep(cells, rep)[near])
    assert not np.any(s.keep(cells, rep)[np.abs(L - s.D) > s.tol])


def test_scheme_sizes():
    P, B = _instance(5, 4, 6)
    sch = _schemes(Metric.L2, P, B)
    assert sch["trans"].size() == 5 * 25
    assert sch["pincloud"].size() == 5 * 9 * 5
    assert sch["pairrigid"].size() == (5 * 9) ** 2
    assert sch["cloudscale"].size() == (5 * 9 * 3) ** 2
    for name in ("trans", "pincloud", "pairrigid", "pairscale"):
        assert len(_leaves(sch[name])) == sch[name].size()


def test_cloud_range_is_centred():
    for K in (1, 2, 5, 8):
        lo, hi = cloud_range(K)
        assert hi - lo + 1 == K and (lo + hi) // 2 == 0


def test_split_halves_the_widest_dimension():
    cells = np.array([[0, 0, -3, 3, 0, 1], [1, 0, 2, 2, -1, 1]], dtype=np.int64)
    out = _split(cells, np.array([[6.0, 1.0], [0.0, 0.0]]))
    assert out.tolist() == [[0, 0, -3, 0, 0, 1], [0, 0, 1, 3, 0, 1], [1, 0, 2, 2, -1, 0], [1, 0, 2, 2, 1, 1]]
