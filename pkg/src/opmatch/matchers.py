"""Pin-and-query matchers, their (1+eps) refinements and the diameter dispatcher."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np

from ._search import (
    CloudScale,
    PairRigid,
    PairScale,
    PinCloud,
    SearchState,
    TransGrid,
    branch_and_bound,
)
from .ann import Evaluator, OrientedNnIndex
from .geometry import (
    Metric,
    SimilarityTransform,
    as_pointset,
    diameter_pair,
    max_radius_from,
    normalize_angles,
)
from .refinement import grid_cloud_params, grid_params

SQRT2 = math.sqrt(2.0)
PI = math.pi
# stage-1 values at or below this are treated as exact matches
EXACT_TOL = 1e-12
BLOCK = 1 << 16


class MotionClass(str, enum.Enum):
    T = "t"
    TR = "tr"
    TRS = "trs"

    @classmethod
    def parse(cls, value: "MotionClass | str") -> "MotionClass":
        if isinstance(value, MotionClass):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ValueError(f"unknown motion class {value!r}") from None


# -- constants ----------------------------------------------------------------

DSTAR_TR_H1 = SQRT2 + math.sqrt(2.0 + PI)
DSTAR_TR_H2 = SQRT2 + math.sqrt(2.0 + SQRT2 * PI)
_c = 2.0 + 2.0 * SQRT2
# roots of (2+2r2)D^2 - 4D - r2*pi = 0 and 2D^2 - 2r2*D - r2*pi = 0
DSTAR_TRS_H1 = (4.0 + math.sqrt(16.0 + 4.0 * _c * SQRT2 * PI)) / (2.0 * _c)
DSTAR_TRS_H2 = (SQRT2 + math.sqrt(2.0 + 2.0 * SQRT2 * PI)) / 2.0


@dataclass(frozen=True, slots=True)
class StageConstants:
    A1: float
    A2: float
    Dstar_h1: float
    Dstar_h2: float

    def A(self, metric: Metric | str) -> float:
        return self.A1 if Metric.parse(metric) is Metric.L1 else self.A2

    def dstar(self, metric: Metric | str) -> float:
        return self.Dstar_h1 if Metric.parse(metric) is Metric.L1 else self.Dstar_h2


def tr_large_constants(D: float) -> StageConstants:
    return StageConstants(6.0 + SQRT2 * PI / D, 2.0 + SQRT2 * (2.0 + PI / D), DSTAR_TR_H1, DSTAR_TR_H2)


def tr_small_constants(D: float) -> StageConstants:
    return StageConstants(2.0 + SQRT2 * D, 2.0 + D, DSTAR_TR_H1, DSTAR_TR_H2)


def trs_large_constants(D: float) -> StageConstants:
    a = SQRT2 * (2.0 + PI / D)
    return StageConstants(6.0 + a, 4.0 + a, DSTAR_TRS_H1, DSTAR_TRS_H2)


def trs_small_constants(D: float) -> StageConstants:
    return StageConstants((2.0 + 2.0 * SQRT2) * (1.0 + D), 4.0 + 2.0 * D, DSTAR_TRS_H1, DSTAR_TRS_H2)


TRANSLATE_CONSTANTS = StageConstants(2.0, 2.0, math.nan, math.nan)


def stage_constants(motion: MotionClass | str, variant: str, D: float) -> StageConstants:
    motion = MotionClass.parse(motion)
    if motion is MotionClass.T:
        return TRANSLATE_CONSTANTS
    table = {
        (MotionClass.TR, "large"): tr_large_constants,
        (MotionClass.TR, "small"): tr_small_constants,
        (MotionClass.TRS, "large"): trs_large_constants,
        (MotionClass.TRS, "small"): trs_small_constants,
    }
    if variant not in ("large", "small"):
        raise ValueError(f"variant must be 'large' or 'small', got {variant!r}")
    if variant == "large" and not D > 0.0:
        raise ValueError("large-diameter constants need a pattern diameter > 0")
    return table[motion, variant](D)


def dstar(motion: MotionClass | str, metric: Metric | str) -> float:
    motion = MotionClass.parse(motion)
    if motion is MotionClass.T:
        return math.nan
    c = tr_small_constants(1.0) if motion is MotionClass.TR else trs_small_constants(1.0)
    return c.dstar(metric)


def choose_variant(motion: MotionClass | str, metric: Metric | str, D: float, variant: str = "auto") -> str:
    if variant != "auto":
        if variant not in ("large", "small"):
            raise ValueError(f"variant must be 'auto', 'large' or 'small', got {variant!r}")
        return variant
    return "large" if D >= dstar(motion, metric) else "small"


# -- results ------------------------------------------------------------------

@dataclass
class MatchResult:
    transform: SimilarityTransform
    hausdorff: float
    candidates_tested: int
    nn_queries: int
    candidates_evaluated: int = 0
    algorithm: str = ""
    metric: Metric | None = None
    info: dict[str, Any] = field(default_factory=dict)

    def as_dict(self) -> dict[str, Any]:
        th, s, tx, ty = self.transform.as_tuple()
        return {
            "algorithm": self.algorithm,
            "metric": self.metric.value if self.metric is not None else "positional",
            "theta": th,
            "scale": s,
            "tx": tx,
            "ty": ty,
            "hausdorff": self.hausdorff,
            "candidates_tested": self.candidates_tested,
            "candidates_evaluated": self.candidates_evaluated,
            "nn_queries": self.nn_queries,
        }


# -- base algorithms ----------------------------------------------------------

Gen = Callable[[int, int], tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]]


def _prep(P, B):
    P = as_pointset(P, role="pattern").require_nonempty("pattern")
    B = as_pointset(B).require_nonempty("background")
    return P, B


def _index(B, metric, eps_nn, index: OrientedNnIndex | None) -> OrientedNnIndex:
    if index is not None:
        if index.background is not B and index.background != B:
            raise ValueError("index was built over a different background")
        want = "positional" if metric == "positional" else Metric.parse(metric)
        have = "positional" if index.metric is None else index.metric
        if have != want or index.eps_nn != eps_nn:
            raise ValueError("index metric / eps_nn do not match the request")
        return index
    return OrientedNnIndex(B, metric, eps_nn)


def _pin(gx, gy, theta, s, p):
    c = np.cos(theta)
    sn = np.sin(theta)
    return gx - s * (c * p[0] - sn * p[1]), gy - s * (sn * p[0] + c * p[1])


def _run_base(name, P, B, metric, eps_nn, count: int, gen: Gen, threads, prune, index) -> MatchResult:
    idx = _index(B, metric, eps_nn, index)
    best, best_E = np.inf, None
    with Evaluator(idx, P.data, threads) as ev:
        for b0 in range(0, count, BLOCK):
            b1 = min(count, b0 + BLOCK)
            th, s, tx, ty = gen(b0, b1)
            _, val, pos = ev.run(th, s, tx, ty, incumbent=best, prune=prune)
            if pos >= 0:
                best = val
                best_E = SimilarityTransform(th[pos], s[pos], tx[pos], ty[pos])
        evaluated, queries = ev.evaluated, ev.queries
    return MatchResult(
        best_E, float(best), count, queries, evaluated, name,
        None if metric == "positional" else Metric.parse(metric), {"eps_nn": eps_nn},
    )


def _pairs(b0, b1, n):
    c = np.arange(b0, b1, dtype=np.int64)
    return c // n, c % n


def base_translate(P, B, metric: Metric | str, eps_nn: float = 0.0, *, threads: int = 1,
                   prune: bool = True, index: OrientedNnIndex | None = None) -> MatchResult:
    """Pin ``P[0]`` onto every background point; pure translations."""
    P, B = _prep(P, B)
    p = P.data[0]
    Bd = B.data

    def gen(b0, b1):
        k = b1 - b0
        return np.zeros(k), np.ones(k), Bd[b0:b1, 0] - p[0], Bd[b0:b1, 1] - p[1]

    return _run_base("base_translate", P, B, metric, eps_nn, len(B), gen, threads, prune, index)


def base_tr_small(P, B, metric: Metric | str, eps_nn: float = 0.0, *, threads: int = 1,
                  prune: bool = True, index: OrientedNnIndex | None = None) -> MatchResult:
    """Pin ``P[0]`` onto each background point and match its orientation."""
    P, B = _prep(P, B)
    p = P.data[0]
    Bd = B.data

    def gen(b0, b1):
        th = normalize_angles(Bd[b0:b1, 2] - p[2])
        s = np.ones(b1 - b0)
        tx, ty = _pin(Bd[b0:b1, 0], Bd[b0:b1, 1], th, s, p)
        return th, s, tx, ty

    return _run_base("base_tr_small", P, B, metric, eps_nn, len(B), gen, threads, prune, index)


def _diametric(P):
    if len(P) < 2:
        raise ValueError("the large-diameter algorithms need at least two pattern points")
    i, j, D = diameter_pair(P)
    if D <= 0.0:
        raise ValueError("pattern diameter is 0; use the small-diameter variant")
    return i, j, D


def _pair_gen(P, B, p_i, q_i, D, scaled: bool) -> Gen:
    p = P.data[p_i]
    q = P.data[q_i]
    phi = math.atan2(q[1] - p[1], q[0] - p[0])
    Bd = B.data
    n = len(B)

    def gen(b0, b1):
        b, b2 = _pairs(b0, b1, n)
        vx = Bd[b2, 0] - Bd[b, 0]
        vy = Bd[b2, 1] - Bd[b, 1]
        zero = (vx == 0.0) & (vy == 0.0)
        th = np.where(zero, 0.0, normalize_angles(np.arctan2(vy, vx) - phi))
        if scaled:
            s = np.where(zero, 1.0, np.hypot(vx, vy) / D)
        else:
            s = np.ones(b1 - b0)
        tx, ty = _pin(Bd[b, 0], Bd[b, 1], th, s, p)
        return th, s, tx, ty

    return gen


def base_tr_large(P, B, metric: Metric | str, eps_nn: float = 0.0, *, threads: int = 1,
                  prune: bool = True, index: OrientedNnIndex | None = None) -> MatchResult:
    """Pin the diametric point ``p`` onto ``b`` and rotate ``q`` toward ``b2``, for all ordered pairs."""
    P, B = _prep(P, B)
    i, j, D = _diametric(P)
    r = _run_base("base_tr_large", P, B, metric, eps_nn, len(B) ** 2, _pair_gen(P, B, i, j, D, False),
                  threads, prune, index)
    r.info["D"] = D
    return r


def base_gr_unoriented(P, B, eps_nn: float = 0.0, *, threads: int = 1, prune: bool = True,
                       index: OrientedNnIndex | None = None) -> MatchResult:
    """Same enumeration as :func:`base_tr_large`, scored on positions alone."""
    P, B = _prep(P, B)
    i, j, D = _diametric(P)
    r = _run_base("base_gr_unoriented", P, B, "positional", eps_nn, len(B) ** 2,
                  _pair_gen(P, B, i, j, D, False), threads, prune, index)
    r.info["D"] = D
    return r


def base_trs_large(P, B, metric: Metric | str, eps_nn: float = 0.0, *, threads: int = 1,
                   prune: bool = True, index: OrientedNnIndex | None = None) -> MatchResult:
    """As :func:`base_tr_large`, then scale about ``p`` so ``q`` lands on ``b2``."""
    P, B = _prep(P, B)
    i, j, D = _diametric(P)
    r = _run_base("base_trs_large", P, B, metric, eps_nn, len(B) ** 2, _pair_gen(P, B, i, j, D, True),
                  threads, prune, index)
    r.info["D"] = D
    return r


def base_trs_small(P, B, metric: Metric | str, eps_nn: float = 0.0, *, threads: int = 1,
                   prune: bool = True, index: OrientedNnIndex | None = None) -> MatchResult:
    """Pin diametric ``p`` onto ``b`` with matched orientation; scale to every ``|b - b2|``."""
    P, B = _prep(P, B)
    i, j, D = diameter_pair(P)
    p = P.data[i]
    Bd = B.data
    n = len(B)

    def gen(b0, b1):
        b, b2 = _pairs(b0, b1, n)
        th = normalize_angles(Bd[b, 2] - p[2])
        if D > 0.0:
            L = np.hypot(Bd[b2, 0] - Bd[b, 0], Bd[b2, 1] - Bd[b, 1])
            s = np.where(L == 0.0, 1.0, L / D)
        else:
            s = np.ones(b1 - b0)
        tx, ty = _pin(Bd[b, 0], Bd[b, 1], th, s, p)
        return th, s, tx, ty

    r = _run_base("base_trs_small", P, B, metric, eps_nn, n * n, gen, threads, prune, index)
    r.info["D"] = D
    return r


BASE = {
    (MotionClass.T, "large"): base_translate,
    (MotionClass.T, "small"): base_translate,
    (MotionClass.TR, "large"): base_tr_large,
    (MotionClass.TR, "small"): base_tr_small,
    (MotionClass.TRS, "large"): base_trs_large,
    (MotionClass.TRS, "small"): base_trs_small,
}


def base_eps_nn(eps: float, A_i: float) -> float:
    """NN accuracy that keeps a base stage within ``(A_i + eps) h_opt``."""
    return eps / (3.0 * A_i)


def run_base(P, B, motion: MotionClass | str, metric: Metric | str, eps: float, *, variant: str = "auto",
             threads: int = 1, prune: bool = True) -> MatchResult:
    """Dispatch a base algorithm with ``eps_nn = eps / (3 A_i)``."""
    P, B = _prep(P, B)
    motion = MotionClass.parse(motion)
    metric = Metric.parse(metric)
    D = diameter_pair(P)[2]
    variant = "large" if motion is MotionClass.T else choose_variant(motion, metric, D, variant)
    A_i = stage_constants(motion, variant, D).A(metric)
    r = BASE[motion, variant](P, B, metric, base_eps_nn(eps, A_i), threads=threads, prune=prune)
    r.info.update(variant=variant, D=D, A_i=A_i, bound=A_i + eps)
    return r


# -- (1+eps) schemes ----------------------------------------------------------

def _refine(P, B, motion: MotionClass, metric: Metric, eps: float, variant: str, threads: int) -> MatchResult:
    if not eps > 0.0:
        raise ValueError(f"eps must be positive, got {eps}")
    P, B = _prep(P, B)
    D = diameter_pair(P)[2]
    eps_base = min(eps, 1.0)
    cons = stage_constants(motion, variant, D)
    A_i = cons.A(metric)
    base = BASE[motion, variant](P, B, metric, base_eps_nn(eps_base, A_i), threads=threads)
    h_apr = base.hausdorff
    info = dict(variant=variant, D=D, A_i=A_i, h_apr=h_apr, eps=eps, stage1_eps_nn=base_eps_nn(eps_base, A_i))
    name = {MotionClass.T: "eps_translate", MotionClass.TR: "eps_tr", MotionClass.TRS: "eps_trs"}[motion]
    if h_apr <= EXACT_TOL:
        info["refined"] = False
        return MatchResult(base.transform, h_apr, base.candidates_tested, base.nn_queries,
                           base.candidates_evaluated, name, metric, info)

    # grid spacing uses half of the budget, the pruned search the other half
    eps_grid = eps / 2.0
    rel = (1.0 + eps_grid) / (1.0 + eps)
    if motion is MotionClass.TRS:
        # the fitted scale changes the effective diameter; keep the larger constant
        s_apr = base.transform.scale
        D_eff = min(D, s_apr * D) if variant == "large" else max(D, s_apr * D)
        A = stage_constants(motion, variant, D_eff).A(metric) + eps_base
    else:
        A = A_i + eps_base
    exact = OrientedNnIndex(B, metric, 0.0)
    Pd, Bd = P.data, B.data
    small = variant == "small" and motion is not MotionClass.T
    spec = grid_cloud_params(h_apr, A, eps_grid, metric) if small else grid_params(h_apr, A, eps_grid, metric)
    info.update(A=A, l=spec.l, k=spec.k, cloud=spec.cloud, cloud_clamped=spec.clamped, rel=rel)

    if motion is MotionClass.T:
        schemes = [TransGrid(metric, Pd, Bd, 0, spec.l, spec.k)]
    else:
        i, j, _ = diameter_pair(P)
        if motion is MotionClass.TR and variant == "large":
            schemes = [PairRigid(metric, Pd, Bd, i, j, spec.l, spec.k)]
        elif motion is MotionClass.TR:
            schemes = [PinCloud(metric, Pd, Bd, 0, spec.l, spec.k, spec.cloud)]
        elif variant == "large":
            schemes = [TransGrid(metric, Pd, Bd, i, spec.l, spec.k), PairScale(metric, Pd, Bd, i, j, spec.l, spec.k)]
        else:
            schemes = [PinCloud(metric, Pd, Bd, i, spec.l, spec.k, spec.cloud)]
            if D > 0.0:
                schemes.append(CloudScale(metric, Pd, Bd, i, j, spec.l, spec.k, spec.cloud))

    E0 = base.transform
    state = SearchState(exact.hausdorff(Pd, E0), E0.as_tuple())
    seed_queries = exact.query_count
    with Evaluator(exact, Pd, threads) as ev:
        for sch in schemes:
            branch_and_bound(sch, ev, rel, state)
        evaluated, queries = ev.evaluated, ev.queries
    info.update(levels=state.levels, refined=True)
    tested = base.candidates_tested + schemes[-1].size()
    return MatchResult(
        SimilarityTransform(*state.transform), state.best, tested,
        base.nn_queries + seed_queries + queries, base.candidates_evaluated + evaluated + 1, name, metric, info,
    )


def eps_translate(P, B, metric: Metric | str, eps: float, *, threads: int = 1) -> MatchResult:
    return _refine(P, B, MotionClass.T, Metric.parse(metric), eps, "large", threads)


def eps_tr(P, B, metric: Metric | str, eps: float, *, variant: str = "auto", threads: int = 1) -> MatchResult:
    metric = Metric.parse(metric)
    D = diameter_pair(as_pointset(P, role="pattern").require_nonempty("pattern"))[2]
    return _refine(P, B, MotionClass.TR, metric, eps, choose_variant(MotionClass.TR, metric, D, variant), threads)


def eps_trs(P, B, metric: Metric | str, eps: float, *, variant: str = "auto", threads: int = 1) -> MatchResult:
    metric = Metric.parse(metric)
    D = diameter_pair(as_pointset(P, role="pattern").require_nonempty("pattern"))[2]
    return _refine(P, B, MotionClass.TRS, metric, eps, choose_variant(MotionClass.TRS, metric, D, variant), threads)


def match(P, B, motion: MotionClass | str, metric: Metric | str, eps: float, *, base_only: bool = False,
          variant: str = "auto", threads: int = 1) -> MatchResult:
    """Single entry point used by the CLI."""
    motion = MotionClass.parse(motion)
    if base_only:
        return run_base(P, B, motion, metric, eps, variant=variant, threads=threads)
    if motion is MotionClass.T:
        return eps_translate(P, B, metric, eps, threads=threads)
    if motion is MotionClass.TR:
        return eps_tr(P, B, metric, eps, variant=variant, threads=threads)
    return eps_trs(P, B, metric, eps, variant=variant, threads=threads)
