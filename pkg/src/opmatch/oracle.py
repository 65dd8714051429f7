"""Independent checks: planted instances with certified bounds, a brute-force
translation oracle, and randomized checks of the distance lemmas."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import (
    TWO_PI,
    Metric,
    PointSet,
    SimilarityTransform,
    angular_distance,
    apply_transform_array,
    as_pointset,
    directed_hausdorff,
    normalize_angles,
    pairwise_mu,
)
from .matchers import MotionClass


@dataclass
class PlantedInstance:
    background: PointSet
    pattern: PointSet
    planting: SimilarityTransform
    perturbation_bound: float
    certified_upper_bound: float
    metric: Metric = Metric.L2
    source_indices: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))

    def certificate(self) -> dict:
        return {
            "metric": self.metric.value,
            "planting": dict(zip(("theta", "scale", "tx", "ty"), self.planting.as_tuple())),
            "perturbation_bound": self.perturbation_bound,
            "certified_upper_bound": self.certified_upper_bound,
            "source_indices": [int(i) for i in self.source_indices],
        }


def random_background(n: int, rng: np.random.Generator, box: float = 1.0) -> PointSet:
    """Uniform positions in ``[0, box]^2`` and uniform orientations."""
    pts = np.column_stack([rng.uniform(0.0, box, size=(n, 2)), rng.uniform(0.0, TWO_PI, size=n)])
    return PointSet(pts)


def _ball(rng: np.random.Generator, m: int, r: float, metric: Metric) -> np.ndarray:
    if r == 0.0:
        return np.zeros((m, 2))
    if metric is Metric.L1:
        u = rng.uniform(-1.0, 1.0, size=(m, 2))
        return r * np.column_stack([(u[:, 0] + u[:, 1]) / 2.0, (u[:, 0] - u[:, 1]) / 2.0])
    rad = r * np.sqrt(rng.uniform(0.0, 1.0, size=m))
    ang = rng.uniform(0.0, TWO_PI, size=m)
    return np.column_stack([rad * np.cos(ang), rad * np.sin(ang)])


def random_motion(rng: np.random.Generator, motion: MotionClass | str, box: float = 10.0) -> SimilarityTransform:
    motion = MotionClass.parse(motion)
    theta = 0.0 if motion is MotionClass.T else float(rng.uniform(0.0, TWO_PI))
    s = float(np.exp(rng.uniform(math.log(0.5), math.log(2.0)))) if motion is MotionClass.TRS else 1.0
    tx, ty = rng.uniform(-box, box, size=2)
    return SimilarityTransform(theta, s, float(tx), float(ty))


def plant(B, m: int, motion: MotionClass | str, delta_pos: float, delta_ang: float, seed=None, *,
          metric: Metric | str = Metric.L2, box: float = 10.0, local: bool = False,
          rng: np.random.Generator | None = None) -> PlantedInstance:
    """Plant a perturbed, moved copy of ``m`` background points.

    The perturbation is applied in the background frame, so the certified
    bound ``h(planting(pattern), B)`` is at most the perturbation radius.
    ``local=True`` picks the ``m`` points nearest a random background point
    (small pattern diameters) instead of a uniform subset.
    """
    B = as_pointset(B).require_nonempty("background")
    metric = Metric.parse(metric)
    if m < 1 or m > len(B):
        raise ValueError(f"need 1 <= m <= |B| = {len(B)}, got m = {m}")
    if delta_pos < 0.0 or delta_ang < 0.0:
        raise ValueError("perturbation bounds must be >= 0")
    rng = rng if rng is not None else np.random.default_rng(seed)
    if local:
        c = int(rng.integers(len(B)))
        d = np.hypot(*(B.xy - B.xy[c]).T)
        idx = np.argsort(d, kind="stable")[:m]
        idx = idx[rng.permutation(m)]
    else:
        idx = rng.choice(len(B), size=m, replace=False)
    E = random_motion(rng, motion, box)
    target = B.data[idx].copy()
    target[:, :2] += _ball(rng, m, delta_pos, metric)
    target[:, 2] = normalize_angles(target[:, 2] + rng.uniform(-delta_ang, delta_ang, size=m))
    pattern = PointSet(apply_transform_array(E.inverse(), target), role="pattern")
    U = directed_hausdorff(apply_transform_array(E, pattern.data), B, metric)
    bound = delta_pos + delta_ang if metric is Metric.L1 else math.hypot(delta_pos, delta_ang)
    return PlantedInstance(B, pattern, E, bound, U, metric, np.asarray(idx, dtype=np.int64))


def translation_grid_oracle(P, B, metric: Metric | str, step: float = 1e-3, radius: float | None = None) -> float:
    """Minimum exact Hausdorff over translation grids around every ``b - P[0]``.

    ``radius`` defaults to the value of the best pin, which bounds how far
    an optimal translation can be from some pin.
    """
    if not step > 0.0:
        raise ValueError(f"step must be positive, got {step}")
    P = as_pointset(P, role="pattern").require_nonempty("pattern")
    B = as_pointset(B).require_nonempty("background")
    metric = Metric.parse(metric)
    Pd, Bd = P.data, B.data
    pins = Bd[:, :2] - Pd[0, :2]
    if radius is None:
        radius = min(_h_translated(Pd, Bd, metric, v) for v in pins)
    k = int(math.ceil(radius / step))
    off = np.arange(-k, k + 1) * step
    ox, oy = (a.ravel() for a in np.meshgrid(off, off, indexing="ij"))
    best = math.inf
    for v in pins:
        T = np.column_stack([v[0] + ox, v[1] + oy])
        best = min(best, float(_h_many(Pd, Bd, metric, T).min()))
    return best


def _h_translated(Pd, Bd, metric, v) -> float:
    Q = Pd.copy()
    Q[:, :2] += v
    return float(pairwise_mu(metric, Q, Bd).min(axis=1).max())


def _h_many(Pd, Bd, metric, T, chunk: int = 4096) -> np.ndarray:
    """Exact Hausdorff for many translations ``T`` (k, 2) at once."""
    out = np.empty(len(T))
    da = np.abs(Pd[:, None, 2] - Bd[None, :, 2])
    da = np.minimum(da, TWO_PI - da)  # (m, n), translation-invariant
    for c0 in range(0, len(T), chunk):
        t = T[c0:c0 + chunk]
        dx = np.abs(Pd[None, :, None, 0] + t[:, None, None, 0] - Bd[None, None, :, 0])
        dy = np.abs(Pd[None, :, None, 1] + t[:, None, None, 1] - Bd[None, None, :, 1])
        if metric is Metric.L1:
            d = dx + dy + da[None]
        else:
            d = np.sqrt(dx * dx + dy * dy + da[None] ** 2)
        out[c0:c0 + chunk] = d.min(axis=2).max(axis=1)
    return out


def _mu_rows(metric: Metric, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Row-wise metric between two (k, 3) arrays."""
    dx = np.abs(x[:, 0] - y[:, 0])
    dy = np.abs(x[:, 1] - y[:, 1])
    da = np.abs(x[:, 2] - y[:, 2])
    da = np.minimum(da, TWO_PI - da)
    return dx + dy + da if metric is Metric.L1 else np.sqrt(dx * dx + dy * dy + da * da)


@dataclass
class LemmaReport:
    trials: int
    violations: int
    max_slack: float
    max_excess: float

    @property
    def ok(self) -> bool:
        return self.violations == 0


def check_rotation_lemma(trials: int, seed=None, metric: Metric | str = Metric.L2, m: int = 8,
                         rtol: float = 1e-9) -> LemmaReport:
    """Rotate random sets about a random centre; compare each point's movement
    with ``|q - q'|_i + pi |q - q'|_2 / (2 D)``, where ``q`` is the point
    farthest from the centre at distance ``D``."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    metric = Metric.parse(metric)
    rng = np.random.default_rng(seed)
    pts = rng.uniform(-5.0, 5.0, size=(trials, m, 2))
    c = rng.uniform(-5.0, 5.0, size=(trials, 1, 2))
    theta = rng.uniform(0.0, TWO_PI, size=(trials, 1))
    rel = pts - c
    rad = np.hypot(rel[..., 0], rel[..., 1])
    qi = np.argmax(rad, axis=1)
    D = rad[np.arange(trials), qi]
    co, si = np.cos(theta), np.sin(theta)
    mx = co * rel[..., 0] - si * rel[..., 1] - rel[..., 0]
    my = si * rel[..., 0] + co * rel[..., 1] - rel[..., 1]
    ang = np.minimum(theta, TWO_PI - theta)  # wrapped orientation change
    qx = mx[np.arange(trials), qi][:, None]
    qy = my[np.arange(trials), qi][:, None]
    q2 = np.hypot(qx, qy)
    if metric is Metric.L1:
        lhs = np.abs(mx) + np.abs(my) + ang
        qi_norm = np.abs(qx) + np.abs(qy)
    else:
        lhs = np.sqrt(mx * mx + my * my + ang * ang)
        qi_norm = q2
    rhs = qi_norm + math.pi * q2 / (2.0 * D[:, None])
    excess = lhs - rhs
    tol = rtol * np.maximum(1.0, np.abs(rhs))
    viol = int(np.count_nonzero((excess > tol).any(axis=1)))
    return LemmaReport(trials, viol, float((rhs - lhs).min(axis=1).max()), float((excess / np.maximum(rhs, 1e-300)).max()))


def check_translation_lemma(trials: int, seed=None, metric: Metric | str = Metric.L2) -> LemmaReport:
    metric = Metric.parse(metric)
    rng = np.random.default_rng(seed)
    p = np.column_stack([rng.uniform(-10, 10, size=(trials, 2)), rng.uniform(0, TWO_PI, trials)])
    v = rng.uniform(-10, 10, size=(trials, 2))
    q = p.copy()
    q[:, :2] += v
    d = _mu_rows(metric, p, q)
    norm = np.abs(v).sum(axis=1) if metric is Metric.L1 else np.hypot(v[:, 0], v[:, 1])
    err = np.abs(d - norm)
    tol = 1e-9 * np.maximum(1.0, norm)
    return LemmaReport(trials, int(np.count_nonzero(err > tol)), 0.0, float((err / np.maximum(norm, 1e-300)).max()))


def check_cube_lemma(trials: int, seed=None, l: float = 1.0, k: int = 3) -> tuple[LemmaReport, LemmaReport]:
    """For ``q`` within ``k l`` of the centre, the nearest grid point is within
    ``l`` in L1 and ``l / sqrt 2`` in L2.  Returns the L1 and L2 reports."""
    rng = np.random.default_rng(seed)
    out = []
    for norm in ("l1", "l2"):
        if norm == "l1":
            u = rng.uniform(-1, 1, size=(trials, 2))
            q = k * l * np.column_stack([(u[:, 0] + u[:, 1]) / 2, (u[:, 0] - u[:, 1]) / 2])
        else:
            r = k * l * np.sqrt(rng.uniform(0, 1, trials))
            a = rng.uniform(0, TWO_PI, trials)
            q = np.column_stack([r * np.cos(a), r * np.sin(a)])
        # brute-force nearest grid point over the whole (2k+1)^2 grid
        off = np.arange(-k, k + 1) * l
        gx, gy = (a.ravel() for a in np.meshgrid(off, off, indexing="ij"))
        dx = q[:, None, 0] - gx[None, :]
        dy = q[:, None, 1] - gy[None, :]
        if norm == "l1":
            d = (np.abs(dx) + np.abs(dy)).min(axis=1)
            bound = l
        else:
            d = np.hypot(dx, dy).min(axis=1)
            bound = l / math.sqrt(2.0)
        viol = int(np.count_nonzero(d > bound * (1 + 1e-9)))
        out.append(LemmaReport(trials, viol, float((bound - d).min()), float(d.max() / bound - 1.0)))
    return out[0], out[1]


def check_metric_axioms(trials: int, seed=None, metric: Metric | str = Metric.L2) -> LemmaReport:
    """Identity, symmetry and the triangle inequality on random triples."""
    metric = Metric.parse(metric)
    rng = np.random.default_rng(seed)

    def pts():
        return np.column_stack([rng.uniform(-5, 5, size=(trials, 2)), rng.uniform(0, TWO_PI, trials)])

    a, b, c = pts(), pts(), pts()
    ab, ba, bc = _mu_rows(metric, a, b), _mu_rows(metric, b, a), _mu_rows(metric, b, c)
    ac, aa = _mu_rows(metric, a, c), _mu_rows(metric, a, a)
    tol = 1e-9 * np.maximum(1.0, ab + bc)
    bad = (aa != 0.0) | (np.abs(ab - ba) > tol) | (ac > ab + bc + tol) | (ab < 0)
    return LemmaReport(trials, int(np.count_nonzero(bad)), float((ab + bc - ac).min()), 0.0)


__all__ = [
    "PlantedInstance",
    "LemmaReport",
    "angular_distance",
    "check_cube_lemma",
    "check_metric_axioms",
    "check_rotation_lemma",
    "check_translation_lemma",
    "plant",
    "random_background",
    "random_motion",
    "translation_grid_oracle",
]
