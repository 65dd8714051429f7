"""Seeded experiment drivers: identification accuracy, NN-query counts and
running time of the base algorithms against the unoriented baseline."""
from __future__ import annotations

import csv
import io
import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from typing import Callable, Iterable, TextIO

import numpy as np

from .geometry import Metric
from .matchers import MatchResult, base_gr_unoriented, base_tr_large, base_tr_small
from .oracle import plant, random_background

LABELS = ("GR", "LD_h1", "LD_h2", "SD_h1", "SD_h2")
CSV_FIELDS = ("experiment", "algorithm", "metric", "n", "m", "param", "value", "seed")
TIMING_REPEATS = 5


def _algorithm(label: str) -> tuple[Callable[..., MatchResult], str]:
    """Matcher and metric name for an experiment label."""
    if label == "GR":
        return (lambda P, B, eps_nn, prune: base_gr_unoriented(P, B, eps_nn, prune=prune)), "positional"
    kind, _, h = label.partition("_")
    metric = {"h1": Metric.L1, "h2": Metric.L2}.get(h)
    base = {"LD": base_tr_large, "SD": base_tr_small}.get(kind)
    if metric is None or base is None:
        raise ValueError(f"unknown algorithm label {label!r}; expected one of {', '.join(LABELS)}")
    return (lambda P, B, eps_nn, prune: base(P, B, metric, eps_nn, prune=prune)), metric.value


@dataclass
class ExperimentConfig:
    num_backgrounds: int = 20
    background_size: int = 100
    pattern_size: int = 10
    perturbation: tuple[float, float] = (0.04, 0.25)
    trials: int = 200
    algorithms: list[str] = field(default_factory=lambda: list(LABELS))
    seed: int = 0
    # background positions are uniform in [0, box]^2
    box: float = 1.0
    eps_nn: float = 0.0
    # sweeps for the query-count and timing experiments
    background_sizes: list[int] = field(default_factory=lambda: [50, 100, 200])
    pattern_sizes: list[int] = field(default_factory=lambda: [5, 10, 20])
    repeats: int = TIMING_REPEATS
    workers: int = 1

    def __post_init__(self) -> None:
        self.perturbation = tuple(float(v) for v in self.perturbation)
        self.algorithms = list(self.algorithms)
        self.validate()

    def validate(self) -> None:
        def positive(name):
            v = getattr(self, name)
            if not (isinstance(v, (int, np.integer)) and v >= 1):
                raise ValueError(f"{name} must be a positive integer, got {v!r}")

        for name in ("num_backgrounds", "background_size", "pattern_size", "trials", "repeats", "workers"):
            positive(name)
        if self.pattern_size > self.background_size:
            raise ValueError("pattern_size cannot exceed background_size")
        if len(self.perturbation) != 2 or min(self.perturbation) < 0.0:
            raise ValueError(f"perturbation must be (delta_pos, delta_ang) >= 0, got {self.perturbation}")
        if not self.box > 0.0:
            raise ValueError(f"box must be positive, got {self.box}")
        if not self.eps_nn >= 0.0:
            raise ValueError(f"eps_nn must be >= 0, got {self.eps_nn}")
        if not self.algorithms:
            raise ValueError("algorithms must not be empty")
        for a in self.algorithms:
            _algorithm(a)
        if not self.background_sizes or min(self.background_sizes) < 1:
            raise ValueError("background_sizes must be positive")
        if not self.pattern_sizes or min(self.pattern_sizes) < 1:
            raise ValueError("pattern_sizes must be positive")
        if min(self.background_sizes) < self.pattern_size:
            raise ValueError("every background size must be at least pattern_size")
        if max(self.pattern_sizes) > self.background_size:
            raise ValueError("every pattern size must be at most background_size")

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        extra = set(d) - known
        if extra:
            raise ValueError(f"unknown config keys: {', '.join(sorted(extra))}")
        return cls(**d)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        with open(path, encoding="utf-8") as f:
            return cls.from_dict(json.load(f))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["perturbation"] = list(self.perturbation)
        return d


@dataclass(frozen=True)
class Row:
    experiment: str
    algorithm: str
    metric: str
    n: int
    m: int
    param: str
    value: float
    seed: int


def _streams(seed: int, k: int) -> list[np.random.Generator]:
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(k)]


def _map(workers: int, fn, items):
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


def _trial_instances(cfg: ExperimentConfig, rng: np.random.Generator, n: int, m: int):
    backgrounds = [random_background(n, rng, cfg.box) for _ in range(cfg.num_backgrounds)]
    origin = int(rng.integers(cfg.num_backgrounds))
    dp, da = cfg.perturbation
    inst = plant(backgrounds[origin], m, "tr", dp, da, rng=rng, box=cfg.box)
    return backgrounds, origin, inst.pattern


def _single_instance(cfg: ExperimentConfig, rng: np.random.Generator, n: int, m: int):
    B = random_background(n, rng, cfg.box)
    dp, da = cfg.perturbation
    return B, plant(B, m, "tr", dp, da, rng=rng, box=cfg.box).pattern


# -- accuracy -----------------------------------------------------------------

def accuracy_trial(cfg: ExperimentConfig, rng: np.random.Generator) -> dict[str, bool]:
    """One trial: does each algorithm rank the origin background strictly first?"""
    backgrounds, origin, P = _trial_instances(cfg, rng, cfg.background_size, cfg.pattern_size)
    out = {}
    for label in cfg.algorithms:
        fn, _ = _algorithm(label)
        d = np.array([fn(P, B, cfg.eps_nn, True).hausdorff for B in backgrounds])
        others = np.delete(d, origin)
        out[label] = bool(d[origin] < others.min()) if len(others) else True
    return out


def run_accuracy(cfg: ExperimentConfig) -> tuple[dict[str, float], list[Row]]:
    results = _map(cfg.workers, lambda r: accuracy_trial(cfg, r), _streams(cfg.seed, cfg.trials))
    rates = {a: sum(r[a] for r in results) / cfg.trials for a in cfg.algorithms}
    rows = [
        Row("accuracy", a, _algorithm(a)[1], cfg.background_size, cfg.pattern_size, "success_rate", rates[a], cfg.seed)
        for a in cfg.algorithms
    ]
    return rates, rows


# -- NN-query counts ----------------------------------------------------------

def run_query_counts(cfg: ExperimentConfig) -> tuple[dict[str, dict[int, float]], list[Row]]:
    """Mean queries per run, pruning disabled so every candidate is scored in full."""
    counts: dict[str, dict[int, float]] = {a: {} for a in cfg.algorithms}
    rows = []
    for i, n in enumerate(cfg.background_sizes):
        def one(rng, n=n):
            B, P = _single_instance(cfg, rng, n, cfg.pattern_size)
            return {a: _algorithm(a)[0](P, B, cfg.eps_nn, False).nn_queries for a in cfg.algorithms}

        rngs = _streams(cfg.seed + i, cfg.trials)

        per = _map(cfg.workers, one, rngs)
        for a in cfg.algorithms:
            counts[a][n] = float(np.mean([r[a] for r in per]))
            rows.append(Row("queries", a, _algorithm(a)[1], n, cfg.pattern_size, "nn_queries", counts[a][n], cfg.seed))
    return counts, rows


# -- timing -------------------------------------------------------------------

def run_timing(cfg: ExperimentConfig) -> tuple[dict[str, dict[int, float]], list[Row]]:
    """Median wall time over ``repeats`` runs per pattern size (pruning disabled)."""
    times: dict[str, dict[int, float]] = {a: {} for a in cfg.algorithms}
    rows = []
    for i, m in enumerate(cfg.pattern_sizes):
        rng = _streams(cfg.seed + i, 1)[0]
        B, P = _single_instance(cfg, rng, cfg.background_size, m)
        for a in cfg.algorithms:
            fn, metric = _algorithm(a)
            samples = []
            for _ in range(cfg.repeats):
                t0 = time.perf_counter()
                fn(P, B, cfg.eps_nn, False)
                samples.append(time.perf_counter() - t0)
            times[a][m] = float(np.median(samples))
            rows.append(Row("time", a, metric, cfg.background_size, m, "median_seconds", times[a][m], cfg.seed))
    return times, rows


EXPERIMENTS = {"accuracy": run_accuracy, "queries": run_query_counts, "time": run_timing}


def write_csv(rows: Iterable[Row], out: TextIO) -> None:
    w = csv.writer(out, lineterminator="\n")
    w.writerow(CSV_FIELDS)
    for r in rows:
        w.writerow([r.experiment, r.algorithm, r.metric, r.n, r.m, r.param, repr(float(r.value)), r.seed])


def read_csv(text: str) -> list[Row]:
    rd = csv.reader(io.StringIO(text))
    header = next(rd)
    if tuple(header) != CSV_FIELDS:
        raise ValueError(f"unexpected CSV header {header}")
    return [Row(e, a, mt, int(n), int(m), p, float(v), int(s)) for e, a, mt, n, m, p, v, s in rd]
