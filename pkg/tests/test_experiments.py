import io
import json

import pytest

from opmatch.experiments import (
    CSV_FIELDS,
    LABELS,
    ExperimentConfig,
    read_csv,
    run_accuracy,
    run_query_counts,
    run_timing,
    write_csv,
)


def _small(**kw):
    base = dict(num_backgrounds=4, background_size=20, pattern_size=5, trials=4,
                background_sizes=[10, 20], pattern_sizes=[3, 5], repeats=2)
    base.update(kw)
    return ExperimentConfig(**base)


def test_defaults():
    cfg = ExperimentConfig()
    assert (cfg.num_backgrounds, cfg.background_size, cfg.pattern_size, cfg.trials) == (20, 100, 10, 200)
    assert tuple(cfg.algorithms) == LABELS


@pytest.mark.parametrize("bad", [
    {"trials": 0},
    {"pattern_size": 200},
    {"perturbation": (-0.1, 0.0)},
    {"algorithms": ["XX"]},
    {"algorithms": []},
    {"box": 0.0},
    {"background_sizes": [3]},
])
def test_validation(bad):
    with pytest.raises(ValueError):
        ExperimentConfig(**bad)


def test_config_json_round_trip(tmp_path):
    cfg = _small(seed=5)
    p = tmp_path / "c.json"
    p.write_text(json.dumps(cfg.to_dict()))
    assert ExperimentConfig.load(p) == cfg
    with pytest.raises(ValueError):
        ExperimentConfig.from_dict({"bogus": 1})


def test_query_counts_closed_form():
    cfg = _small()
    counts, rows = run_query_counts(cfg)
    m = cfg.pattern_size
    for n in cfg.background_sizes:
        assert counts["GR"][n] == counts["LD_h1"][n] == counts["LD_h2"][n] == n * n * m
        assert counts["SD_h1"][n] == counts["SD_h2"][n] == n * m
    assert len(rows) == len(LABELS) * 2 and {r.param for r in rows} == {"nn_queries"}


def test_accuracy_is_seeded_and_thread_invariant():
    cfg = _small()
    rates, rows = run_accuracy(cfg)
    assert set(rates) == set(LABELS) and all(0.0 <= v <= 1.0 for v in rates.values())
    assert run_accuracy(cfg)[0] == rates
    assert run_accuracy(_small(workers=3))[0] == rates
    assert {r.metric for r in rows} == {"positional", "l1", "l2"}


def test_timing_rows():
    cfg = _small(algorithms=["SD_h1", "GR"])
    times, rows = run_timing(cfg)
    assert [(r.algorithm, r.m) for r in rows] == [("SD_h1", 3), ("GR", 3), ("SD_h1", 5), ("GR", 5)]
    assert all(r.value > 0 for r in rows)


def test_csv_round_trip():
    _, rows = run_query_counts(_small(algorithms=["GR", "SD_h2"]))
    out = io.StringIO()
    write_csv(rows, out)
    text = out.getvalue()
    assert text.splitlines()[0] == ",".join(CSV_FIELDS)
    assert read_csv(text) == rows
