"""Acceptance criteria. Each test prints one ``[PASS]``/``[FAIL]`` line.

Run with ``pytest -v tests/test_acceptance.py`` or directly as a script.
"""
from __future__ import annotations

import contextlib
import io
import math
import sys
import time
import warnings
from pathlib import Path

import numpy as np

from opmatch.ann import contract_violations
from opmatch.cli import main as cli_main
from opmatch.experiments import ExperimentConfig, run_accuracy, run_query_counts
from opmatch.geometry import TWO_PI
from opmatch.io import format_opts, ingest_minutiae, load_opts
from opmatch.matchers import (
    DSTAR_TR_H1,
    DSTAR_TR_H2,
    DSTAR_TRS_H1,
    DSTAR_TRS_H2,
    base_gr_unoriented,
    base_tr_large,
    base_tr_small,
    base_translate,
    base_trs_large,
    base_trs_small,
    eps_tr,
    eps_translate,
    eps_trs,
    match,
    run_base,
)
from opmatch.oracle import (
    check_cube_lemma,
    check_metric_axioms,
    check_rotation_lemma,
    check_translation_lemma,
    plant,
    random_background,
    translation_grid_oracle,
)

DATA = Path(__file__).parent / "data"
METRICS = ("l1", "l2")
TRIALS = 100_000
# instance family for the ratio certificates
FAMILY = dict(n=200, m=20, perturb=0.05, box=10.0)


def _family(motion, metric, count, seed, local=False, n=FAMILY["n"], m=FAMILY["m"], box=FAMILY["box"]):
    rng = np.random.default_rng(seed)
    for _ in range(count):
        B = random_background(n, rng, box)
        yield plant(B, m, motion, FAMILY["perturb"], FAMILY["perturb"], metric=metric, box=box, local=local,
                    rng=rng)


def _report(num, title, ok, detail, elapsed, limit):
    within = elapsed < limit
    status = "PASS" if ok and within else "FAIL"
    timing = f"{elapsed:.1f}s / {limit:.0f}s" + ("" if within else " (over budget)")
    return f"[{status}] criterion {num}: {title} :: {detail} [{timing}]", ok and within


def _run(capsys, num, title, fn, limit):
    t0 = time.perf_counter()
    ok, detail = fn()
    line, passed = _report(num, title, ok, detail, time.perf_counter() - t0, limit)
    if capsys is None:
        print(line, flush=True)
    else:
        with capsys.disabled():
            print("\n" + line, flush=True)
    return passed


# -- 1 -------------------------------------------------------------------------

def check_lemmas():
    bad = []
    for i, m in enumerate(METRICS):
        reports = {
            "axioms": check_metric_axioms(TRIALS, seed=10 + i, metric=m),
            "translation distance": check_translation_lemma(TRIALS, seed=20 + i, metric=m),
            "rotation distance": check_rotation_lemma(TRIALS, seed=30 + i, metric=m),
        }
        for name, r in reports.items():
            if r.violations:
                bad.append(f"{name} {m}: {r.violations}/{r.trials} (worst relative excess {r.max_excess:.3g})")
    c1, c2 = check_cube_lemma(TRIALS, seed=40, l=0.37, k=4)
    for name, r in (("cube l1", c1), ("cube l2", c2)):
        if r.violations:
            bad.append(f"{name}: {r.violations}/{r.trials}")
    return not bad, "zero violations" if not bad else "; ".join(bad)


# -- 2 -------------------------------------------------------------------------

def check_ann():
    total, worst = 0, 0.0
    for n in (100, 1000):
        for eps_nn in (0.0, 0.1, 0.5):
            for m in METRICS:
                bad, w = contract_violations(n, 10_000, eps_nn, seed=n + int(eps_nn * 10), metric=m)
                total += bad
                worst = max(worst, w / (1 + eps_nn))
    return total == 0, f"violations {total}, worst ratio / (1+eps_nn) = {worst:.6f}"


# -- 3 -------------------------------------------------------------------------

def _class_matchers(motion, metric):
    if motion == "t":
        return {
            "base_translate": lambda P, B: base_translate(P, B, metric),
            "eps_translate": lambda P, B: eps_translate(P, B, metric, 0.25),
        }
    if motion == "tr":
        return {
            "base_tr_large": lambda P, B: base_tr_large(P, B, metric),
            "base_tr_small": lambda P, B: base_tr_small(P, B, metric),
            "base_gr_unoriented": lambda P, B: base_gr_unoriented(P, B),
            "eps_tr large": lambda P, B: eps_tr(P, B, metric, 0.25, variant="large"),
            "eps_tr small": lambda P, B: eps_tr(P, B, metric, 0.25, variant="small"),
        }
    return {
        "base_trs_large": lambda P, B: base_trs_large(P, B, metric),
        "base_trs_small": lambda P, B: base_trs_small(P, B, metric),
        "eps_trs large": lambda P, B: eps_trs(P, B, metric, 0.25, variant="large"),
        "eps_trs small": lambda P, B: eps_trs(P, B, metric, 0.25, variant="small"),
    }


def check_exact_recovery():
    worst, fails = 0.0, []
    for k, motion in enumerate(("t", "tr", "trs")):
        for j, metric in enumerate(METRICS):
            rng = np.random.default_rng(300 + 10 * k + j)
            fns = _class_matchers(motion, metric)
            for _ in range(100):
                B = random_background(50, rng, 10.0)
                inst = plant(B, 8, motion, 0.0, 0.0, metric=metric, rng=rng)
                for name, fn in fns.items():
                    h = fn(inst.pattern, B).hausdorff
                    worst = max(worst, h)
                    if h > 1e-9:
                        fails.append(f"{name}/{metric}")
    detail = f"max hausdorff {worst:.3g} over 600 instances"
    return not fails, detail if not fails else f"{detail}; failing: {sorted(set(fails))}"


# -- 4 -------------------------------------------------------------------------

BASE_CASES = (
    ("t", "large", "base_translate"),
    ("tr", "large", "base_tr_large"),
    ("tr", "small", "base_tr_small"),
    ("trs", "large", "base_trs_large"),
    ("trs", "small", "base_trs_small"),
)


def check_base_ratios(count=500, eps=0.25):
    viol, parts = 0, []
    for k, (motion, variant, name) in enumerate(BASE_CASES):
        for j, metric in enumerate(METRICS):
            w = 0.0
            for inst in _family(motion, metric, count, 400 + 10 * k + j):
                r = run_base(inst.pattern, inst.background, motion, metric, eps, variant=variant)
                ratio = r.hausdorff / (r.info["bound"] * inst.certified_upper_bound)
                viol += ratio > 1.0
                w = max(w, ratio)
            parts.append(f"{name}/{metric} {w:.3f}")
    return viol == 0, f"violations {viol}; worst result / ((A_i+eps) U): " + ", ".join(parts)


# -- 5 -------------------------------------------------------------------------

def check_eps_schemes(count=500):
    viol, parts = 0, []
    for k, motion in enumerate(("t", "tr", "trs")):
        for j, metric in enumerate(METRICS):
            w = 0.0
            variants = set()
            for inst in _family(motion, metric, count, 500 + 10 * k + j):
                for eps in (0.5, 0.25):
                    r = match(inst.pattern, inst.background, motion, metric, eps)
                    ratio = r.hausdorff / ((1 + eps) * inst.certified_upper_bound)
                    viol += ratio > 1.0
                    w = max(w, ratio)
                    variants.add(r.info.get("variant", "large"))
            parts.append(f"{motion}/{metric} [{'/'.join(sorted(variants))}] {w:.3f}")
    return viol == 0, f"violations {viol}; worst result / ((1+eps) U): " + ", ".join(parts)


def check_eps_small_variants(tr_count=500, trs_count=20):
    """The default family has large diameters only; spatially local patterns
    in a smaller box exercise the small-diameter schemes."""
    viol, parts = 0, []
    for k, (motion, count, fn) in enumerate((("tr", tr_count, eps_tr), ("trs", trs_count, eps_trs))):
        for j, metric in enumerate(METRICS):
            w = 0.0
            for inst in _family(motion, metric, count, 600 + 10 * k + j, local=True, n=100, m=5, box=3.0):
                for eps in (0.5, 0.25):
                    with warnings.catch_warnings():
                        warnings.simplefilter("ignore")
                        r = fn(inst.pattern, inst.background, metric, eps, variant="small")
                    ratio = r.hausdorff / ((1 + eps) * inst.certified_upper_bound)
                    viol += ratio > 1.0
                    w = max(w, ratio)
            parts.append(f"{motion}-small/{metric} x{count} {w:.3f}")
    return viol == 0, f"violations {viol}; " + ", ".join(parts)


# -- 6 -------------------------------------------------------------------------

def check_dstar():
    got = {"TR h1": DSTAR_TR_H1, "TR h2": DSTAR_TR_H2, "TRS h1": DSTAR_TRS_H1, "TRS h2": DSTAR_TRS_H2}
    want = {"TR h1": 3.68, "TR h2": 3.95, "TRS h1": 1.46, "TRS h2": 2.36}
    ok = all(abs(got[k] - want[k]) <= 0.01 for k in got)
    return ok, ", ".join(f"{k} {got[k]:.4f} (want {want[k]})" for k in got)


# -- 7 -------------------------------------------------------------------------

def check_experiments():
    cfg = ExperimentConfig()
    rates, _ = run_accuracy(cfg)
    qcfg = ExperimentConfig(background_sizes=[cfg.background_size], pattern_sizes=[cfg.pattern_size])
    counts, _ = run_query_counts(qcfg)
    n = cfg.background_size
    q = {a: counts[a][n] for a in counts}
    ld = {h: rates[f"LD_{h}"] for h in ("h1", "h2")}
    sd = {h: rates[f"SD_{h}"] for h in ("h1", "h2")}
    checks = {
        "LD,SD >= GR": all(v >= rates["GR"] for v in (*ld.values(), *sd.values())),
        "LD >= SD": all(ld[h] >= sd[h] for h in ld),
        "LD queries == GR queries": q["LD_h1"] == q["GR"] and q["LD_h2"] == q["GR"],
        "SD queries <= LD / 10": all(q[f"SD_{h}"] * 10 <= q[f"LD_{h}"] for h in ("h1", "h2")),
    }
    acc = ", ".join(f"{a} {rates[a]:.3f}" for a in rates)
    qs = ", ".join(f"{a} {q[a]:.0f}" for a in q)
    failed = [k for k, v in checks.items() if not v]
    return not failed, f"accuracy {acc}; queries {qs}" + (f"; failed: {failed}" if failed else "")


# -- 8 -------------------------------------------------------------------------

def _cli(argv):
    out = io.StringIO()
    with contextlib.redirect_stderr(io.StringIO()):
        code = cli_main(argv, out)
    return code, out.getvalue()


def check_determinism(tmpdir):
    problems = []
    for motion in ("t", "tr", "trs"):
        d = Path(tmpdir) / motion
        gen = ["gen", "--n", "80", "--m", "10", "--motion", motion, "--perturb-pos", "0.03", "--perturb-ang", "0.03",
               "--seed", "17", "--out-dir", str(d)]
        _cli(gen)
        first = (d / "pattern.opts").read_bytes()
        _cli(gen)
        if (d / "pattern.opts").read_bytes() != first:
            problems.append(f"gen {motion} not reproducible")
        for metric in METRICS:
            args = ["match", "--motion", motion, "--metric", metric, "--eps", "0.25", "--seed", "17",
                    "--pattern", str(d / "pattern.opts"), "--background", str(d / "background.opts")]
            outs = {_cli(args + ["--threads", t]) for t in ("1", "max", "1", "2")}
            if len(outs) != 1 or next(iter(outs))[0] != 0:
                problems.append(f"match {motion}/{metric} differs")
    # golden files for both input formats
    S = load_opts(DATA / "sample.opts")
    if not np.array_equal(S.data, [[0.0, 0.0, 0.0], [1.5, -2.25, math.pi], [-0.125, 400.0, 7.0 - TWO_PI]]):
        problems.append("opts golden parse")
    if format_opts(S, "three oriented points") != (DATA / "sample_canonical.opts").read_text():
        problems.append("opts golden format")
    M = ingest_minutiae(DATA / "minutiae.csv", scale=0.01, quality_min=50)
    if not (np.allclose(M.xy, [[1.0, 2.0], [1.2, -0.3]]) and np.array_equal(M.angles, [0.0, math.pi])):
        problems.append("minutiae golden")
    return not problems, "identical across threads 1/2/max and reruns; golden files match" if not problems \
        else "; ".join(problems)


# -- 9 -------------------------------------------------------------------------

def check_translation_oracle():
    rng = np.random.default_rng(900)
    viol, worst = 0, 0.0
    for i in range(50):
        n = int(rng.integers(5, 21))
        m = int(rng.integers(2, 6))
        metric = METRICS[i % 2]
        B = random_background(n, rng, 2.0)
        inst = plant(B, m, "t", 0.04, 0.04, metric=metric, box=2.0, rng=rng)
        ref = translation_grid_oracle(inst.pattern, B, metric, step=1e-3)
        for eps in (0.5, 0.25):
            h = eps_translate(inst.pattern, B, metric, eps).hausdorff
            ratio = h / ((1 + eps) * ref) if ref > 0 else (0.0 if h == 0 else math.inf)
            viol += ratio > 1.0
            worst = max(worst, ratio)
    return viol == 0, f"violations {viol}; worst result / ((1+eps) oracle) = {worst:.4f}"


# -- pytest wrappers -------------------------------------------------------------

def test_criterion_1_metric_and_lemma_suite(capsys):
    assert _run(capsys, 1, "metric axioms and distance lemmas", check_lemmas, 60)


def test_criterion_2_ann_contract(capsys):
    assert _run(capsys, 2, "ANN contract", check_ann, 60)


def test_criterion_3_exact_recovery(capsys):
    assert _run(capsys, 3, "exact recovery", check_exact_recovery, 60)


def test_criterion_4_base_ratio_certificates(capsys):
    assert _run(capsys, 4, "base ratio certificates", check_base_ratios, 600)


def test_criterion_5_eps_certificates(capsys):
    assert _run(capsys, 5, "(1+eps) certificates", check_eps_schemes, 1200)


def test_criterion_5_small_diameter_supplement(capsys):
    assert _run(capsys, "5s", "(1+eps) certificates, small-diameter schemes", check_eps_small_variants, 1200)


def test_criterion_6_dispatch_constants(capsys):
    assert _run(capsys, 6, "dispatch constants", check_dstar, 1)


def test_criterion_7_experiment_directions(capsys):
    assert _run(capsys, 7, "experiment directions", check_experiments, 900)


def test_criterion_8_determinism(capsys, tmp_path):
    assert _run(capsys, 8, "determinism and golden files", lambda: check_determinism(tmp_path), 300)


def test_criterion_9_translation_oracle(capsys):
    assert _run(capsys, 9, "translation oracle cross-check", check_translation_oracle, 300)


if __name__ == "__main__":
    import tempfile

    with tempfile.TemporaryDirectory() as tmp:
        jobs = [
            (1, "metric axioms and distance lemmas", check_lemmas, 60),
            (2, "ANN contract", check_ann, 60),
            (3, "exact recovery", check_exact_recovery, 60),
            (4, "base ratio certificates", check_base_ratios, 600),
            (5, "(1+eps) certificates", check_eps_schemes, 1200),
            ("5s", "(1+eps) certificates, small-diameter schemes", check_eps_small_variants, 1200),
            (6, "dispatch constants", check_dstar, 1),
            (7, "experiment directions", check_experiments, 900),
            (8, "determinism and golden files", lambda: check_determinism(tmp), 300),
            (9, "translation oracle cross-check", check_translation_oracle, 300),
        ]
        results = [_run(None, *job) for job in jobs]
    sys.exit(0 if all(results) else 1)
