"""Command-line entry point: ``opmatch {match,gen,bench,nn-check}``."""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .ann import contract_violations, resolve_threads
from .experiments import EXPERIMENTS, ExperimentConfig, write_csv
from .geometry import EmptySetError, Metric
from .io import FormatError, format_opts, load_opts
from .matchers import MotionClass, match
from .oracle import plant, random_background


def _threads(v: str):
    if v == "max":
        return v
    try:
        t = int(v)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a positive integer or 'max', got {v!r}") from None
    if t < 1:
        raise argparse.ArgumentTypeError(f"threads must be >= 1, got {t}")
    return t


def _nonneg(v: str) -> float:
    x = float(v)
    if not x >= 0.0:
        raise argparse.ArgumentTypeError(f"expected a value >= 0, got {v}")
    return x


def _positive(v: str) -> float:
    x = float(v)
    if not x > 0.0:
        raise argparse.ArgumentTypeError(f"expected a value > 0, got {v}")
    return x


def _count(v: str) -> int:
    x = int(v)
    if x < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {v}")
    return x


def _emit(d: dict, as_json: bool, out) -> None:
    if as_json:
        out.write(json.dumps(d, indent=2) + "\n")
        return
    for k, v in d.items():
        out.write(f"{k}: {v!r}\n" if isinstance(v, float) else f"{k}: {v}\n")


def cmd_match(args, out) -> int:
    P = load_opts(args.pattern, role="pattern")
    B = load_opts(args.background)
    r = match(P, B, args.motion, args.metric, args.eps, base_only=args.base_only, variant=args.variant,
              threads=resolve_threads(args.threads))
    d = r.as_dict()
    d["variant"] = r.info.get("variant", "")
    d["eps"] = args.eps
    if args.seed is not None:
        d["seed"] = args.seed
    _emit(d, args.json, out)
    return 0


def cmd_gen(args, out) -> int:
    rng = np.random.default_rng(args.seed)
    B = random_background(args.n, rng, args.box)
    inst = plant(B, args.m, args.motion, args.perturb_pos, args.perturb_ang, metric=args.metric, box=args.box,
                 local=args.local, rng=rng)
    d = Path(args.out_dir)
    d.mkdir(parents=True, exist_ok=True)
    files = {
        "background": d / f"{args.prefix}background.opts",
        "pattern": d / f"{args.prefix}pattern.opts",
        "certificate": d / f"{args.prefix}certificate.json",
    }
    files["background"].write_text(format_opts(B), encoding="utf-8")
    files["pattern"].write_text(format_opts(inst.pattern), encoding="utf-8")
    cert = inst.certificate()
    cert.update(motion=MotionClass.parse(args.motion).value, n=args.n, m=args.m, seed=args.seed,
                perturb_pos=args.perturb_pos, perturb_ang=args.perturb_ang)
    files["certificate"].write_text(json.dumps(cert, indent=2) + "\n", encoding="utf-8")
    _emit({k: str(v) for k, v in files.items()} | {"certified_upper_bound": inst.certified_upper_bound},
          args.json, out)
    return 0


def cmd_bench(args, out) -> int:
    cfg = ExperimentConfig.load(args.config) if args.config else ExperimentConfig()
    if args.seed is not None:
        cfg.seed = args.seed
    _, rows = EXPERIMENTS[args.experiment](cfg)
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as f:
            write_csv(rows, f)
    else:
        write_csv(rows, out)
    return 0


def cmd_nn_check(args, out) -> int:
    total = 0
    report = {}
    for metric in args.metric:
        bad, worst = contract_violations(args.n, args.queries, args.eps_nn, args.seed, metric)
        total += bad
        report[f"worst_ratio_{metric}"] = worst
    d = {"n": args.n, "queries": args.queries, "eps_nn": args.eps_nn, "seed": args.seed, **report,
         "violations": total}
    _emit(d, args.json, out)
    return 0 if total == 0 else 1


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="opmatch", description="Oriented point-set pattern matching.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    m = sub.add_parser("match", help="match a pattern file against a background file")
    m.add_argument("--motion", choices=[c.value for c in MotionClass], required=True)
    m.add_argument("--metric", choices=[c.value for c in Metric], default="l2")
    m.add_argument("--eps", type=_positive, default=0.25)
    m.add_argument("--pattern", required=True)
    m.add_argument("--background", required=True)
    m.add_argument("--base-only", action="store_true", help="run the constant-factor base algorithm only")
    m.add_argument("--variant", choices=["auto", "large", "small"], default="auto")
    m.add_argument("--threads", type=_threads, default=1)
    m.add_argument("--seed", type=int, default=None, help="recorded in the output; matching is deterministic")
    m.add_argument("--json", action="store_true")
    m.set_defaults(fn=cmd_match)

    g = sub.add_parser("gen", help="write a planted instance and its certificate")
    g.add_argument("--n", type=_count, required=True)
    g.add_argument("--m", type=_count, required=True)
    g.add_argument("--motion", choices=[c.value for c in MotionClass], required=True)
    g.add_argument("--perturb-pos", type=_nonneg, default=0.0)
    g.add_argument("--perturb-ang", type=_nonneg, default=0.0)
    g.add_argument("--metric", choices=[c.value for c in Metric], default="l2")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--box", type=_positive, default=10.0)
    g.add_argument("--local", action="store_true", help="plant a spatially local subset (small diameter)")
    g.add_argument("--out-dir", default=".")
    g.add_argument("--prefix", default="")
    g.add_argument("--json", action="store_true")
    g.set_defaults(fn=cmd_gen)

    b = sub.add_parser("bench", help="run an experiment and emit CSV")
    b.add_argument("experiment", choices=sorted(EXPERIMENTS))
    b.add_argument("--config", default=None, help="JSON file with ExperimentConfig fields")
    b.add_argument("--out", default=None)
    b.add_argument("--seed", type=int, default=None)
    b.set_defaults(fn=cmd_bench)

    c = sub.add_parser("nn-check", help="check the ANN contract against a linear scan")
    c.add_argument("--n", type=_count, default=1000)
    c.add_argument("--queries", type=_count, default=10000)
    c.add_argument("--eps-nn", type=_nonneg, default=0.1)
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--metric", choices=[c.value for c in Metric], nargs="+", default=["l1", "l2"])
    c.add_argument("--json", action="store_true")
    c.set_defaults(fn=cmd_nn_check)
    return ap


def main(argv=None, out=None) -> int:
    out = out if out is not None else sys.stdout
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args, out)
    except (FormatError, EmptySetError, ValueError, OSError, MemoryError) as e:
        print(f"opmatch {args.command}: error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
