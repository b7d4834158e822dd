import argparse
from pathlib import Path

from ..service.artifacts import write_csv, write_json
from ..service.experiments import COUNTEREXAMPLE_GRID_RATIO, COUNTEREXAMPLE_THRESHOLD, run_counterexample, run_near_origin_check
from ..service.weights import parse_weight
from .common import add_replicates, add_seed, add_workers, emit, parse_floats, parse_ints, recorded_run


def counterexample(args: argparse.Namespace) -> None:
    ns = parse_ints(args.ns)
    config = {"ns": ns, "replicates": args.replicates, "seed": args.seed, "threshold": args.threshold, "alpha": args.alpha}
    with recorded_run("counterexample", f"counterexample|{args.threshold}", config, args.seed, str(args.output_dir)):
        report = run_counterexample(
            ns, args.replicates, args.seed, threshold=args.threshold, alpha=args.alpha,
            grid_ratio=args.grid_ratio, workers=args.workers,
        )
    write_json(report, args.output_dir / "counterexample.json")
    write_csv(report.window_rows, args.output_dir / "window_sup.csv")
    write_csv(report.norming_rows, args.output_dir / "norming_decay.csv")
    emit(report.model_dump_json(indent=2))


def near_origin(args: argparse.Namespace) -> None:
    weights = [parse_weight(spec) for spec in args.weights.split(";") if spec.strip()]
    deltas = parse_floats(args.deltas)
    config = {"weights": [w.id for w in weights], "deltas": deltas, "replicates": args.replicates, "seed": args.seed}
    with recorded_run("near-origin", "near-origin", config, args.seed):
        rows = run_near_origin_check(weights, deltas, args.replicates, args.seed, workers=args.workers)
    if args.out:
        write_csv(rows, args.out)
    emit("\n".join(row.model_dump_json() for row in rows))


def register(subparsers) -> None:
    p = subparsers.add_parser("counterexample", help="window sups for q^2 = t loglog(1/t) against sqrtlog")
    p.add_argument("--ns", default="1000,1000000")
    p.add_argument("--threshold", type=float, default=COUNTEREXAMPLE_THRESHOLD)
    p.add_argument("--alpha", type=float, default=0.5)
    p.add_argument("--grid-ratio", type=float, default=COUNTEREXAMPLE_GRID_RATIO)
    add_replicates(p, default=5000)
    add_seed(p)
    add_workers(p)
    p.add_argument("--output-dir", type=Path, default=Path("runs/counterexample"))
    p.set_defaults(handler=counterexample)

    p = subparsers.add_parser("near-origin", help="sup over (0, delta] of |W|/q as delta shrinks")
    p.add_argument("--weights", default="sqrtlog:1;sqrtloglog:1", help="semicolon-separated weight specs")
    p.add_argument("--deltas", default="0.1,0.01,0.001,0.0001")
    add_replicates(p)
    add_seed(p)
    add_workers(p)
    p.add_argument("--out", type=Path, default=None)
    p.set_defaults(handler=near_origin)
