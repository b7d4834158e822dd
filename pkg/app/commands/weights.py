import argparse
import json

from ..service.artifacts import write_json
from ..service.criterion import DEFAULT_MAX_DEPTH, DEFAULT_TAIL_TOL, classify_criterion, lp_criterion
from ..service.weights import parse_weight, validate_class_q
from .common import add_out, emit, parse_floats


def classify_weight(args: argparse.Namespace) -> None:
    w = parse_weight(args.weight)
    kwargs = {"max_depth": args.max_depth, "tail_tol": args.tail_tol}
    if args.lp is not None:
        report = lp_criterion(w, args.lp, **kwargs)
        summary = {"weight": report.weight, "p": report.p, "verdict": report.verdict.value}
    else:
        if args.c_grid:
            kwargs["c_grid"] = parse_floats(args.c_grid)
        report = classify_criterion(w, **kwargs)
        summary = {
            "weight": report.weight,
            "verdict": report.verdict.value,
            "c_threshold_estimate": report.c_threshold_estimate,
            "inconclusive_c": report.inconclusive_c,
            "diagnostics": report.diagnostics,
        }
    if args.out:
        write_json(report, args.out)
    emit(json.dumps(summary, indent=2))


def validate_weight(args: argparse.Namespace) -> None:
    report = validate_class_q(parse_weight(args.weight), grid_size=args.grid_size)
    emit(report.model_dump_json(indent=2))


def register(subparsers) -> None:
    p = subparsers.add_parser("classify-weight", help="decide finiteness of I(q,c) or of the L_p integral")
    p.add_argument("--weight", required=True, help="e.g. power:0.4, sqrtloglog:1, 2*sqrtlog:1")
    p.add_argument("--c-grid", default=None, help="comma-separated increasing c values")
    p.add_argument("--max-depth", type=int, default=DEFAULT_MAX_DEPTH)
    p.add_argument("--tail-tol", type=float, default=DEFAULT_TAIL_TOL)
    p.add_argument("--lp", type=float, default=None, metavar="P", help="classify the L_p criterion instead")
    add_out(p, "write the full verdict with block series as JSON")
    p.set_defaults(handler=classify_weight)

    p = subparsers.add_parser("validate-weight", help="grid scan for class-Q membership")
    p.add_argument("--weight", required=True)
    p.add_argument("--grid-size", type=int, default=1000)
    p.set_defaults(handler=validate_weight)
