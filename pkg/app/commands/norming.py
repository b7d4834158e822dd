import argparse

from ..service.artifacts import write_csv
from ..service.dan_models import norming_table, parse_model
from ..service.experiments import run_ad188_check, run_vn_bn_concentration
from .common import add_out, add_replicates, add_seed, add_workers, emit, parse_ints, recorded_run


def _table(rows) -> str:
    return "\n".join(row.model_dump_json() for row in rows)


def tabulate_norming(args: argparse.Namespace) -> None:
    table = norming_table(parse_model(args.model), parse_ints(args.js))
    if args.out:
        write_csv(table.rows, args.out)
    emit(_table(table.rows))


def ad188(args: argparse.Namespace) -> None:
    rows = run_ad188_check(parse_model(args.model), parse_ints(args.ns))
    if args.out:
        write_csv(rows, args.out)
    emit(_table(rows))


def vn_bn(args: argparse.Namespace) -> None:
    model = parse_model(args.model)
    ns = parse_ints(args.ns)
    config = {"model": model.id, "ns": ns, "replicates": args.replicates, "seed": args.seed, "eps": args.eps}
    with recorded_run("vn-bn", f"vn-bn|{model.id}", config, args.seed):
        rows = run_vn_bn_concentration(model, ns, args.replicates, args.seed, args.eps, workers=args.workers)
    if args.out:
        write_csv(rows, args.out)
    emit(_table(rows))


def register(subparsers) -> None:
    p = subparsers.add_parser("tabulate-norming", help="eta_j, l(eta_j), b_j^2 and sigma*_j for a model")
    p.add_argument("--model", required=True, help="rademacher, normal, uniform:1, slowvary:0.5[:ratio]")
    p.add_argument("--js", required=True, help="comma-separated increasing indices")
    add_out(p, "CSV output")
    p.set_defaults(handler=tabulate_norming)

    p = subparsers.add_parser("ad188", help="deterministic sigma*-averaging sequence")
    p.add_argument("--model", required=True)
    p.add_argument("--ns", required=True)
    add_out(p, "CSV output")
    p.set_defaults(handler=ad188)

    p = subparsers.add_parser("vn-bn", help="concentration of V_n^2 / b_n^2 around one")
    p.add_argument("--model", required=True)
    p.add_argument("--ns", required=True)
    p.add_argument("--eps", type=float, default=0.1)
    add_replicates(p)
    add_seed(p)
    add_workers(p)
    add_out(p, "CSV output")
    p.set_defaults(handler=vn_bn)
