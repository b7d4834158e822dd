import argparse
import json
import logging
from pathlib import Path
from typing import Any, Dict

import pandas as pd

from ..core.errors import ArtifactError, ConfigValidationError, NumericRefusal
from ..core.schemas import ConvergenceReport, ExperimentConfig, FunctionalKind, Normalization, TauRule
from ..service.artifacts import (
    read_artifact,
    require_matching_functionals,
    write_csv,
    write_distribution,
    write_json,
    write_jsonl,
)
from ..service.config_parser import load_config, validate_config
from ..service.dan_models import parse_model
from ..service.distribution import ks_distance, ks_noise_floor
from ..service.experiments import (
    ConvergenceOutcome,
    experiment_key,
    run_from_config,
    run_limit_distribution,
    run_student_ratio_check,
)
from ..service.processes import FunctionalSpec, PathSample, evaluate_functional
from ..service.weights import parse_weight
from ..service.wiener import DEFAULT_EPS_FLOOR, DEFAULT_M, DEFAULT_R, WienerGrid
from .common import add_out, add_replicates, add_seed, add_workers, emit, parse_ints, recorded_run

logger = logging.getLogger(__name__)

# Excluded from embedded provenance so reruns with other worker counts or paths stay byte-identical
RUNTIME_ONLY_FIELDS = {"workers", "output_dir"}


def provenance(cfg: ExperimentConfig) -> Dict[str, Any]:
    return cfg.model_dump(mode="json", exclude=RUNTIME_ONLY_FIELDS)


def config_from_args(args: argparse.Namespace, kind: FunctionalKind) -> ExperimentConfig:
    """Config file when given, else flags; command-line overrides always win."""
    data: Dict[str, Any] = load_config(args.config).model_dump(exclude_unset=True) if args.config else {}
    if data.get("kind", kind) != kind:
        raise ConfigValidationError(
            f"Config describes a {FunctionalKind(data['kind']).value} experiment; this command runs {kind.value}",
            [f"kind: expected '{kind.value}'"],
        )
    flags = {
        "model": args.model,
        "weight": args.weight,
        "ns": args.ns,
        "replicates": args.replicates,
        "seed": args.seed,
        "normalization": args.normalization,
        "p": args.p,
        "tau_rule": getattr(args, "tau_rule", None),
        "tau": getattr(args, "tau", None),
        "workers": args.workers,
        "output_dir": str(args.output_dir) if args.output_dir else None,
    }
    data.update({key: value for key, value in flags.items() if value is not None})
    data["kind"] = kind
    return validate_config(data)


def write_outcome(outcome: ConvergenceOutcome, cfg: ExperimentConfig, out_dir: Path) -> None:
    config = provenance(cfg)
    write_distribution(outcome.limit, out_dir / "limit.dist", config)
    for n, dist in outcome.process.items():
        write_distribution(dist, out_dir / f"process_n{n}.dist", config)
    write_csv(outcome.report.rows, out_dir / "summary.csv")
    write_jsonl([row.model_dump(mode="json") for row in outcome.report.rows], out_dir / "rows.jsonl")
    write_json(outcome.report, out_dir / "report.json")


def _run_experiment(args: argparse.Namespace, command: str, kind: FunctionalKind) -> None:
    cfg = config_from_args(args, kind)
    out_dir = Path(cfg.output_dir)
    key = experiment_key(command, cfg.model, cfg.weight, cfg.kind.value, cfg.normalization.value, cfg.p)
    with recorded_run(command, key, provenance(cfg), cfg.seed, str(out_dir)) as recording:
        try:
            outcome = run_from_config(cfg)
        except NumericRefusal as e:
            refused = ConvergenceReport(
                experiment=key,
                model=cfg.model,
                weight=cfg.weight,
                kind=cfg.kind,
                normalization=cfg.normalization,
                p=cfg.p if cfg.kind == FunctionalKind.LP else None,
                refused=True,
                refusal=e.detail,
            )
            write_json(refused, out_dir / "report.json")
            raise
        write_outcome(outcome, cfg, out_dir)
        if recording:
            service, run = recording
            service.add_rows(run, outcome.report.rows, label=cfg.weight)
    emit(outcome.report.model_dump_json(indent=2))


def simulate_process(args: argparse.Namespace) -> None:
    _run_experiment(args, "simulate-process", FunctionalKind.SUP)


def lp_experiment(args: argparse.Namespace) -> None:
    _run_experiment(args, "lp-experiment", FunctionalKind.LP)


def simulate_limit(args: argparse.Namespace) -> None:
    w = parse_weight(args.weight)
    grid = WienerGrid(m=args.m, r=args.r, eps_floor=args.eps_floor)
    kind = FunctionalKind(args.kind)
    dist = run_limit_distribution(w, kind, args.replicates, args.seed, p=args.p, grid=grid, workers=args.workers)
    config = {"weight": w.id, "kind": kind.value, "p": args.p, "replicates": args.replicates, "seed": args.seed}
    write_distribution(dist, args.out, config)
    emit(json.dumps({"out": str(args.out), "count": dist.count, "median": dist.median, **dist.meta}, indent=2))


def compare(args: argparse.Namespace) -> None:
    a, header_a = read_artifact(args.first)
    b, header_b = read_artifact(args.second)
    require_matching_functionals(header_a, header_b)
    emit(json.dumps({
        "ks": ks_distance(a, b),
        "noise_floor": ks_noise_floor(a.count, b.count),
        "counts": [a.count, b.count],
        "functional": [header_a["meta"].get("functional"), header_b["meta"].get("functional")],
    }, indent=2))


def eval_path(args: argparse.Namespace) -> None:
    try:
        df = pd.read_csv(args.increments)
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise ArtifactError(f"Failed to read increments from '{args.increments}': {str(e)}")
    column = "x" if "x" in df.columns else df.columns[0]
    path = PathSample(df[column].to_numpy(dtype=float))
    spec = FunctionalSpec(
        kind=FunctionalKind(args.kind),
        weight=parse_weight(args.weight),
        normalization=Normalization(args.normalization),
        tau=args.tau,
        p=args.p,
        b_n=args.bn,
    )
    emit(repr(evaluate_functional(path, spec)))


def student_ratio(args: argparse.Namespace) -> None:
    model = parse_model(args.model)
    ns = parse_ints(args.ns)
    config = {"model": model.id, "ns": ns, "replicates": args.replicates, "seed": args.seed}
    with recorded_run("student-ratio", f"student-ratio|{model.id}", config, args.seed):
        rows = run_student_ratio_check(model, ns, args.replicates, args.seed, workers=args.workers)
    if args.out:
        write_csv(rows, args.out)
    emit("\n".join(row.model_dump_json() for row in rows))


def _experiment_flags(p: argparse.ArgumentParser, with_tau: bool) -> None:
    p.add_argument("--config", type=Path, default=None, help="TOML document with an [experiment] table")
    p.add_argument("--model", default=None)
    p.add_argument("--weight", default=None)
    p.add_argument("--ns", default=None, help="comma-separated increasing sample sizes")
    p.add_argument("--replicates", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--normalization", choices=[n.value for n in Normalization], default=None)
    p.add_argument("--p", type=float, default=None)
    if with_tau:
        p.add_argument("--tau-rule", choices=[t.value for t in TauRule], default=None)
        p.add_argument("--tau", type=float, default=None)
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--output-dir", type=Path, default=None)


def register(subparsers) -> None:
    p = subparsers.add_parser("simulate-process", help="weighted sup convergence against the Wiener limit")
    _experiment_flags(p, with_tau=True)
    p.set_defaults(handler=simulate_process)

    p = subparsers.add_parser("lp-experiment", help="weighted L_p convergence against the Wiener limit")
    _experiment_flags(p, with_tau=False)
    p.set_defaults(handler=lp_experiment)

    p = subparsers.add_parser("simulate-limit", help="sample a Wiener limit functional into an artifact")
    p.add_argument("--weight", required=True)
    p.add_argument("--kind", choices=[k.value for k in FunctionalKind], default="sup")
    p.add_argument("--p", type=float, default=1.0)
    p.add_argument("--m", type=int, default=DEFAULT_M)
    p.add_argument("--r", type=float, default=DEFAULT_R)
    p.add_argument("--eps-floor", type=float, default=DEFAULT_EPS_FLOOR)
    add_replicates(p)
    add_seed(p)
    add_workers(p)
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(handler=simulate_limit)

    p = subparsers.add_parser("compare", help="two-sample KS between distribution artifacts")
    p.add_argument("first", type=Path)
    p.add_argument("second", type=Path)
    p.set_defaults(handler=compare)

    p = subparsers.add_parser("eval-path", help="evaluate one functional on a CSV of increments")
    p.add_argument("--increments", type=Path, required=True)
    p.add_argument("--weight", default="const:1")
    p.add_argument("--kind", choices=[k.value for k in FunctionalKind], default="sup")
    p.add_argument("--normalization", choices=[n.value for n in Normalization], default="self")
    p.add_argument("--tau", type=float, default=0.0)
    p.add_argument("--p", type=float, default=1.0)
    p.add_argument("--bn", type=float, default=None, help="b_n for --normalization bn")
    p.set_defaults(handler=eval_path)

    p = subparsers.add_parser("student-ratio", help="KS of the Student ratio to N(0,1)")
    p.add_argument("--model", required=True)
    p.add_argument("--ns", required=True)
    add_replicates(p)
    add_seed(p)
    add_workers(p)
    add_out(p, "CSV output")
    p.set_defaults(handler=student_ratio)
