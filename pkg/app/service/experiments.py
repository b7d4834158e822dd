"""Seeded Monte Carlo experiments for the weighted self-normalized limit statements."""
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.stats import norm

from ..core.errors import DegeneratePathError, DomainError
from ..core.schemas import (
    Ad188Row,
    AgreementReport,
    ConcentrationRow,
    ConvergenceReport,
    ConvergenceRow,
    CounterexampleReport,
    ExperimentConfig,
    FunctionalKind,
    NearOriginRow,
    NormingDecayRow,
    Normalization,
    StudentRatioRow,
    TauRule,
    VarianceRatioRow,
    WindowSupRow,
    tau_for_rule,
)
from .criterion import require_finite_criterion
from .dan_models import (
    DistributionModel,
    ad188_value,
    bn,
    build_slow_vary_tail,
    early_norming_ratio,
    norming_arrays,
    parse_model,
)
from .distribution import EmpiricalDistribution, ks_distance, ks_noise_floor, ks_to_cdf
from .processes import FunctionalSpec, PathSample, evaluate_batch, student_ratio
from .seeding import ReplicateSeeder, run_replicates
from .weights import WeightFunction, parse_weight
from .wiener import (
    LimitSupTask,
    WienerGrid,
    limit_lp_functional,
    limit_sup_functional,
    near_origin_sups,
    sample_wiener_path,
    sup_limit_distribution,
    surrogate_crossing_n,
    window_lower_bound,
    window_lower_bound_closed_form,
    window_sup_samples,
)

logger = logging.getLogger(__name__)

KS_TREND_SLACK = 0.01
COUNTEREXAMPLE_THRESHOLD = 0.25
COUNTEREXAMPLE_GRID_RATIO = 1.05
COUNTEREXAMPLE_N_RANGE = (1e3, 1e8)


# ===== REPLICATE TASKS =====
# Top-level so they pickle into spawned workers; each maps one generator to one result row.


@dataclass(frozen=True, eq=False)
class ProcessFunctionalTask:
    model: DistributionModel
    specs: Tuple[FunctionalSpec, ...]
    n: int

    def __call__(self, rng: np.random.Generator) -> np.ndarray:
        # NaN marks a degenerate path under that normalization
        x = self.model.sample(rng, self.n)[None, :]
        return np.array([evaluate_batch(x, spec)[0][0] for spec in self.specs])


@dataclass(frozen=True, eq=False)
class ConcentrationTask:
    model: DistributionModel
    n: int
    b2: float

    def __call__(self, rng: np.random.Generator) -> np.ndarray:
        x = self.model.sample(rng, self.n)
        return np.array([np.dot(x, x) / self.b2])


@dataclass(frozen=True, eq=False)
class StudentRatioTask:
    model: DistributionModel
    n: int

    def __call__(self, rng: np.random.Generator) -> np.ndarray:
        try:
            return np.array([student_ratio(PathSample(self.model.sample(rng, self.n)))])
        except DegeneratePathError:
            return np.array([np.nan])


@dataclass(frozen=True, eq=False)
class WindowSupTask:
    weight: WeightFunction
    n: int

    def __call__(self, rng: np.random.Generator) -> np.ndarray:
        return window_sup_samples(self.weight, self.n, rng, 1)


@dataclass(frozen=True, eq=False)
class NearOriginTask:
    weights: Tuple[WeightFunction, ...]
    deltas: Tuple[float, ...]
    grid: WienerGrid

    def __call__(self, rng: np.random.Generator) -> np.ndarray:
        path = sample_wiener_path(self.grid, rng)
        return np.concatenate([near_origin_sups(self.grid.times, path, w, self.deltas)[0] for w in self.weights])


# ===== HELPERS =====
def experiment_key(*parts) -> str:
    """Stable id for seeding; never includes worker count or output paths."""
    return "|".join(str(p) for p in parts)


def _check_ns(ns: Sequence[int]) -> List[int]:
    ns = [int(n) for n in ns]
    if not ns:
        raise DomainError("ns must be nonempty")
    if any(n < 1 for n in ns) or any(b <= a for a, b in zip(ns, ns[1:])):
        raise DomainError("ns must be positive and strictly increasing")
    return ns


def _trend_hint(ks: List[float], floor: float) -> str:
    monotone = all(b <= a + KS_TREND_SLACK for a, b in zip(ks, ks[1:]))
    parts = ["ks nonincreasing" if monotone else "ks not monotone"]
    parts.append(f"final ks {ks[-1]:.4f} {'within' if ks[-1] < floor else 'above'} noise floor {floor:.4f}")
    return "; ".join(parts)


def _process_spec(
    model: DistributionModel,
    kind: FunctionalKind,
    weight: WeightFunction,
    normalization: Normalization,
    n: int,
    tau: float = 0.0,
    p: float = 1.0,
) -> FunctionalSpec:
    b_n = bn(model, n) if normalization == Normalization.BY_BN else None
    return FunctionalSpec(kind, weight, normalization, tau=tau, p=p, b_n=b_n)


@dataclass
class ConvergenceOutcome:
    report: ConvergenceReport
    limit: EmpiricalDistribution
    process: Dict[int, EmpiricalDistribution] = field(default_factory=dict)


# ===== EXPERIMENTS =====
def run_functional_convergence(
    model: DistributionModel,
    weight: WeightFunction,
    functional_kind: FunctionalKind,
    ns: Sequence[int],
    replicates: int,
    seed: int,
    normalization: Normalization = Normalization.BY_SELF,
    p: float = 1.0,
    tau_rule: TauRule = TauRule.ONE_OVER_N,
    tau: Optional[float] = None,
    workers: int = 1,
    grid: Optional[WienerGrid] = None,
) -> ConvergenceOutcome:
    """KS distance of the process functional to its simulated Wiener limit, per n."""
    if functional_kind == FunctionalKind.LP:
        return run_lp_convergence(model, weight, p, ns, replicates, seed, normalization, workers, grid)
    ns = _check_ns(ns)
    verdict = require_finite_criterion(weight)
    grid = grid or WienerGrid()
    taus = [tau_for_rule(tau_rule, n, tau) for n in ns]
    key = experiment_key("convergence", model.id, weight.id, "sup", normalization.value, tau_rule.value, tau)
    seeder = ReplicateSeeder(seed, key)

    limit_rows = run_replicates(LimitSupTask(weight, grid, tuple(taus)), seeder.child("limit"), replicates, workers)
    limit = sup_limit_distribution(weight, verdict, grid, limit_rows)
    limit.meta["seed"] = seed

    outcome = ConvergenceOutcome(
        report=ConvergenceReport(
            experiment=key, model=model.id, weight=weight.id, kind=FunctionalKind.SUP, normalization=normalization
        ),
        limit=limit,
    )
    for i, n in enumerate(ns):
        spec_tau = 0.0 if tau_rule == TauRule.ONE_OVER_N else taus[i]
        spec = _process_spec(model, FunctionalKind.SUP, weight, normalization, n, tau=spec_tau)
        values = run_replicates(ProcessFunctionalTask(model, (spec,), n), seeder.child(f"n={n}"), replicates, workers)[:, 0]
        degenerate = int(np.count_nonzero(np.isnan(values)))
        if degenerate:
            logger.warning(f"{degenerate} degenerate paths at n={n} for {spec.label}")
        dist = EmpiricalDistribution.from_samples(
            values, {"functional": spec.label, "model": model.id, "n": n, "seed": seed}
        )
        windowed = EmpiricalDistribution(limit_rows[:, 2 + i])
        outcome.process[n] = dist
        outcome.report.rows.append(
            ConvergenceRow(
                n=n,
                replicates=replicates,
                tau=taus[i],
                ks_to_limit=ks_distance(dist, limit),
                ks_windowed=ks_distance(dist, windowed),
                median=dist.median,
                iqr=dist.iqr,
                degenerate=degenerate,
            )
        )
        logger.info(f"n={n}: ks={outcome.report.rows[-1].ks_to_limit:.4f} windowed={outcome.report.rows[-1].ks_windowed:.4f}")

    ks = [row.ks_to_limit for row in outcome.report.rows]
    outcome.report.verdict_hint = _trend_hint(ks, ks_noise_floor(replicates, replicates))
    outcome.report.limit_converged = limit.meta["converged"]
    return outcome


def run_lp_convergence(
    model: DistributionModel,
    weight: WeightFunction,
    p: float,
    ns: Sequence[int],
    replicates: int,
    seed: int,
    normalization: Normalization = Normalization.BY_SELF,
    workers: int = 1,
    grid: Optional[WienerGrid] = None,
) -> ConvergenceOutcome:
    """L_p analogue of run_functional_convergence; refuses when the integral criterion is not finite."""
    ns = _check_ns(ns)
    grid = grid or WienerGrid()
    key = experiment_key("lp", model.id, weight.id, p, normalization.value)
    seeder = ReplicateSeeder(seed, key)

    limit = limit_lp_functional(weight, p, grid, seeder.child("limit"), replicates, workers)
    limit.meta["seed"] = seed
    outcome = ConvergenceOutcome(
        report=ConvergenceReport(
            experiment=key, model=model.id, weight=weight.id, kind=FunctionalKind.LP, normalization=normalization, p=p
        ),
        limit=limit,
    )
    for n in ns:
        spec = _process_spec(model, FunctionalKind.LP, weight, normalization, n, p=p)
        values = run_replicates(ProcessFunctionalTask(model, (spec,), n), seeder.child(f"n={n}"), replicates, workers)[:, 0]
        degenerate = int(np.count_nonzero(np.isnan(values)))
        dist = EmpiricalDistribution.from_samples(values, {"functional": spec.label, "model": model.id, "n": n, "seed": seed})
        outcome.process[n] = dist
        ks = ks_distance(dist, limit)
        outcome.report.rows.append(
            ConvergenceRow(
                n=n, replicates=replicates, tau=0.0, ks_to_limit=ks, ks_windowed=ks,
                median=dist.median, iqr=dist.iqr, degenerate=degenerate,
            )
        )
    outcome.report.verdict_hint = _trend_hint([r.ks_to_limit for r in outcome.report.rows], ks_noise_floor(replicates, replicates))
    return outcome


def run_limit_distribution(
    weight: WeightFunction,
    kind: FunctionalKind,
    replicates: int,
    seed: int,
    p: float = 1.0,
    grid: Optional[WienerGrid] = None,
    workers: int = 1,
) -> EmpiricalDistribution:
    """Wiener limit functional alone, one keyed stream per replicate."""
    grid = grid or WienerGrid()
    key = experiment_key("limit", weight.id, kind.value, p, grid.m, grid.r, grid.eps_floor)
    seeder = ReplicateSeeder(seed, key)
    if kind == FunctionalKind.LP:
        dist = limit_lp_functional(weight, p, grid, seeder, replicates, workers)
    else:
        dist = limit_sup_functional(weight, grid, seeder, replicates, workers)
    dist.meta["seed"] = seed
    return dist


def run_normalization_agreement(
    model: DistributionModel,
    weight: WeightFunction,
    n: int,
    replicates: int,
    seed: int,
    first: Normalization = Normalization.BY_SELF,
    second: Normalization = Normalization.BY_STUDENT,
    kind: FunctionalKind = FunctionalKind.SUP,
    p: float = 1.0,
    workers: int = 1,
) -> AgreementReport:
    """Evaluate two normalizations on the same paths; KS between them and the largest pathwise gap."""
    specs = tuple(_process_spec(model, kind, weight, norm_, n, p=p) for norm_ in (first, second))
    key = experiment_key("agreement", model.id, weight.id, kind.value, p, n)
    rows = run_replicates(ProcessFunctionalTask(model, specs, n), ReplicateSeeder(seed, key), replicates, workers)
    ok = ~np.isnan(rows).any(axis=1)
    a = EmpiricalDistribution(rows[ok, 0])
    b = EmpiricalDistribution(rows[ok, 1])
    return AgreementReport(
        model=model.id,
        weight=weight.id,
        n=n,
        replicates=replicates,
        first=first,
        second=second,
        ks=ks_distance(a, b),
        max_abs_difference=float(np.max(np.abs(rows[ok, 0] - rows[ok, 1]))),
        degenerate=int(np.count_nonzero(~ok)),
    )


def run_vn_bn_concentration(
    model: DistributionModel, ns: Sequence[int], replicates: int, seed: int, eps: float, workers: int = 1
) -> List[ConcentrationRow]:
    """Fraction of replicates with |V_n^2/b_n^2 - 1| <= eps, per n."""
    if not eps > 0:
        raise DomainError(f"eps must be > 0, got {eps}")
    ns = _check_ns(ns)
    seeder = ReplicateSeeder(seed, experiment_key("vn-bn", model.id))
    rows = []
    for n in ns:
        _, _, b2, _ = norming_arrays(model, [n])
        ratios = run_replicates(ConcentrationTask(model, n, float(b2[0])), seeder.child(f"n={n}"), replicates, workers)[:, 0]
        rows.append(ConcentrationRow(n=n, replicates=replicates, eps=eps, fraction=float(np.mean(np.abs(ratios - 1.0) <= eps))))
    return rows


def run_ad188_check(model: DistributionModel, ns: Sequence[int]) -> List[Ad188Row]:
    """Deterministic (1/n) sum_j (sigma*_j / sqrt(l(eta_n)) - 1)^2; no simulation."""
    return [Ad188Row(n=n, value=ad188_value(model, n)) for n in _check_ns(ns)]


def run_variance_ratio(model: DistributionModel, ns: Sequence[int]) -> List[VarianceRatioRow]:
    return [VarianceRatioRow(n=n, ratio=model.variance_ratio(n)) for n in _check_ns(ns)]


def run_student_ratio_check(
    model: DistributionModel, ns: Sequence[int], replicates: int, seed: int, workers: int = 1
) -> List[StudentRatioRow]:
    """One-sample KS of the Student ratio T_{n,1} to N(0,1), per n."""
    ns = _check_ns(ns)
    seeder = ReplicateSeeder(seed, experiment_key("student-ratio", model.id))
    rows = []
    for n in ns:
        values = run_replicates(StudentRatioTask(model, n), seeder.child(f"n={n}"), replicates, workers)[:, 0]
        dist = EmpiricalDistribution.from_samples(values)
        rows.append(
            StudentRatioRow(
                n=n,
                replicates=replicates,
                ks_to_normal=ks_to_cdf(dist, norm.cdf),
                degenerate=replicates - dist.count,
            )
        )
    return rows


def counterexample_bound(n: float, alpha: float) -> float:
    """2 exp[(0.3^alpha - 0.5^alpha)(log n)^alpha]."""
    return 2.0 * math.exp((0.3 ** alpha - 0.5 ** alpha) * math.log(n) ** alpha)


def run_counterexample(
    ns: Sequence[int],
    replicates: int,
    seed: int,
    threshold: float = COUNTEREXAMPLE_THRESHOLD,
    alpha: float = 0.5,
    grid_ratio: float = COUNTEREXAMPLE_GRID_RATIO,
    workers: int = 1,
) -> CounterexampleReport:
    """Window sups over [1/n, 1/sqrt(n)] for q^2 = t loglog(1/t) and sqrtlog, plus the norming-decay side."""
    ns = _check_ns(ns)
    lo, hi = COUNTEREXAMPLE_N_RANGE
    if any(not lo <= n <= hi for n in ns):
        raise DomainError(f"counterexample ns must lie in [{lo:g}, {hi:g}]")
    critical = parse_weight("sqrtloglog:1")
    contrast = parse_weight("sqrtlog:1")
    seeder = ReplicateSeeder(seed, experiment_key("counterexample", threshold))

    window_rows = []
    for w in (critical, contrast):
        for n in ns:
            values = run_replicates(WindowSupTask(w, n), seeder.child(f"{w.id}/n={n}"), replicates, workers)[:, 0]
            dist = EmpiricalDistribution(values)
            window_rows.append(
                WindowSupRow(
                    n=n,
                    weight=w.id,
                    exceed_probability=float(np.mean(values > threshold)),
                    median=dist.median,
                    lower_bound_integral=window_lower_bound(w, n),
                    lower_bound_closed_form=window_lower_bound_closed_form(n) if w is critical else None,
                )
            )

    model = build_slow_vary_tail(alpha, grid_ratio)
    norming_rows = [
        NormingDecayRow(n=n, max_ratio=early_norming_ratio(model, n), bound=counterexample_bound(n, alpha)) for n in ns
    ]
    return CounterexampleReport(
        threshold=threshold,
        replicates=replicates,
        window_rows=window_rows,
        norming_rows=norming_rows,
        surrogate_crossing_n=surrogate_crossing_n(),
    )


def run_near_origin_check(
    weights: Sequence[WeightFunction],
    deltas: Sequence[float],
    replicates: int,
    seed: int,
    grid: Optional[WienerGrid] = None,
    workers: int = 1,
) -> List[NearOriginRow]:
    """Median and upper decile of sup over (0, delta] of |W|/q for each weight and delta."""
    if not weights or not deltas:
        raise DomainError("weights and deltas must be nonempty")
    if any(not 0.0 < d <= 1.0 for d in deltas):
        raise DomainError("deltas must lie in (0, 1]")
    grid = grid or WienerGrid()
    key = experiment_key("near-origin", *(w.id for w in weights), *deltas)
    rows = run_replicates(NearOriginTask(tuple(weights), tuple(deltas), grid), ReplicateSeeder(seed, key), replicates, workers)
    out = []
    for i, w in enumerate(weights):
        for j, d in enumerate(deltas):
            dist = EmpiricalDistribution(rows[:, i * len(deltas) + j])
            out.append(NearOriginRow(weight=w.id, delta=d, median=dist.median, upper_decile=dist.quantile(0.9)))
    return out


def run_from_config(cfg: ExperimentConfig) -> ConvergenceOutcome:
    """Run the convergence experiment a validated config document describes."""
    model = parse_model(cfg.model)
    weight = parse_weight(cfg.weight)
    if cfg.kind == FunctionalKind.LP:
        return run_lp_convergence(model, weight, cfg.p, cfg.ns, cfg.replicates, cfg.seed, cfg.normalization, cfg.workers)
    return run_functional_convergence(
        model, weight, cfg.kind, cfg.ns, cfg.replicates, cfg.seed,
        normalization=cfg.normalization, tau_rule=cfg.tau_rule, tau=cfg.tau, workers=cfg.workers,
    )
