"""Dyadic-block classification of I(q,c) and of the L_p integrability criterion."""
import logging
import math
from functools import lru_cache
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from ..core.errors import DomainError, NumericRefusal
from ..core.schemas import (
    BlockSeries,
    CriterionVerdict,
    LpCriterionReport,
    LpVerdict,
    TailDecision,
    Verdict,
)
from .weights import WeightFunction

logger = logging.getLogger(__name__)

LN2 = math.log(2.0)
DEFAULT_C_GRID: Tuple[float, ...] = tuple(float(c) for c in np.logspace(-2.0, 2.0, 41))
DEFAULT_MAX_DEPTH = 60
DEFAULT_TAIL_TOL = 0.05
TAIL_WINDOW = 5
FLAT_EPS = 1e-9
REFINE_STEPS = 40

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(32)
# Gauss-Legendre on u in [0, 1]
_U_NODES = 0.5 * (_GL_NODES + 1.0)
_U_WEIGHTS = 0.5 * _GL_WEIGHTS


def _block_times(max_depth: int) -> np.ndarray:
    """t = 2^-(k+u) at the quadrature nodes, shape (max_depth + 1, 32)."""
    k = np.arange(max_depth + 1, dtype=float)[:, None]
    return np.exp2(-(k + _U_NODES[None, :]))


def _blocks_from(integrand: Callable[[np.ndarray], np.ndarray], max_depth: int) -> np.ndarray:
    """Block integrals; a block whose integrand leaves the double range is +inf."""
    # dt/t = -ln2 du, so each block is ln2 * integral over u of t * integrand(t)
    t = _block_times(max_depth)
    try:
        with np.errstate(over="ignore", under="ignore", divide="ignore", invalid="ignore"):
            values = t * integrand(t)
    except (DomainError, FloatingPointError) as e:
        raise NumericRefusal(f"weight evaluation failed inside a dyadic block: {str(e)}")
    if np.any(np.isnan(values)) or np.any(values < 0.0):
        raise NumericRefusal("undefined integrand inside a dyadic block")
    return LN2 * (values @ _U_WEIGHTS)


def integral_blocks(w: WeightFunction, c: float, max_depth: int = DEFAULT_MAX_DEPTH) -> np.ndarray:
    """B_k = integral of t^-1 exp(-c q^2(t)/t) over [2^-(k+1), 2^-k], k = 0..max_depth."""
    if not c > 0:
        raise DomainError(f"c must be > 0, got {c}")
    if max_depth < 4:
        raise DomainError(f"max_depth must be >= 4, got {max_depth}")
    return _blocks_from(lambda t: np.exp(-c * w.squared(t) / t) / t, max_depth)


def lp_blocks(w: WeightFunction, p: float, max_depth: int = DEFAULT_MAX_DEPTH) -> np.ndarray:
    """Blocks of the integral of t^(p/2) / q(t)."""
    if not p > 0:
        raise DomainError(f"p must be > 0, got {p}")
    if max_depth < 4:
        raise DomainError(f"max_depth must be >= 4, got {max_depth}")
    return _blocks_from(lambda t: t ** (p / 2.0) / w(t), max_depth)


def _linear_fit(x: np.ndarray, y: np.ndarray) -> Tuple[float, float]:
    slope, intercept = np.polyfit(x, y, 1)
    residual = float(np.sum((y - (slope * x + intercept)) ** 2))
    return float(slope), residual


def tail_decision(blocks: np.ndarray, tail_tol: float, strict: bool = True) -> Tuple[TailDecision, float, float]:
    """Decide summability of the block sequence from its last TAIL_WINDOW entries.

    Two models are fitted to log B_k: geometric (linear in k) and power law
    (linear in log(k + 1/2)). Returns (decision, geometric ratio, power exponent).
    """
    if np.any(np.isinf(blocks)):
        # q underflowed against t^(p/2): the block already exceeds the double range
        return TailDecision.DIVERGENT, math.inf, -math.inf
    ks = np.arange(len(blocks), dtype=float)[-TAIL_WINDOW:]
    tail = np.asarray(blocks[-TAIL_WINDOW:], dtype=float)
    if tail[-1] <= 0.0 or np.any(tail <= 0.0):
        return TailDecision.SUMMABLE, 0.0, math.inf

    log_tail = np.log(tail)
    g_slope, g_res = _linear_fit(ks, log_tail)
    p_slope, p_res = _linear_fit(np.log(ks + 0.5), log_tail)
    ratio = math.exp(g_slope)
    exponent = -p_slope

    if ratio < 1.0 - tail_tol or exponent > 1.0 + tail_tol:
        return TailDecision.SUMMABLE, ratio, exponent
    if g_res <= p_res:
        # geometric tail: any ratio below one sums, flat or growing blocks do not
        decision = TailDecision.SUMMABLE if ratio < 1.0 - FLAT_EPS else TailDecision.DIVERGENT
        return decision, ratio, exponent
    if exponent < 1.0 - tail_tol:
        return TailDecision.DIVERGENT, ratio, exponent
    if not strict:
        decision = TailDecision.SUMMABLE if exponent > 1.0 else TailDecision.DIVERGENT
        return decision, ratio, exponent
    return TailDecision.INCONCLUSIVE, ratio, exponent


def _decide_with_escalation(
    make_blocks: Callable[[int], np.ndarray], max_depth: int, tail_tol: float, c: Optional[float]
) -> BlockSeries:
    blocks = make_blocks(max_depth)
    decision, ratio, exponent = tail_decision(blocks, tail_tol)
    escalated = False
    depth = max_depth
    if decision == TailDecision.INCONCLUSIVE:
        depth = 2 * max_depth
        blocks = make_blocks(depth)
        decision, ratio, exponent = tail_decision(blocks, tail_tol)
        escalated = True
    return BlockSeries(
        c=c,
        depth=depth,
        blocks=[float(b) for b in blocks],
        decision=decision,
        geometric_ratio=ratio,
        power_exponent=exponent,
        escalated=escalated,
    )


def _refine_threshold(w: WeightFunction, lo: float, hi: float, max_depth: int, tail_tol: float) -> float:
    """Bisect c between a divergent lo and a summable hi."""
    for _ in range(REFINE_STEPS):
        if hi - lo <= 1e-4 * hi:
            break
        mid = 0.5 * (lo + hi)
        decision, _, _ = tail_decision(integral_blocks(w, mid, 2 * max_depth), tail_tol, strict=False)
        if decision == TailDecision.SUMMABLE:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def classify_criterion(
    w: WeightFunction,
    c_grid: Sequence[float] = DEFAULT_C_GRID,
    max_depth: int = DEFAULT_MAX_DEPTH,
    tail_tol: float = DEFAULT_TAIL_TOL,
) -> CriterionVerdict:
    """Classify I(q,c) as finite for all tested c, for some c, or for none."""
    cs = [float(c) for c in c_grid]
    if not cs:
        raise DomainError("c_grid must be nonempty")
    if any(c <= 0 for c in cs) or any(b <= a for a, b in zip(cs, cs[1:])):
        raise DomainError("c_grid must be strictly increasing and positive")
    if not tail_tol > 0:
        raise DomainError(f"tail_tol must be > 0, got {tail_tol}")

    series = [
        _decide_with_escalation(lambda depth, c=c: integral_blocks(w, c, depth), max_depth, tail_tol, c)
        for c in cs
    ]
    decisions = [s.decision for s in series]
    inconclusive = [s.c for s in series if s.decision == TailDecision.INCONCLUSIVE]
    diagnostics: List[str] = []
    if inconclusive:
        diagnostics.append(f"tail decay inconclusive at c = {', '.join(f'{c:g}' for c in inconclusive)}")

    summable_cs = [s.c for s in series if s.decision == TailDecision.SUMMABLE]
    divergent_cs = [s.c for s in series if s.decision == TailDecision.DIVERGENT]
    threshold = None

    if all(d == TailDecision.SUMMABLE for d in decisions):
        verdict = Verdict.ALL_C
    elif all(d == TailDecision.DIVERGENT for d in decisions):
        verdict = Verdict.DIVERGENT
    elif (
        decisions[0] == TailDecision.DIVERGENT
        and decisions[-1] == TailDecision.SUMMABLE
        and max(divergent_cs) < min(summable_cs)
    ):
        verdict = Verdict.SOME_C
        threshold = _refine_threshold(w, max(divergent_cs), min(summable_cs), max_depth, tail_tol)
    else:
        verdict = Verdict.INCONCLUSIVE
        diagnostics.append("decay pattern across c is mixed; no verdict assigned")

    if verdict == Verdict.INCONCLUSIVE or inconclusive:
        logger.warning(f"Criterion for '{w.id}': {'; '.join(diagnostics)}")

    return CriterionVerdict(
        weight=w.id,
        verdict=verdict,
        c_threshold_estimate=threshold,
        tested_c=cs,
        max_depth=max_depth,
        series=series,
        inconclusive_c=inconclusive,
        diagnostics=diagnostics,
    )


def lp_criterion(
    w: WeightFunction,
    p: float,
    max_depth: int = DEFAULT_MAX_DEPTH,
    tail_tol: float = DEFAULT_TAIL_TOL,
) -> LpCriterionReport:
    """Finiteness of the integral of t^(p/2)/q(t) near zero."""
    if not tail_tol > 0:
        raise DomainError(f"tail_tol must be > 0, got {tail_tol}")
    block_series = _decide_with_escalation(lambda depth: lp_blocks(w, p, depth), max_depth, tail_tol, None)
    verdict = {
        TailDecision.SUMMABLE: LpVerdict.FINITE,
        TailDecision.DIVERGENT: LpVerdict.INFINITE,
        TailDecision.INCONCLUSIVE: LpVerdict.INCONCLUSIVE,
    }[block_series.decision]
    return LpCriterionReport(weight=w.id, p=p, verdict=verdict, series=block_series)


@lru_cache(maxsize=128)
def cached_verdict(w: WeightFunction) -> Verdict:
    return classify_criterion(w).verdict


@lru_cache(maxsize=128)
def cached_lp_verdict(w: WeightFunction, p: float) -> LpVerdict:
    return lp_criterion(w, p).verdict


def require_finite_criterion(w: WeightFunction) -> Verdict:
    """Gate for sup-functional limits: refuse weights whose I(q,c) diverges for every c."""
    verdict = cached_verdict(w)
    if verdict == Verdict.DIVERGENT:
        raise NumericRefusal(f"I(q,c) diverges for every tested c with q = {w.id}; the weighted sup limit is a.s. infinite")
    return verdict


def require_finite_lp(w: WeightFunction, p: float) -> None:
    verdict = cached_lp_verdict(w, p)
    if verdict != LpVerdict.FINITE:
        raise NumericRefusal(f"integral of t^(p/2)/q(t) is {verdict.value} for q = {w.id}, p = {p:g}")
