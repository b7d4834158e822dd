"""Partial-sum paths and their normalized weighted functionals."""
import logging
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional, Tuple

import numpy as np

from ..core.errors import DegeneratePathError, DomainError
from ..core.schemas import FunctionalKind, LpVerdict, Normalization
from .criterion import cached_lp_verdict
from .weights import WeightFunction

logger = logging.getLogger(__name__)

# n - (S_n/V_n)^2 below this fraction of n is treated as singular
STUDENT_SINGULAR_TOL = 1e-12
SUP_BATCH_BUDGET = 4_000_000


@dataclass(frozen=True, eq=False)
class PathSample:
    increments: np.ndarray
    partial_sums: np.ndarray = field(init=False)
    v_squared: float = field(init=False)

    def __post_init__(self):
        x = np.asarray(self.increments, dtype=float)
        if x.ndim != 1 or x.size == 0:
            raise DomainError("a path needs a nonempty 1-d array of increments")
        object.__setattr__(self, "increments", x)
        object.__setattr__(self, "partial_sums", np.concatenate([[0.0], np.cumsum(x)]))
        object.__setattr__(self, "v_squared", float(np.dot(x, x)))

    @property
    def n(self) -> int:
        return int(self.increments.size)

    def scaled(self, lam: float) -> "PathSample":
        return PathSample(lam * self.increments)


@dataclass(frozen=True)
class FunctionalSpec:
    kind: FunctionalKind
    weight: WeightFunction
    normalization: Normalization = Normalization.BY_SELF
    tau: float = 0.0
    p: float = 1.0
    b_n: Optional[float] = None

    def __post_init__(self):
        if not 0.0 <= self.tau < 1.0:
            raise DomainError(f"tau must lie in [0, 1), got {self.tau}")
        if not self.p > 0:
            raise DomainError(f"p must be > 0, got {self.p}")
        if self.normalization == Normalization.BY_BN and not (self.b_n and self.b_n > 0):
            raise DomainError("normalization 'bn' needs a positive b_n")

    @property
    def label(self) -> str:
        body = f"sup:tau={self.tau:g}" if self.kind == FunctionalKind.SUP else f"lp:p={self.p:g}"
        return f"{body}|{self.weight.id}|{self.normalization.value}"


def _level_index(n: int, t: float) -> int:
    if not 0.0 <= t <= 1.0:
        raise DomainError(f"t must lie in [0, 1], got {t}")
    return n if t >= 1.0 else min(int(math.floor(n * t)), n)


def _self_norm(path: PathSample) -> float:
    if path.v_squared <= 0.0:
        raise DegeneratePathError("V_n = 0: all increments vanish", DegeneratePathError.ZERO_VARIANCE)
    return math.sqrt(path.v_squared)


def student_factor(path: PathSample) -> float:
    """sqrt((n-1) / (n - (S_n/V_n)^2)), constant in t."""
    n = path.n
    ratio = path.partial_sums[-1] / _self_norm(path)
    gap = n - ratio * ratio
    if n < 2 or gap <= STUDENT_SINGULAR_TOL * n:
        raise DegeneratePathError(
            f"Student denominator vanishes: n - (S_n/V_n)^2 = {gap:.3g}", DegeneratePathError.STUDENT_SINGULAR
        )
    return math.sqrt((n - 1) / gap)


def self_normalized_path(path: PathSample, t: float) -> float:
    """S_[nt] / V_n."""
    return float(path.partial_sums[_level_index(path.n, t)] / _self_norm(path))


def student_path(path: PathSample, t: float) -> float:
    return self_normalized_path(path, t) * student_factor(path)


def student_ratio(path: PathSample) -> float:
    """The classical Student ratio T_{n,1}."""
    return student_path(path, 1.0)


def normalized_levels(path: PathSample, spec: FunctionalSpec) -> np.ndarray:
    """Path values on [k/n, (k+1)/n), k = 0..n, under the spec's normalization."""
    if spec.normalization == Normalization.BY_BN:
        return path.partial_sums / spec.b_n
    levels = path.partial_sums / _self_norm(path)
    if spec.normalization == Normalization.BY_STUDENT:
        levels = levels * student_factor(path)
    return levels


@lru_cache(maxsize=64)
def sup_evaluation_set(n: int, tau: float, weight: WeightFunction) -> Tuple[np.ndarray, np.ndarray]:
    """Level indices and 1/q(t) over the points where a step path's weighted sup can be attained.

    Points: max(tau, 1/n), every jump k/n above it, and each interval's right end minus one ulp.
    """
    start = max(tau, 1.0 / n)
    k0 = int(math.floor(n * start))
    if (k0 + 1) / n <= start:
        k0 += 1
    k0 = min(k0, n)
    jumps = np.arange(k0 + 1, n + 1)
    left_index = np.arange(k0, n)
    left_times = np.nextafter(jumps.astype(float) / n, 0.0)
    keep = left_times >= start
    times = np.concatenate([[start], jumps / n, left_times[keep]])
    index = np.concatenate([[k0], jumps, left_index[keep]])
    times[times > 1.0] = 1.0
    return index, 1.0 / np.asarray(weight(times))


@lru_cache(maxsize=64)
def lp_interval_weights(n: int, weight: WeightFunction) -> np.ndarray:
    """Integral of 1/q over [k/n, (k+1)/n] for k = 1..n-1."""
    if n < 2:
        return np.empty(0)
    k = np.arange(1, n, dtype=float)
    return np.asarray(weight.reciprocal_integral(k / n, (k + 1) / n), dtype=float)


def _check_lp_weight(weight: WeightFunction, p: float) -> None:
    verdict = cached_lp_verdict(weight, p)
    if verdict != LpVerdict.FINITE:
        logger.warning(f"L_p functional with q = {weight.id}, p = {p:g} evaluated although the integral criterion is {verdict.value}")


def weighted_sup(levels: np.ndarray, spec: FunctionalSpec, n: int) -> float:
    """Exact sup of |value(t)|/q(t) over the step path's evaluation set."""
    if spec.kind != FunctionalKind.SUP:
        raise DomainError("weighted_sup needs a sup functional spec")
    index, recip = sup_evaluation_set(n, spec.tau, spec.weight)
    return float(np.max(np.abs(levels[index]) * recip))


def weighted_lp(levels: np.ndarray, spec: FunctionalSpec, n: int) -> float:
    """Integral over (0,1] of |value(t)|^p / q(t); the path is zero on [0, 1/n)."""
    if spec.kind != FunctionalKind.LP:
        raise DomainError("weighted_lp needs an L_p functional spec")
    _check_lp_weight(spec.weight, spec.p)
    return float(np.abs(levels[1:n]) ** spec.p @ lp_interval_weights(n, spec.weight))


def evaluate_functional(path: PathSample, spec: FunctionalSpec) -> float:
    levels = normalized_levels(path, spec)
    if spec.kind == FunctionalKind.SUP:
        return weighted_sup(levels, spec, path.n)
    return weighted_lp(levels, spec, path.n)


def evaluate_batch(increments: np.ndarray, spec: FunctionalSpec) -> Tuple[np.ndarray, int]:
    """Functional values for each row of an (r, n) increment matrix.

    Degenerate rows come back as NaN and are counted, never raised; callers log the count.
    """
    x = np.atleast_2d(np.asarray(increments, dtype=float))
    rows, n = x.shape
    sums = np.concatenate([np.zeros((rows, 1)), np.cumsum(x, axis=1)], axis=1)

    with np.errstate(divide="ignore", invalid="ignore"):
        if spec.normalization == Normalization.BY_BN:
            norm = np.full(rows, spec.b_n)
            bad = np.zeros(rows, dtype=bool)
        else:
            v2 = np.einsum("ij,ij->i", x, x)
            bad = v2 <= 0.0
            norm = np.sqrt(np.where(bad, 1.0, v2))
        levels = sums / norm[:, None]
        if spec.normalization == Normalization.BY_STUDENT:
            gap = n - levels[:, -1] ** 2
            singular = (gap <= STUDENT_SINGULAR_TOL * n) | (n < 2)
            factor = np.sqrt((n - 1) / np.where(singular, 1.0, gap))
            levels = levels * factor[:, None]
            bad |= singular

    if spec.kind == FunctionalKind.SUP:
        index, recip = sup_evaluation_set(n, spec.tau, spec.weight)
        values = np.empty(rows)
        step = max(1, SUP_BATCH_BUDGET // max(1, index.size))
        for lo in range(0, rows, step):
            values[lo : lo + step] = np.max(np.abs(levels[lo : lo + step, index]) * recip, axis=1)
    else:
        _check_lp_weight(spec.weight, spec.p)
        values = np.abs(levels[:, 1:n]) ** spec.p @ lp_interval_weights(n, spec.weight)

    values[bad] = np.nan
    return values, int(np.count_nonzero(bad))

