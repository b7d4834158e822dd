"""Zero-mean laws in the domain of attraction of the normal law and their norming sequences."""
import logging
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Optional, Tuple, Union

import numpy as np
from scipy.stats import norm

from ..core.errors import DomainError, NumericRefusal
from ..core.schemas import NormingRow, NormingTable

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]

ETA_REL_TOL = 1e-12
ETA_S_MAX = 1e30
SLOW_VARY_X_CAP = 1e100
DEFAULT_GRID_RATIO = 2.0


class ModelFamily(str, Enum):
    RADEMACHER = "rademacher"
    NORMAL = "normal"
    UNIFORM = "uniform"
    SLOW_VARY = "slowvary"


def _nonnegative(x: ArrayLike) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if np.any(arr < 0) or np.any(np.isnan(arr)):
        raise DomainError("truncation level x must be >= 0")
    return arr


def _scalar_or_array(out: np.ndarray) -> ArrayLike:
    return float(out) if np.ndim(out) == 0 else out


class DistributionModel(ABC):
    family: ModelFamily
    symmetric: bool = True
    analytic_l: bool = True

    @property
    @abstractmethod
    def id(self) -> str:
        ...

    @abstractmethod
    def sample(self, rng: np.random.Generator, m: int) -> np.ndarray:
        ...

    @abstractmethod
    def _l(self, x: np.ndarray) -> np.ndarray:
        ...

    @property
    def second_moment(self) -> float:
        """E X^2, infinite for laws outside L^2."""
        return math.inf

    @property
    def b(self) -> float:
        """inf{x >= 1 : l(x) > 0}."""
        return 1.0

    def truncated_second_moment(self, x: ArrayLike) -> ArrayLike:
        """l(x) = E X^2 1{|X| <= x}."""
        return _scalar_or_array(self._l(_nonnegative(x)))

    def truncated_mean(self, x: ArrayLike) -> ArrayLike:
        """E X 1{|X| <= x}; zero for the symmetric laws built here."""
        return _scalar_or_array(np.zeros_like(_nonnegative(x)))

    def eta_many(self, js: Iterable[int]) -> np.ndarray:
        """eta_j = inf{s >= b+1 : l(s)/s^2 <= 1/j}, by doubling then bisection."""
        j = _checked_indices(js)
        floor = self.b + 1.0
        limit = 1.0 / j

        def holds(s: np.ndarray) -> np.ndarray:
            return self._l(s) / (s * s) <= limit

        hi = np.full_like(j, floor)
        lo = np.full_like(j, floor)
        at_floor = holds(hi)
        pending = ~at_floor
        while pending.any():
            lo = np.where(pending, hi, lo)
            hi = np.where(pending, 2.0 * hi, hi)
            if np.any(hi[pending] > ETA_S_MAX):
                raise NumericRefusal(f"no eta bracket below s_max={ETA_S_MAX:g} for model '{self.id}'")
            pending &= ~holds(hi)

        active = ~at_floor
        while True:
            active &= (hi - lo) > ETA_REL_TOL * hi
            if not active.any():
                break
            mid = 0.5 * (lo + hi)
            ok = holds(mid)
            hi = np.where(active & ok, mid, hi)
            lo = np.where(active & ~ok, mid, lo)
        return hi

    def eta(self, j: int) -> float:
        return float(self.eta_many([j])[0])

    def variance_ratio(self, n: int) -> float:
        """n E X^2 / b_n^2, which tends to one for finite-variance laws."""
        if not math.isfinite(self.second_moment):
            raise DomainError(f"model '{self.id}' has infinite variance")
        eta, l_eta, b2, _ = norming_arrays(self, [n])
        return float(n * self.second_moment / b2[0])


def _checked_indices(js: Iterable[int]) -> np.ndarray:
    j = np.asarray(list(js) if not isinstance(js, np.ndarray) else js, dtype=float)
    if j.size == 0 or np.any(j < 1):
        raise DomainError("norming indices j must be >= 1")
    return j


class LatticeModel(DistributionModel):
    """Symmetric law on {0} and +-atoms; l is a step function known exactly."""

    atoms: np.ndarray
    masses: np.ndarray
    moment_increments: np.ndarray

    analytic_l = True

    def _cumulative(self) -> np.ndarray:
        return np.concatenate([[0.0], np.cumsum(self.moment_increments)])

    def _l(self, x: np.ndarray) -> np.ndarray:
        return self._cumulative()[np.searchsorted(self.atoms, x, side="right")]

    @property
    def b(self) -> float:
        return max(1.0, float(self.atoms[np.argmax(self.moment_increments > 0)]))

    @property
    def second_moment(self) -> float:
        return float(np.sum(self.moment_increments))

    def eta_many(self, js: Iterable[int]) -> np.ndarray:
        """Exact infimum: on each constancy interval of l the ratio l/s^2 is decreasing."""
        j = _checked_indices(js)
        floor = self.b + 1.0
        starts = np.concatenate([[floor], self.atoms[self.atoms > floor]])
        ends = np.concatenate([starts[1:], [math.inf]])
        levels = self._l(starts)
        with np.errstate(divide="ignore"):
            reach = np.where(levels > 0, ends * ends / np.where(levels > 0, levels, 1.0), math.inf)
        reach_max = np.maximum.accumulate(reach)
        k = np.searchsorted(reach_max, j, side="right")
        return np.maximum(starts[k], np.sqrt(j * levels[k]))

    def sample(self, rng: np.random.Generator, m: int) -> np.ndarray:
        if m < 1:
            raise DomainError(f"sample size must be >= 1, got {m}")
        support = np.concatenate([[0.0], self.atoms])
        cdf = np.cumsum(np.concatenate([[1.0 - float(np.sum(self.masses))], self.masses]))
        idx = np.minimum(np.searchsorted(cdf, rng.random(m), side="right"), len(support) - 1)
        signs = rng.integers(0, 2, size=m) * 2.0 - 1.0
        return signs * support[idx]


@dataclass(frozen=True, eq=False)
class Rademacher(LatticeModel):
    family = ModelFamily.RADEMACHER
    atoms: np.ndarray = field(default_factory=lambda: np.array([1.0]))
    masses: np.ndarray = field(default_factory=lambda: np.array([1.0]))
    moment_increments: np.ndarray = field(default_factory=lambda: np.array([1.0]))

    @property
    def id(self) -> str:
        return "rademacher"

    def sample(self, rng: np.random.Generator, m: int) -> np.ndarray:
        if m < 1:
            raise DomainError(f"sample size must be >= 1, got {m}")
        return rng.integers(0, 2, size=m) * 2.0 - 1.0


@dataclass(frozen=True, eq=False)
class SlowVaryTail(LatticeModel):
    """Symmetric atoms at +-grid_ratio^k with l(x_k) = L(x_k) - 1, L(x) = exp((log x)^alpha)."""

    family = ModelFamily.SLOW_VARY
    alpha: float = 0.5
    grid_ratio: float = DEFAULT_GRID_RATIO
    k_max: int = 0
    atoms: np.ndarray = field(default_factory=lambda: np.empty(0))
    masses: np.ndarray = field(default_factory=lambda: np.empty(0))
    moment_increments: np.ndarray = field(default_factory=lambda: np.empty(0))

    @property
    def id(self) -> str:
        return f"slowvary:{self.alpha:g}:{self.grid_ratio:g}"

    @property
    def second_moment(self) -> float:
        # stands in for an infinite-variance law; the atom table is cut only at x = 1e100
        return math.inf

    @property
    def mass_at_zero(self) -> float:
        return 1.0 - float(np.sum(self.masses))

    def target(self, x: ArrayLike) -> ArrayLike:
        return np.exp(np.log(x) ** self.alpha)


@dataclass(frozen=True, eq=False)
class StandardNormal(DistributionModel):
    family = ModelFamily.NORMAL

    @property
    def id(self) -> str:
        return "normal"

    @property
    def second_moment(self) -> float:
        return 1.0

    def sample(self, rng: np.random.Generator, m: int) -> np.ndarray:
        if m < 1:
            raise DomainError(f"sample size must be >= 1, got {m}")
        return rng.standard_normal(m)

    def _l(self, x: np.ndarray) -> np.ndarray:
        return 1.0 - 2.0 * (x * norm.pdf(x) + norm.sf(x))


@dataclass(frozen=True, eq=False)
class UniformSym(DistributionModel):
    family = ModelFamily.UNIFORM
    half_width: float = 1.0

    def __post_init__(self):
        if not self.half_width > 0:
            raise DomainError(f"half_width must be > 0, got {self.half_width}")

    @property
    def id(self) -> str:
        return f"uniform:{self.half_width:g}"

    @property
    def second_moment(self) -> float:
        return self.half_width ** 2 / 3.0

    def sample(self, rng: np.random.Generator, m: int) -> np.ndarray:
        if m < 1:
            raise DomainError(f"sample size must be >= 1, got {m}")
        return rng.uniform(-self.half_width, self.half_width, size=m)

    def _l(self, x: np.ndarray) -> np.ndarray:
        h = self.half_width
        return np.minimum(x, h) ** 3 / (3.0 * h)


def build_slow_vary_tail(alpha: float, grid_ratio: float = DEFAULT_GRID_RATIO, k_max: Optional[int] = None) -> SlowVaryTail:
    """Discrete symmetric law whose truncated second moment tracks exp((log x)^alpha)."""
    if not 0.0 < alpha < 1.0:
        raise DomainError(f"alpha must lie in (0, 1), got {alpha}")
    if not grid_ratio > 1.0:
        raise DomainError(f"grid_ratio must be > 1, got {grid_ratio}")
    k_cap = int(math.floor(math.log(SLOW_VARY_X_CAP) / math.log(grid_ratio)))
    if k_max is not None and not 1 <= k_max <= k_cap:
        raise DomainError(f"k_max must lie in [1, {k_cap}] for grid_ratio {grid_ratio:g}")

    ks = np.arange(1, (k_max or k_cap) + 1, dtype=float)
    x = grid_ratio ** ks
    target = np.exp(np.log(x) ** alpha)
    increments = np.maximum(np.diff(np.concatenate([[1.0], target])), 0.0)
    masses = increments / (x * x)
    total = np.cumsum(masses)

    if k_max is None:
        keep = int(np.searchsorted(total, 1.0, side="right"))
    else:
        if total[-1] > 1.0:
            raise DomainError(f"atom masses sum to {total[-1]:.4f} > 1; lower k_max or raise grid_ratio")
        keep = len(ks)
    model = SlowVaryTail(
        alpha=alpha,
        grid_ratio=grid_ratio,
        k_max=keep,
        atoms=x[:keep],
        masses=masses[:keep],
        moment_increments=increments[:keep],
    )
    logger.debug(f"Built {model.id} with {keep} atoms, mass at zero {model.mass_at_zero:.6f}")
    return model


def sample(model: DistributionModel, rng: np.random.Generator, m: int) -> np.ndarray:
    return model.sample(rng, m)


def truncated_second_moment(model: DistributionModel, x: ArrayLike) -> ArrayLike:
    return model.truncated_second_moment(x)


def eta(model: DistributionModel, j: int) -> float:
    return model.eta(j)


def norming_arrays(
    model: DistributionModel, js: Iterable[int]
) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """(eta_j, l(eta_j), b_j^2, sigma*_j) for each j."""
    j = _checked_indices(js)
    eta_j = model.eta_many(j)
    l_eta = np.asarray(model.truncated_second_moment(eta_j), dtype=float)
    mean_eta = np.asarray(model.truncated_mean(eta_j), dtype=float)
    sigma_star = np.sqrt(np.maximum(l_eta - mean_eta * mean_eta, 0.0))
    return eta_j, l_eta, j * l_eta, sigma_star


def norming_table(model: DistributionModel, js: Iterable[int]) -> NormingTable:
    js = [int(j) for j in js]
    if not js:
        raise DomainError("js must be nonempty")
    if any(b <= a for a, b in zip(js, js[1:])):
        raise DomainError("js must be strictly increasing")
    eta_j, l_eta, b2, sigma_star = norming_arrays(model, js)
    rows = [
        NormingRow(j=j, eta=float(e), l_eta=float(l), b2=float(b), sigma_star=float(s))
        for j, e, l, b, s in zip(js, eta_j, l_eta, b2, sigma_star)
    ]
    return NormingTable(model_id=model.id, rows=rows)


def bn(model: DistributionModel, n: int) -> float:
    """b_n = sqrt(n l(eta_n))."""
    _, _, b2, _ = norming_arrays(model, [n])
    return float(math.sqrt(b2[0]))


def ad188_value(model: DistributionModel, n: int) -> float:
    """(1/n) sum_{j<=n} (sigma*_j / sqrt(l(eta_n)) - 1)^2."""
    _, l_eta, _, sigma_star = norming_arrays(model, np.arange(1, n + 1))
    ratios = sigma_star / math.sqrt(l_eta[-1])
    return float(np.mean((ratios - 1.0) ** 2))


def early_norming_ratio(model: DistributionModel, n: int) -> float:
    """max_{j <= sqrt(n)} l(eta_j) / l(eta_n)."""
    root = max(1, int(math.isqrt(n)))
    _, l_eta, _, _ = norming_arrays(model, np.concatenate([np.arange(1, root + 1), [n]]))
    return float(np.max(l_eta[:-1]) / l_eta[-1])


def parse_model(spec: str) -> DistributionModel:
    """Build a model from 'rademacher', 'normal', 'uniform:1', 'slowvary:0.5[:ratio[:k_max]]'."""
    name, _, rest = spec.strip().partition(":")
    args = [a for a in rest.split(":") if a] if rest else []
    try:
        family = ModelFamily(name.lower())
    except ValueError:
        raise DomainError(f"Unknown model '{name}' in '{spec}'")
    try:
        if family == ModelFamily.RADEMACHER:
            return Rademacher()
        if family == ModelFamily.NORMAL:
            return StandardNormal()
        if family == ModelFamily.UNIFORM:
            return UniformSym(half_width=float(args[0]) if args else 1.0)
        alpha = float(args[0]) if args else 0.5
        ratio = float(args[1]) if len(args) > 1 else DEFAULT_GRID_RATIO
        k_max = int(args[2]) if len(args) > 2 else None
        return build_slow_vary_tail(alpha, ratio, k_max)
    except ValueError as e:
        if isinstance(e, DomainError):
            raise
        raise DomainError(f"Invalid model '{spec}': {str(e)}")
