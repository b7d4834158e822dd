"""Empirical distributions of functional samples and KS distances between them."""
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, Iterable, Optional

import numpy as np
from scipy import stats

from ..core.errors import DomainError


@dataclass(frozen=True, eq=False)
class EmpiricalDistribution:
    values: np.ndarray
    meta: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        v = np.sort(np.asarray(self.values, dtype=float).ravel())
        if np.any(np.isnan(v)):
            raise DomainError("empirical distributions cannot hold NaN values")
        object.__setattr__(self, "values", v)

    @classmethod
    def from_samples(cls, samples: Iterable[float], meta: Optional[Dict[str, Any]] = None) -> "EmpiricalDistribution":
        """Build from raw samples, dropping NaN entries left by degenerate paths."""
        arr = np.asarray(list(samples) if not isinstance(samples, np.ndarray) else samples, dtype=float)
        return cls(arr[~np.isnan(arr)], dict(meta or {}))

    @property
    def count(self) -> int:
        return int(self.values.size)

    def _require_nonempty(self) -> None:
        if self.count == 0:
            raise DomainError("empirical distribution is empty")

    def ecdf(self, x):
        """Right-continuous ECDF with jumps 1/count."""
        self._require_nonempty()
        out = np.searchsorted(self.values, x, side="right") / self.count
        return float(out) if np.ndim(out) == 0 else out

    def quantile(self, q: float) -> float:
        self._require_nonempty()
        if not 0.0 <= q <= 1.0:
            raise DomainError(f"quantile level must lie in [0, 1], got {q}")
        return float(np.quantile(self.values, q, method="inverted_cdf"))

    @property
    def median(self) -> float:
        return self.quantile(0.5)

    @property
    def iqr(self) -> float:
        return self.quantile(0.75) - self.quantile(0.25)

    @property
    def mean(self) -> float:
        self._require_nonempty()
        return float(np.mean(self.values))

    def merge(self, other: "EmpiricalDistribution") -> "EmpiricalDistribution":
        """Pooled sample; order of merging does not matter."""
        return EmpiricalDistribution(np.concatenate([self.values, other.values]), {**other.meta, **self.meta})

    def same_values(self, other: "EmpiricalDistribution") -> bool:
        return self.count == other.count and bool(np.array_equal(self.values, other.values))


def ks_distance(a: EmpiricalDistribution, b: EmpiricalDistribution) -> float:
    """Two-sample Kolmogorov-Smirnov statistic sup |F_a - F_b|."""
    if a.count == 0 or b.count == 0:
        raise DomainError("ks_distance needs two nonempty distributions")
    # statistic only; the p-value is never read
    return float(stats.ks_2samp(a.values, b.values, method="asymp").statistic)


def ks_to_cdf(a: EmpiricalDistribution, cdf: Callable[[np.ndarray], np.ndarray]) -> float:
    """One-sample KS statistic against a continuous CDF."""
    if a.count == 0:
        raise DomainError("ks_to_cdf needs a nonempty distribution")
    return float(stats.kstest(a.values, cdf, method="asymp").statistic)


def ks_noise_floor(m1: int, m2: int) -> float:
    """2 sqrt((m1 + m2) / (m1 m2)), the tolerance floor for a two-sample KS trend."""
    return float(2.0 * np.sqrt((m1 + m2) / (m1 * m2)))
