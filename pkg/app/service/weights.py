"""Weight functions q on (0,1] and the class-Q membership checks."""
import logging
import math
from enum import Enum
from pathlib import Path
from typing import Any, Optional, Tuple, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, model_validator

from ..core.errors import DomainError
from ..core.schemas import MonotoneViolation, ValidationReport

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]

T_MIN = 1e-12
_GL8_NODES, _GL8_WEIGHTS = np.polynomial.legendre.leggauss(8)


class WeightFamily(str, Enum):
    POWER = "power"
    SQRT_LOGLOG = "sqrtloglog"
    SQRT_LOG = "sqrtlog"
    CONSTANT = "const"
    CUSTOM = "custom"


DEFAULT_MONOTONE_DELTA = {
    WeightFamily.POWER: 1.0,
    WeightFamily.SQRT_LOGLOG: math.exp(-math.e),
    WeightFamily.SQRT_LOG: math.exp(-1.0),
    WeightFamily.CONSTANT: 1.0,
    WeightFamily.CUSTOM: 1.0,
}


def guarded_log(x: ArrayLike) -> ArrayLike:
    """log(max(e, x)), the convention used for every log inside a weight."""
    return np.log(np.maximum(math.e, x))


class WeightFunction(BaseModel):
    """A positive weight q(t) = scale * shape(t) on (0,1]."""

    model_config = ConfigDict(frozen=True)

    family: WeightFamily
    param: float = 1.0
    scale: float = 1.0
    knots: Tuple[Tuple[float, float], ...] = ()
    monotone_delta: Optional[float] = None
    source: Optional[str] = None

    @model_validator(mode="before")
    @classmethod
    def fill_monotone_delta(cls, data: Any) -> Any:
        if isinstance(data, dict) and data.get("monotone_delta") is None:
            family = WeightFamily(data["family"])
            data = {**data, "monotone_delta": DEFAULT_MONOTONE_DELTA[family]}
        return data

    @model_validator(mode="after")
    def check_positive(self) -> "WeightFunction":
        if self.monotone_delta is None or not 0.0 < self.monotone_delta <= 1.0:
            raise ValueError(f"monotone_delta must lie in (0, 1], got {self.monotone_delta}")
        if not self.scale > 0.0:
            raise ValueError(f"scale must be > 0, got {self.scale}")
        if self.family == WeightFamily.CUSTOM:
            if len(self.knots) < 2:
                raise ValueError("custom weight needs at least two knots")
            ts = [t for t, _ in self.knots]
            if any(b <= a for a, b in zip(ts, ts[1:])):
                raise ValueError("custom knots must have strictly increasing t")
            if any(not 0.0 < t <= 1.0 for t in ts):
                raise ValueError("custom knot t values must lie in (0, 1]")
            if any(q <= 0.0 for _, q in self.knots):
                raise ValueError("custom knot q values must be > 0")
        elif not self.param > 0.0:
            raise ValueError(f"{self.family.value} parameter must be > 0, got {self.param}")
        return self

    @property
    def id(self) -> str:
        if self.family == WeightFamily.CUSTOM:
            body = f"custom:{self.source or 'inline'}"
        else:
            body = f"{self.family.value}:{self.param:g}"
        return body if self.scale == 1.0 else f"{self.scale:g}*{body}"

    def scaled(self, lam: float) -> "WeightFunction":
        """The weight lam * q."""
        if lam <= 0:
            raise DomainError(f"scale factor must be > 0, got {lam}")
        return self.model_copy(update={"scale": self.scale * lam})

    def _squared_shape(self, t: np.ndarray) -> np.ndarray:
        if self.family == WeightFamily.POWER:
            return t ** (2.0 * self.param)
        if self.family == WeightFamily.SQRT_LOGLOG:
            return self.param * t * guarded_log(guarded_log(1.0 / t))
        if self.family == WeightFamily.SQRT_LOG:
            return self.param * t * guarded_log(1.0 / t)
        if self.family == WeightFamily.CONSTANT:
            return np.full_like(t, self.param * self.param)
        return self._custom_shape(t) ** 2

    def _custom_shape(self, t: np.ndarray) -> np.ndarray:
        log_t = np.log([k[0] for k in self.knots])
        log_q = np.log([k[1] for k in self.knots])
        return np.exp(np.interp(np.log(t), log_t, log_q))

    def _shape(self, t: np.ndarray) -> np.ndarray:
        if self.family == WeightFamily.POWER:
            return t ** self.param
        if self.family == WeightFamily.CONSTANT:
            return np.full_like(t, self.param)
        if self.family == WeightFamily.CUSTOM:
            return self._custom_shape(t)
        return np.sqrt(self._squared_shape(t))

    @staticmethod
    def _checked(t: ArrayLike) -> np.ndarray:
        arr = np.asarray(t, dtype=float)
        if np.any(~(arr > 0.0)) or np.any(arr > 1.0):
            raise DomainError("weights are evaluated only for t in (0, 1]")
        return arr

    def __call__(self, t: ArrayLike) -> ArrayLike:
        arr = self._checked(t)
        out = self.scale * self._shape(arr)
        return float(out) if out.ndim == 0 else out

    def squared(self, t: ArrayLike) -> ArrayLike:
        arr = self._checked(t)
        out = self.scale * self.scale * self._squared_shape(arr)
        return float(out) if out.ndim == 0 else out

    def reciprocal_integral(self, a: ArrayLike, b: ArrayLike) -> ArrayLike:
        """Integral of 1/q(t) over [a, b], elementwise over arrays of endpoints."""
        lo = np.asarray(a, dtype=float)
        hi = np.asarray(b, dtype=float)
        self._checked(lo)
        self._checked(hi)
        if self.family == WeightFamily.CONSTANT:
            out = (hi - lo) / (self.scale * self.param)
        elif self.family == WeightFamily.POWER:
            nu = self.param
            if nu == 1.0:
                out = np.log(hi / lo) / self.scale
            else:
                out = (hi ** (1.0 - nu) - lo ** (1.0 - nu)) / ((1.0 - nu) * self.scale)
        else:
            mid = 0.5 * (hi + lo)
            half = 0.5 * (hi - lo)
            nodes = mid[..., None] + half[..., None] * _GL8_NODES
            out = half * np.sum(_GL8_WEIGHTS / self(nodes), axis=-1)
        return float(out) if np.ndim(out) == 0 else out


def eval_weight(w: WeightFunction, t: float) -> float:
    return w(t)


def validate_class_q(w: WeightFunction, grid_size: int = 1000) -> ValidationReport:
    """Grid scan for positivity and monotonicity near zero.

    Violations are reported, never raised.
    """
    if grid_size < 2:
        raise DomainError(f"grid_size must be >= 2, got {grid_size}")
    grid = np.logspace(math.log10(T_MIN), 0.0, grid_size)
    grid[-1] = 1.0
    q = np.asarray(w(grid))
    positive = bool(np.all(np.isfinite(q)) and np.all(q > 0.0))

    near = grid <= w.monotone_delta
    q_near = q[near]
    t_near = grid[near]
    drops = np.nonzero(q_near[1:] < q_near[:-1] * (1.0 - 1e-12))[0]
    violations = [
        MonotoneViolation(
            t_left=float(t_near[i]),
            t_right=float(t_near[i + 1]),
            q_left=float(q_near[i]),
            q_right=float(q_near[i + 1]),
        )
        for i in drops[:20]
    ]

    ratio = np.sqrt(grid) / q
    tail = [(float(t), float(r)) for t, r in zip(grid[:5], ratio[:5])]
    report = ValidationReport(
        weight=w.id,
        grid_size=grid_size,
        t_min=T_MIN,
        monotone_delta=w.monotone_delta,
        positive=positive,
        monotone=len(drops) == 0,
        violations=violations,
        sqrt_ratio_tail=tail,
        sqrt_ratio_at_min=float(ratio[0]),
    )
    if not report.passed:
        logger.warning(f"Weight '{w.id}' failed class-Q scan: {len(drops)} monotonicity drops, positive={positive}")
    return report


def load_custom_knots(path: Union[str, Path]) -> Tuple[Tuple[float, float], ...]:
    """Read (t, q) knots from a CSV file with columns 't' and 'q'."""
    try:
        df = pd.read_csv(path)
    except (OSError, pd.errors.ParserError) as e:
        raise DomainError(f"Failed to read custom weight knots from '{path}': {str(e)}")
    if not {"t", "q"} <= set(df.columns):
        raise DomainError(f"Custom weight file '{path}' needs columns 't' and 'q'")
    df = df.dropna(how="any").sort_values("t")
    return tuple((float(t), float(q)) for t, q in zip(df["t"], df["q"]))


def parse_weight(spec: str) -> WeightFunction:
    """Build a weight from strings like 'power:0.4', 'sqrtloglog:1', '2*const:1' or 'custom:knots.csv'."""
    text = spec.strip()
    scale = 1.0
    if "*" in text.split(":", 1)[0]:
        factor, text = text.split("*", 1)
        try:
            scale = float(factor)
        except ValueError:
            raise DomainError(f"Invalid weight scale in '{spec}'")
    family_name, _, arg = text.partition(":")
    try:
        family = WeightFamily(family_name.lower())
    except ValueError:
        raise DomainError(f"Unknown weight family '{family_name}' in '{spec}'")
    try:
        if family == WeightFamily.CUSTOM:
            if not arg:
                raise DomainError("custom weight needs a knot file: 'custom:<path>'")
            return WeightFunction(family=family, knots=load_custom_knots(arg), scale=scale, source=arg)
        return WeightFunction(family=family, param=float(arg) if arg else 1.0, scale=scale)
    except ValueError as e:
        if isinstance(e, DomainError):
            raise
        raise DomainError(f"Invalid weight '{spec}': {str(e)}")
