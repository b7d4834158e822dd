import math
from enum import Enum
from typing import List, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from app.core import config as settings


# ===== WEIGHTS =====
class MonotoneViolation(BaseModel):
    t_left: float
    t_right: float
    q_left: float
    q_right: float


class ValidationReport(BaseModel):
    weight: str
    grid_size: int
    t_min: float
    monotone_delta: float
    positive: bool
    monotone: bool
    violations: List[MonotoneViolation] = []
    sqrt_ratio_tail: List[Tuple[float, float]] = []
    sqrt_ratio_at_min: float

    @property
    def passed(self) -> bool:
        return self.positive and self.monotone


# ===== CRITERION =====
class TailDecision(str, Enum):
    SUMMABLE = "summable"
    DIVERGENT = "divergent"
    INCONCLUSIVE = "inconclusive"


class Verdict(str, Enum):
    ALL_C = "all_c"
    SOME_C = "some_c"
    DIVERGENT = "divergent"
    INCONCLUSIVE = "inconclusive"


class LpVerdict(str, Enum):
    FINITE = "finite"
    INFINITE = "infinite"
    INCONCLUSIVE = "inconclusive"


class BlockSeries(BaseModel):
    c: Optional[float] = None
    depth: int
    blocks: List[float]
    decision: TailDecision
    geometric_ratio: float
    power_exponent: float
    escalated: bool = False


class CriterionVerdict(BaseModel):
    weight: str
    verdict: Verdict
    c_threshold_estimate: Optional[float] = None
    tested_c: List[float]
    max_depth: int
    series: List[BlockSeries]
    inconclusive_c: List[float] = []
    diagnostics: List[str] = []


class LpCriterionReport(BaseModel):
    weight: str
    p: float
    verdict: LpVerdict
    series: BlockSeries


# ===== NORMING =====
class NormingRow(BaseModel):
    j: int
    eta: float
    l_eta: float
    b2: float
    sigma_star: float


class NormingTable(BaseModel):
    model_id: str
    rows: List[NormingRow]


# ===== FUNCTIONALS =====
class FunctionalKind(str, Enum):
    SUP = "sup"
    LP = "lp"


class Normalization(str, Enum):
    BY_BN = "bn"
    BY_SELF = "self"
    BY_STUDENT = "student"


class TauRule(str, Enum):
    FIXED = "fixed"
    ONE_OVER_LOG_N = "one_over_log_n"
    ONE_OVER_N = "one_over_n"


# ===== EXPERIMENT REPORTS =====
class ConvergenceRow(BaseModel):
    n: int
    replicates: int
    tau: float
    ks_to_limit: float
    ks_windowed: float
    median: float
    iqr: float
    degenerate: int = 0


class ConvergenceReport(BaseModel):
    experiment: str
    model: str
    weight: str
    kind: FunctionalKind
    normalization: Normalization
    p: Optional[float] = None
    rows: List[ConvergenceRow] = []
    verdict_hint: str = ""
    limit_converged: Optional[bool] = None
    refused: bool = False
    refusal: Optional[str] = None


class ConcentrationRow(BaseModel):
    n: int
    replicates: int
    eps: float
    fraction: float


class Ad188Row(BaseModel):
    n: int
    value: float


class VarianceRatioRow(BaseModel):
    n: int
    ratio: float


class StudentRatioRow(BaseModel):
    n: int
    replicates: int
    ks_to_normal: float
    degenerate: int = 0


class NearOriginRow(BaseModel):
    weight: str
    delta: float
    median: float
    upper_decile: float


class WindowSupRow(BaseModel):
    n: int
    weight: str
    exceed_probability: float
    median: float
    lower_bound_integral: float
    lower_bound_closed_form: Optional[float] = None


class AgreementReport(BaseModel):
    model: str
    weight: str
    n: int
    replicates: int
    first: Normalization
    second: Normalization
    ks: float
    max_abs_difference: float
    degenerate: int = 0


class NormingDecayRow(BaseModel):
    n: int
    max_ratio: float
    bound: float


class CounterexampleReport(BaseModel):
    threshold: float
    replicates: int
    window_rows: List[WindowSupRow]
    norming_rows: List[NormingDecayRow]
    surrogate_crossing_n: float


# ===== EXPERIMENT CONFIG =====
def tau_for_rule(rule: TauRule, n: int, tau: Optional[float] = None) -> float:
    if rule == TauRule.FIXED:
        return float(tau)
    if rule == TauRule.ONE_OVER_LOG_N:
        return 1.0 / math.log(n) if n >= 3 else 1.0 / n
    return 1.0 / n


class ExperimentConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    model: str
    weight: str = "const:1"
    kind: FunctionalKind = FunctionalKind.SUP
    p: float = 1.0
    normalization: Normalization = Normalization.BY_SELF
    ns: List[int]
    replicates: int = 2000
    seed: int
    tau_rule: TauRule = TauRule.ONE_OVER_N
    tau: Optional[float] = None
    output_dir: str = settings.OUTPUT_DIR
    workers: int = Field(default=settings.WORKERS)

    @field_validator("replicates")
    @classmethod
    def replicates_positive(cls, value: int) -> int:
        if value < 1:
            raise ValueError("replicates must be >= 1")
        return value

    @field_validator("ns", mode="before")
    @classmethod
    def ns_from_text(cls, value):
        if isinstance(value, str):
            return [int(float(part)) for part in value.split(",") if part.strip()]
        return value

    @field_validator("ns")
    @classmethod
    def ns_increasing(cls, value: List[int]) -> List[int]:
        if not value:
            raise ValueError("ns must be nonempty")
        if any(n < 1 for n in value):
            raise ValueError("ns entries must be >= 1")
        if any(b <= a for a, b in zip(value, value[1:])):
            raise ValueError("ns must be strictly increasing")
        return value

    @field_validator("seed")
    @classmethod
    def seed_unsigned_64(cls, value: int) -> int:
        if not 0 <= value < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")
        return value

    @field_validator("p")
    @classmethod
    def p_positive(cls, value: float) -> float:
        if value <= 0:
            raise ValueError("p must be > 0")
        return value

    @field_validator("workers")
    @classmethod
    def workers_positive(cls, value: int) -> int:
        if value < 1:
            raise ValueError("workers must be >= 1")
        return value

    @model_validator(mode="after")
    def fixed_tau_present(self) -> "ExperimentConfig":
        if self.tau_rule == TauRule.FIXED:
            if self.tau is None or not 0.0 <= self.tau < 1.0:
                raise ValueError("tau_rule 'fixed' needs tau in [0, 1)")
        return self

    def tau_for(self, n: int) -> float:
        return tau_for_rule(self.tau_rule, n, self.tau)
