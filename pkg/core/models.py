from enum import Enum
from typing import List, Dict, Optional
from pydantic import BaseModel, Field


class Verdict(str, Enum):
    POSITIVE_RECURRENT = "positive_recurrent"
    RECURRENT = "recurrent"
    INCONCLUSIVE = "inconclusive"


class SeriesResult(BaseModel):
    value: float
    residual_bound: float
    certified: bool
    n_terms: int
    last_term: float
    rho_tail: float
    last_phi_log2: float


class ClassificationResult(BaseModel):
    verdict: Verdict
    rho_tail: float
    rho_tail_lower: Optional[float] = None
    rho_tail_upper: Optional[float] = None
    rho_per_step: float
    period: int
    last_phi: float
    last_phi_log2: float
    partial_sum: float
    tail_bound: float
    n_used: int
    certified: bool
    recurrence_certified: bool
    numerically_decided: bool = False
    notes: List[str] = Field(default_factory=list)


class StationaryResult(BaseModel):
    psi: List[float]
    pi: List[float]
    ET: float
    Eeta: float
    kmax: int
    tail_mass_bound: float
    pi_tail_mass_bound: float
    certified: bool


class PathSummary(BaseModel):
    occupation_time: List[float]
    visit_counts: List[int]
    total_time: float
    event_count: int
    excursions_completed: int
    return_times_eta: List[float] = Field(default_factory=list)
    return_steps_T: List[int] = Field(default_factory=list)
    horizon_reached: str
    path: Optional[List[int]] = None


class ReturnTimeEstimate(BaseModel):
    excursions: int
    mean_T: float
    se_T: float
    mean_eta: float
    se_eta: float


class BranchingEstimate(BaseModel):
    excursions: int
    levels: List[int]
    mean: Dict[int, List[float]]
    stderr: Dict[int, List[float]]
    identity_violations: int


class OccupationEstimate(BaseModel):
    excursions: int
    levels: List[int]
    mean: Dict[int, float]
    stderr: Dict[int, float]


class ExitFrequency(BaseModel):
    a: int
    b: int
    k: int
    trials: int
    frequency: float
    stderr: float


class ComparisonRow(BaseModel):
    k: int
    psi_formula: float
    psi_oracle: float
    abs_diff: float


class ComparisonReport(BaseModel):
    N: int
    kmax: int
    rows: List[ComparisonRow]
    sup_norm: float
    tv_distance: float
    pi_sup_norm: float
    pi_tv_distance: float
    oracle_residual: float


class CheckOutcome(BaseModel):
    name: str
    passed: bool
    detail: str
    elapsed: float
    skipped: bool = False


class ValidationReport(BaseModel):
    checks: List[CheckOutcome]
    passed: bool
    execution_time: float
