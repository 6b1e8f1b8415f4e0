from typing import Optional

from pydantic import BaseModel


class RegionReport(BaseModel):
    sign: str
    lo: float
    hi: float


class PotentialReport(BaseModel):
    knots: list[float]
    values: list[float]


class FactorReport(BaseModel):
    sign: str
    lo: float
    hi: float
    entropy: float
    entropy_quadrature: Optional[float] = None
    marginal_error_mu: Optional[float] = None
    marginal_error_nu: Optional[float] = None


class ReportFile(BaseModel):
    label: Optional[str] = None
    regions: list[RegionReport]
    w1: float
    massA: float
    potential: PotentialReport
    duality_gap: float
    h1: float
    h2: float
    factors: list[FactorReport]
    zero_region_entropy_term: float
    minF: float


class LimitPlanReport(BaseModel):
    label: Optional[str] = None
    factors: list[FactorReport]
    massA: float
    zero_region_entropy_term: float
    minF: float
    grid_n: Optional[int] = None


class SolveReport(BaseModel):
    label: Optional[str] = None
    eps: float
    n: int
    j_eps: float
    transport_cost: float
    entropy: float
    iterations: int
    marginal_residual: float
    converged: bool


class SweepRow(BaseModel):
    eps: float
    n: int
    j_min: float
    r: float
    tv: float
    iters: int
    cost_gap: float


class SweepSummary(BaseModel):
    label: Optional[str] = None
    w1: float
    massA: float
    minF_reference: float
    minF_extrapolated: float
    slope: float
    converged: bool
    records: list[SweepRow]


class CheckResult(BaseModel):
    name: str
    passed: bool
    value: Optional[float] = None
    threshold: Optional[float] = None
    detail: str = ""


class VerifyReport(BaseModel):
    label: Optional[str] = None
    quick: bool
    passed: bool
    checks: list[CheckResult]
