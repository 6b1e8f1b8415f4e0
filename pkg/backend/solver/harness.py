"""ε-sweeps of the entropic problem against the limit plan.

min J_eps = W1 + mu(A) eps |log 2 eps| + eps min F + o(eps); each record stores
the residual r(eps) = (min J_eps - W1 - mu(A) eps |log 2 eps|) / eps, and the
intercept of r against 1/|log eps| estimates min F.
"""
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from joblib import Parallel, delayed
from scipy.linalg import toeplitz

from app.core.config import DEFAULT_CAP_N, DEFAULT_EPS_LIST, DEFAULT_MAX_ITER, DEFAULT_TOL
from app.core.errors import InsufficientRecordsError, NonpositiveEpsError, SolverDivergedError
from app.models.grid import DiscretePlan, Grid, make_grid, plan_tv
from app.models.limit_plan import (
    LimitPlan,
    build_limit_plan,
    discretize_limit_plan,
    factor_cells,
    limit_functional_value,
)
from app.models.measures import Measure1D
from app.models.structure import sign_decompose, support_hull, w1
from solver.sinkhorn import f_eps, j_eps, sinkhorn

logger = logging.getLogger(__name__)

MIN_N = 256
FIT_POINTS = 3


@dataclass(frozen=True)
class SweepRecord:
    eps: float
    n: int
    j_min: float
    r: float
    tv: float
    iterations: int
    cost_gap: float
    converged: bool = True


@dataclass(frozen=True)
class ExpansionFit:
    minF: float
    slope: float


@dataclass(frozen=True)
class SweepReport:
    records: list
    minF_reference: float
    minF_extrapolated: float
    slope: float
    converged: bool
    w1: float
    mass_A: float
    plans: dict = field(default_factory=dict, repr=False)


def default_n_rule(hull_length: float, cap_n: int = DEFAULT_CAP_N):
    """eps -> max(256, ceil(4 hull / eps)), capped at cap_n."""

    def rule(eps: float) -> int:
        wanted = max(MIN_N, math.ceil(4.0 * hull_length / eps))
        if wanted > cap_n:
            logger.warning("⚠️ grid for eps=%g needs n=%d, capped at %d (h > eps/4)", eps, wanted, cap_n)
        return min(wanted, cap_n)

    return rule


def _carry_scalings(result, grid: Grid):
    """Interpolate the previous alpha, beta onto the new grid's midpoints."""
    old = result.plan.grid
    alpha, beta = result.log_scalings
    rows, cols = old.a > 0, old.b > 0
    return (np.interp(grid.midpoints, old.midpoints[rows], alpha[rows]),
            np.interp(grid.midpoints, old.midpoints[cols], beta[cols]))


def expansion_residual(j_min: float, eps: float, w1_value: float, mass_A: float) -> float:
    return (j_min - w1_value - mass_A * eps * abs(math.log(2.0 * eps))) / eps


# ---------------- Sweep ----------------
def sweep(mu: Measure1D, nu: Measure1D, eps_list=DEFAULT_EPS_LIST, n_rule=None, tol: float = DEFAULT_TOL,
          max_iter: int = DEFAULT_MAX_ITER, cap_n: int = DEFAULT_CAP_N, keep_plans: bool = False) -> SweepReport:
    eps_list = [float(e) for e in eps_list]
    if any(e <= 0 for e in eps_list) or any(b >= a for a, b in zip(eps_list, eps_list[1:])):
        raise NonpositiveEpsError(f"eps list must be positive and strictly decreasing, got {eps_list}")
    dec = sign_decompose(mu, nu)
    lp = build_limit_plan(mu, nu, dec)
    min_f = limit_functional_value(lp)
    w1_value = w1(mu, nu)
    mass_A = dec.mass_A(mu)
    n_rule = n_rule or default_n_rule(support_hull(mu, nu).length, cap_n)

    records, plans = [], {}
    previous = None
    converged = True
    for eps in eps_list:
        grid = make_grid(mu, nu, n_rule(eps))
        init = _carry_scalings(previous, grid) if previous is not None else None
        try:
            result = sinkhorn(grid, eps, tol=tol, max_iter=max_iter, init=init)
        except SolverDivergedError as e:
            logger.error("❌ sweep stopped at eps=%g: %s", eps, e.detail)
            converged = False
            break
        gamma0 = discretize_limit_plan(lp, grid=grid)
        record = SweepRecord(
            eps=eps,
            n=grid.n,
            j_min=result.j_eps,
            r=expansion_residual(result.j_eps, eps, w1_value, mass_A),
            tv=plan_tv(result.plan, gamma0),
            iterations=result.iterations,
            cost_gap=result.plan.transport_cost - w1_value,
            converged=result.converged,
        )
        logger.info("eps=%g n=%d j_min=%.10g r=%.6g tv=%.4g", eps, grid.n, record.j_min, record.r, record.tv)
        records.append(record)
        converged &= result.converged
        if keep_plans:
            plans[eps] = result.plan
        previous = result

    if len(records) >= FIT_POINTS:
        fit = fit_expansion(records)
    else:
        fit = ExpansionFit(float("nan"), float("nan"))
    return SweepReport(records, min_f, fit.minF, fit.slope, converged, w1_value, mass_A, plans)


def sweep_many(pairs, n_jobs: int = 1, **kwargs) -> list:
    """Independent sweeps over (mu, nu) pairs on a joblib worker pool."""
    return Parallel(n_jobs=n_jobs)(delayed(sweep)(mu, nu, **kwargs) for mu, nu in pairs)


def fit_expansion(records) -> ExpansionFit:
    """Linear fit r(eps) ≈ minF + slope / |log eps| over the last three records."""
    records = list(getattr(records, "records", records))
    if len(records) < FIT_POINTS:
        raise InsufficientRecordsError(f"need at least {FIT_POINTS} records, got {len(records)}")
    tail = records[-FIT_POINTS:]
    x = np.array([1.0 / abs(math.log(r.eps)) for r in tail])
    y = np.array([r.r for r in tail])
    slope, intercept = np.polyfit(x, y, 1)
    return ExpansionFit(float(intercept), float(slope))


# ---------------- Recovery sequence ----------------
def laplace_cell_kernel(n: int, h: float, eps: float) -> np.ndarray:
    """∬ over cells i, j of e^{-|y-x|/eps} / (2 eps), exact."""
    decay = math.exp(-h / eps)
    first = np.empty(n)
    first[0] = h + eps * math.expm1(-h / eps)
    first[1:] = 0.5 * eps * (1.0 - decay) ** 2 * decay ** np.arange(n - 1)
    return toeplitz(first)


def _round_to_marginals(masses, a, b):
    """Shrink overfull rows then columns and spread the deficit as an outer product."""
    rows = masses.sum(axis=1)
    masses = masses * np.minimum(1.0, np.divide(a, rows, out=np.ones_like(rows), where=rows > 0))[:, None]
    cols = masses.sum(axis=0)
    masses = masses * np.minimum(1.0, np.divide(b, cols, out=np.ones_like(cols), where=cols > 0))[None, :]
    err_a = np.clip(a - masses.sum(axis=1), 0.0, None)
    err_b = np.clip(b - masses.sum(axis=0), 0.0, None)
    total = err_a.sum()
    if total > 0:
        masses = masses + np.outer(err_a, err_b) / total
    return masses


def recovery_plan(lp: LimitPlan, g: Grid, eps: float) -> DiscretePlan:
    """Discrete upper-bound plan for J_eps built from the limit plan.

    Off A²: the limit plan. On A²: the Laplace-kernel plan
    min(mu_A(x), mu_A(y)) e^{-|y-x|/eps}/(2 eps), plus a block plan on
    eps-long segments (anchored at the hull's left end) carrying the rest of mu_A.
    """
    if not eps > 0:
        raise NonpositiveEpsError(f"eps must be positive, got {eps}")
    if g.h > eps / 4:
        logger.warning("⚠️ recovery plan on a grid with h=%g > eps/4=%g", g.h, eps / 4)
    masses = np.zeros((g.n, g.n))
    for f in lp.factors:
        masses += factor_cells(f, g)

    m = lp.diagonal_measure.cell_masses(g.edges)
    if m.sum() > 0:
        density = m / g.h
        near = np.minimum(density[:, None], density[None, :]) * laplace_cell_kernel(g.n, g.h, eps)
        residual = m - near.sum(axis=1)
        if residual.min() < -1e-12:
            logger.warning("⚠️ negative residual mass %.3e clamped to 0", residual.min())
        residual = np.clip(residual, 0.0, None)

        block = np.floor((g.midpoints - g.edges[0]) / eps).astype(int)
        blocks = np.zeros((g.n, g.n))
        for q in np.unique(block[residual > 0]):
            idx = np.flatnonzero(block == q)
            part = residual[idx]
            blocks[np.ix_(idx, idx)] += np.outer(part, part) / part.sum()
        masses += near + blocks

    return DiscretePlan(_round_to_marginals(masses, g.a, g.b), g)


@dataclass(frozen=True)
class RecoveryRecord:
    eps: float
    j_min: float
    j_recovery: float
    slack: float


def recovery_gaps(lp: LimitPlan, report: SweepReport) -> list:
    """Recovery plan on every kept sweep grid.

    `slack` is f_eps(recovery) - minF_reference; it should shrink as eps does.
    """
    if not report.plans:
        raise InsufficientRecordsError("sweep was run without keep_plans")
    out = []
    for r in report.records:
        g = report.plans[r.eps].grid
        rec = recovery_plan(lp, g, r.eps)
        slack = f_eps(rec, g, r.eps, report.w1, report.mass_A) - report.minF_reference
        out.append(RecoveryRecord(r.eps, r.j_min, j_eps(rec, g, r.eps), slack))
        logger.info("eps=%g recovery J=%.10g slack=%.6g", r.eps, out[-1].j_recovery, slack)
    return out


def largest_rise(values) -> float:
    """Largest increase between consecutive values; 0 for a nonincreasing sequence."""
    values = list(values)
    return max([b - a for a, b in zip(values, values[1:])] + [0.0])
