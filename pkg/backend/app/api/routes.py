"""Subcommand handlers: each takes plain arguments and returns a report model."""
import logging

import numpy as np

from app.core.config import DEFAULT_EPS_LIST, get_settings
from app.core.errors import Monge1DError
from app.crud.instance import load_instance, write_plan_csv, write_sweep_csv
from app.models.grid import Grid, make_grid, monotone_plan, plan_tv, sign_mask
from app.models.limit_plan import (
    build_limit_plan,
    discretize_limit_plan,
    factor_entropy_quadrature,
    factor_marginal_error,
    h2_value,
    limit_functional_value,
)
from app.models.measures import random_measure
from app.models.structure import (
    duality_gap,
    h1_diagnostic,
    is_optimal_plan,
    monotone_map,
    potential,
    sign_decompose,
    support_hull,
    transport_cost,
    w1,
)
from app.schemas import (
    CheckResult,
    FactorReport,
    LimitPlanReport,
    PotentialReport,
    RegionReport,
    ReportFile,
    SolveReport,
    SweepRow,
    SweepSummary,
    VerifyReport,
)
from solver.harness import largest_rise, recovery_gaps, sweep, sweep_many
from solver.sinkhorn import brute_min, entropy_of_plan, ipf_masked, j_eps, sinkhorn

logger = logging.getLogger(__name__)

RECOVERY_SLACK_NOISE = 0.05


def _factor_reports(lp, n_quad=None, marginal_n=None):
    reports = []
    for f in lp.factors:
        report = FactorReport(sign=f.sign.value, lo=f.interval.lo, hi=f.interval.hi, entropy=f.entropy_value)
        if n_quad:
            report.entropy_quadrature = factor_entropy_quadrature(f, n_quad=n_quad)
        if marginal_n:
            report.marginal_error_mu, report.marginal_error_nu = factor_marginal_error(f, marginal_n)
        reports.append(report)
    return reports


# ---------------- analyze ----------------
def cmd_analyze(path, n_quad: int = 0) -> ReportFile:
    instance, mu, nu = load_instance(path)
    dec = sign_decompose(mu, nu)
    u = potential(dec)
    lp = build_limit_plan(mu, nu, dec)
    return ReportFile(
        label=instance.label,
        regions=[RegionReport(sign=r.sign.value, lo=r.interval.lo, hi=r.interval.hi) for r in dec.regions],
        w1=w1(mu, nu),
        massA=dec.mass_A(mu),
        potential=PotentialReport(knots=u.knots.tolist(), values=u.values.tolist()),
        duality_gap=duality_gap(u, mu, nu),
        h1=h1_diagnostic(mu, dec),
        h2=h2_value(mu, dec),
        factors=_factor_reports(lp, n_quad),
        zero_region_entropy_term=lp.zero_region_entropy_term,
        minF=limit_functional_value(lp),
    )


# ---------------- limit-plan ----------------
def cmd_limit_plan(path, n_quad: int = 1024, marginal_n: int = 0, grid_n: int = None,
                   csv_path=None) -> LimitPlanReport:
    instance, mu, nu = load_instance(path)
    lp = build_limit_plan(mu, nu, sign_decompose(mu, nu))
    if csv_path is not None:
        write_plan_csv(discretize_limit_plan(lp, n=grid_n or 256), csv_path)
    return LimitPlanReport(
        label=instance.label,
        factors=_factor_reports(lp, n_quad, marginal_n),
        massA=lp.mass_A,
        zero_region_entropy_term=lp.zero_region_entropy_term,
        minF=limit_functional_value(lp),
        grid_n=(grid_n or 256) if csv_path is not None else None,
    )


# ---------------- solve ----------------
def cmd_solve(path, eps: float, n: int, tol: float = None, max_iter: int = None, plan_csv=None) -> SolveReport:
    settings = get_settings()
    instance, mu, nu = load_instance(path)
    grid = make_grid(mu, nu, n)
    result = sinkhorn(grid, eps, tol=tol or settings.tol, max_iter=max_iter or settings.max_iter)
    if plan_csv is not None:
        write_plan_csv(result.plan, plan_csv)
    return SolveReport(
        label=instance.label,
        eps=eps,
        n=grid.n,
        j_eps=result.j_eps,
        transport_cost=result.plan.transport_cost,
        entropy=entropy_of_plan(result.plan),
        iterations=result.iterations,
        marginal_residual=result.marginal_residual,
        converged=result.converged,
    )


# ---------------- sweep ----------------
def _summary(label, report) -> SweepSummary:
    return SweepSummary(
        label=label,
        w1=report.w1,
        massA=report.mass_A,
        minF_reference=report.minF_reference,
        minF_extrapolated=report.minF_extrapolated,
        slope=report.slope,
        converged=report.converged,
        records=[SweepRow(eps=r.eps, n=r.n, j_min=r.j_min, r=r.r, tv=r.tv, iters=r.iterations, cost_gap=r.cost_gap)
                 for r in report.records],
    )


def cmd_sweep(paths, eps_list=DEFAULT_EPS_LIST, cap_n: int = None, tol: float = None, max_iter: int = None,
              jobs: int = 1, csv_path=None) -> list:
    settings = get_settings()
    loaded = [load_instance(p) for p in paths]
    reports = sweep_many(
        [(mu, nu) for _, mu, nu in loaded],
        n_jobs=jobs,
        eps_list=eps_list,
        cap_n=cap_n or settings.cap_n,
        tol=tol or settings.tol,
        max_iter=max_iter or settings.max_iter,
    )
    summaries = [_summary(inst.label, rep) for (inst, _, _), rep in zip(loaded, reports)]
    if csv_path is not None:
        write_sweep_csv(summaries, csv_path)
    return summaries


# ---------------- verify ----------------
def _check(name, value, threshold, passed=None, detail="") -> CheckResult:
    value = float(value)
    ok = bool(value <= threshold) if passed is None else bool(passed)
    return CheckResult(name=name, passed=ok, value=value, threshold=threshold, detail=detail)


def _solver_oracle_checks(seed: int, count: int = 20):
    rng = np.random.default_rng(seed)
    worst_obj, worst_cell = 0.0, 0.0
    for k in range(count):
        n = int(rng.integers(1, 6))
        a, b = rng.uniform(0.1, 1.0, n), rng.uniform(0.1, 1.0, n)
        g = Grid.from_masses(a / a.sum(), b / b.sum())
        for eps in (0.05, 0.5):
            fast = sinkhorn(g, eps, tol=1e-13, max_iter=200_000)
            slow = brute_min(g, eps)
            worst_obj = max(worst_obj, abs(fast.j_eps - j_eps(slow, g, eps)))
            worst_cell = max(worst_cell, float(np.abs(fast.plan.masses - slow.masses).max()))
    return [
        _check("solver_oracle_objective", worst_obj, 1e-9),
        _check("solver_oracle_cells", worst_cell, 1e-6),
    ]


def _structure_checks(mu, nu, dec):
    u = potential(dec)
    checks = [
        _check("w1_consistency", abs(w1(mu, nu) - transport_cost(monotone_map(mu, nu))), 1e-7),
        _check("duality_gap", abs(duality_gap(u, mu, nu)), 1e-8),
    ]
    grid = make_grid(mu, nu, 64)
    ok, violations = is_optimal_plan(monotone_plan(grid), dec)
    checks.append(_check("monotone_plan_optimal", sum(v[2] for v in violations), 1e-6, passed=ok))
    return checks


def _limit_plan_checks(lp):
    checks = []
    for f in lp.factors:
        where = f"{f.sign.value} [{f.interval.lo:.6g}, {f.interval.hi:.6g}]"
        err_mu, err_nu = factor_marginal_error(f, 2048)
        checks.append(_check("gamma0_marginals", max(err_mu, err_nu), 1e-6, detail=where))
        gap = abs(f.entropy_value - factor_entropy_quadrature(f, n_quad=1024))
        checks.append(_check("entropy_formula", gap, 1e-4, detail=where))
    grid = make_grid(lp.mu, lp.nu, 64)
    ok, violations = is_optimal_plan(discretize_limit_plan(lp, grid=grid), lp.dec)
    checks.append(_check("gamma0_optimal", sum(v[2] for v in violations), 1e-6, passed=ok))

    grid = make_grid(lp.mu, lp.nu, 256)
    try:
        ipf = ipf_masked(grid, sign_mask(grid, lp.dec), tol=1e-9)
        checks.append(_check("ipf_agreement", plan_tv(ipf, discretize_limit_plan(lp, grid=grid)), 0.02))
    except Monge1DError as e:
        checks.append(CheckResult(name="ipf_agreement", passed=False, detail=e.detail))
    return checks


def _sweep_checks(lp, cap_n, tol, max_iter):
    report = sweep(lp.mu, lp.nu, DEFAULT_EPS_LIST, cap_n=cap_n, tol=tol, max_iter=max_iter, keep_plans=True)
    records = report.records
    checks = [_check("sweep_converged", 0.0, 0.0, passed=report.converged)]
    checks.append(_check("residual_lower_bound", -min(r.r for r in records), 0.05))
    checks.append(_check("tv_nonincreasing", largest_rise(r.tv for r in records), 0.01))

    ref = report.minF_reference
    if abs(ref) > 0.05:
        miss = abs(report.minF_extrapolated - ref) / abs(ref)
        checks.append(_check("minF_extrapolated_relative", miss, 0.15))
    else:
        checks.append(_check("minF_extrapolated_absolute", abs(report.minF_extrapolated - ref), 0.1))

    gaps = recovery_gaps(lp, report)
    checks.append(_check("recovery_sandwich", max(g.j_min - g.j_recovery for g in gaps), 1e-9))
    slacks = [g.slack for g in gaps]
    sequence = ", ".join(f"{g.eps:g}: {g.slack:.4g}" for g in gaps)
    checks.append(_check("recovery_slack_nonincreasing", largest_rise(slacks), RECOVERY_SLACK_NOISE,
                         detail=sequence))
    checks.append(_check("recovery_final_slack", slacks[-1], 0.5, detail=sequence))
    return checks


def cmd_verify(path, seed: int = None, quick: bool = False) -> VerifyReport:
    settings = get_settings()
    seed = settings.seed if seed is None else seed
    instance, mu, nu = load_instance(path)

    finest = support_hull(mu, nu).length / settings.cap_n
    for name, m in (("mu", mu), ("nu", nu)):
        narrowest = float(np.diff(m.breakpoints)[m.densities > 0].min())
        if narrowest < finest:
            logger.warning("⚠️ %s has a piece of width %.3g (density up to %.3g) below the finest grid cell %.3g",
                           name, narrowest, m.max_density, finest)

    dec = sign_decompose(mu, nu)
    lp = build_limit_plan(mu, nu, dec)
    checks = _structure_checks(mu, nu, dec) + _limit_plan_checks(lp) + _solver_oracle_checks(seed)
    if not quick:
        checks += _sweep_checks(lp, settings.cap_n, settings.tol, settings.max_iter)
    return VerifyReport(label=instance.label, quick=quick, passed=all(c.passed for c in checks), checks=checks)
