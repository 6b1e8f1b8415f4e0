"""Entropic transport on a grid: log-domain Sinkhorn, masked IPF and a dual Newton oracle.

The discrete objective is

    J_eps(p) = Σ c_ij p_ij + eps Σ p_ij log(p_ij / (a_i b_j))

over plans with marginals a, b. Its minimizer has the form
p_ij = a_i b_j exp((alpha_i + beta_j - c_ij) / eps).
"""
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize
from scipy.special import logsumexp, xlogy

from app.core.config import DEFAULT_MAX_ITER, DEFAULT_TOL
from app.core.errors import (
    InfeasibleError,
    NonpositiveEpsError,
    NotConvergedError,
    SolverDivergedError,
)
from app.models.grid import DiscretePlan, Grid

logger = logging.getLogger(__name__)

CHECK_EVERY = 10


@dataclass(frozen=True)
class SinkhornResult:
    plan: DiscretePlan
    log_scalings: tuple
    eps: float
    j_eps: float
    iterations: int
    marginal_residual: float
    converged: bool
    residual_history: tuple = field(default=(), repr=False)

    def raise_for_status(self):
        if not self.converged:
            raise NotConvergedError(
                f"Sinkhorn stopped after {self.iterations} iterations at residual {self.marginal_residual:.3e}"
            )
        return self


# ---------------- Shared log-scaling core ----------------
def _scale_log_kernel(log_k, log_a, log_b, tol, max_iter, u=None, v=None):
    """Alternate u = log a - LSE_j(v + K), v = log b - LSE_i(u + K).

    The residual (L1 row deviation after a column update) is checked every
    CHECK_EVERY iterations. Returns (u, v, iterations, residual, history).
    """
    u = np.zeros(log_a.size) if u is None else u
    v = np.zeros(log_b.size) if v is None else v
    a = np.exp(log_a)
    history = []
    residual = np.inf
    it = 0
    while it < max_iter:
        it += 1
        u = log_a - logsumexp(log_k + v[None, :], axis=1)
        v = log_b - logsumexp(log_k + u[:, None], axis=0)
        if it % CHECK_EVERY == 0 or it == max_iter:
            rows = np.exp(u + logsumexp(log_k + v[None, :], axis=1))
            residual = float(np.abs(rows - a).sum())
            if not np.isfinite(residual):
                raise SolverDivergedError(f"non-finite marginal residual at iteration {it}")
            history.append(residual)
            logger.debug("iteration %d residual %.3e", it, residual)
            if residual <= tol:
                break
    return u, v, it, residual, history


def _support(g: Grid):
    return np.flatnonzero(g.a > 0), np.flatnonzero(g.b > 0)


# ---------------- Sinkhorn ----------------
def sinkhorn(g: Grid, eps: float, tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER,
             init=None) -> SinkhornResult:
    """Log-domain Sinkhorn on the support rows/columns; `init` = (alpha, beta) warm start."""
    if not eps > 0:
        raise NonpositiveEpsError(f"eps must be positive, got {eps}")
    rows, cols = _support(g)
    cost = g.cost[np.ix_(rows, cols)]
    log_a, log_b = np.log(g.a[rows]), np.log(g.b[cols])
    log_k = log_a[:, None] + log_b[None, :] - cost / eps

    u0 = v0 = None
    if init is not None:
        u0 = np.asarray(init[0], dtype=float)[rows] / eps
        v0 = np.asarray(init[1], dtype=float)[cols] / eps
    u, v, iterations, residual, history = _scale_log_kernel(log_k, log_a, log_b, tol, max_iter, u0, v0)

    alpha = np.zeros(g.n)
    beta = np.zeros(g.n)
    alpha[rows] = eps * u
    beta[cols] = eps * v
    masses = np.zeros((g.n, g.n))
    masses[np.ix_(rows, cols)] = np.exp(log_k + u[:, None] + v[None, :])
    plan = DiscretePlan(masses, g)
    residual = plan.marginal_residual
    converged = residual <= tol
    if not converged:
        logger.warning("⚠️ Sinkhorn not converged: eps=%g n=%d residual=%.3e after %d iterations",
                       eps, g.n, residual, iterations)
    else:
        logger.info("Sinkhorn eps=%g n=%d converged in %d iterations", eps, g.n, iterations)
    return SinkhornResult(plan, (alpha, beta), eps, j_eps(plan, g, eps), iterations, residual,
                          converged, tuple(history))


def reconstruct_plan(result: SinkhornResult) -> np.ndarray:
    """a_i b_j exp((alpha_i + beta_j - c_ij) / eps), from the stored scalings."""
    g = result.plan.grid
    alpha, beta = result.log_scalings
    with np.errstate(divide="ignore"):
        log_ab = np.log(g.a)[:, None] + np.log(g.b)[None, :]
    return np.exp(log_ab + (alpha[:, None] + beta[None, :] - g.cost) / result.eps)


# ---------------- Masked IPF ----------------
def ipf_masked(g: Grid, mask, tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER) -> DiscretePlan:
    """Entropy projection of a ⊗ b onto plans supported where mask > 0.

    `mask` may be boolean or nonnegative weights; the kernel is a_i b_j mask_ij.
    """
    weights = np.asarray(mask, dtype=float)
    rows, cols = _support(g)
    w = weights[np.ix_(rows, cols)]
    if np.any(w.sum(axis=1) == 0) or np.any(w.sum(axis=0) == 0):
        raise InfeasibleError("mask leaves a row or column with mass and no admissible cell")
    log_a, log_b = np.log(g.a[rows]), np.log(g.b[cols])
    with np.errstate(divide="ignore"):
        log_k = log_a[:, None] + log_b[None, :] + np.log(w)
    u, v, iterations, residual, _ = _scale_log_kernel(log_k, log_a, log_b, tol, max_iter)

    masses = np.zeros((g.n, g.n))
    masses[np.ix_(rows, cols)] = np.exp(log_k + u[:, None] + v[None, :])
    plan = DiscretePlan(masses, g)
    if plan.marginal_residual > tol:
        raise InfeasibleError(
            f"IPF residual stalled at {plan.marginal_residual:.3e} after {iterations} iterations"
        )
    logger.info("IPF n=%d converged in %d iterations", g.n, iterations)
    return plan


def ipf_sweep(plan: DiscretePlan) -> DiscretePlan:
    """One further row-then-column proportional fitting sweep."""
    g = plan.grid
    masses = plan.masses.copy()
    rows = masses.sum(axis=1)
    masses *= np.divide(g.a, rows, out=np.zeros_like(rows), where=rows > 0)[:, None]
    cols = masses.sum(axis=0)
    masses *= np.divide(g.b, cols, out=np.zeros_like(cols), where=cols > 0)[None, :]
    return DiscretePlan(masses, g)


# ---------------- Dual Newton oracle ----------------
def brute_min(g: Grid, eps: float) -> DiscretePlan:
    """Minimize J_eps on a tiny grid through its smooth dual, by exact trust-region Newton.

    Dual: max Σ a f + Σ b h - eps Σ a_i b_j exp((f_i + h_j - c_ij)/eps) + eps,
    with h fixed to 0 on the last support column.
    """
    if not eps > 0:
        raise NonpositiveEpsError(f"eps must be positive, got {eps}")
    rows, cols = _support(g)
    a, b = g.a[rows], g.b[cols]
    cost = g.cost[np.ix_(rows, cols)]
    nr, nc = a.size, b.size
    ab = a[:, None] * b[None, :]

    def split(z):
        return z[:nr], np.append(z[nr:], 0.0)

    def plan_of(z):
        f, h = split(z)
        return ab * np.exp((f[:, None] + h[None, :] - cost) / eps)

    def objective(z):
        f, h = split(z)
        return float(-a @ f - b @ h + eps * plan_of(z).sum())

    def gradient(z):
        p = plan_of(z)
        return np.concatenate((p.sum(axis=1) - a, (p.sum(axis=0) - b)[:-1]))

    def hessian(z):
        p = plan_of(z)
        full = np.block([[np.diag(p.sum(axis=1)), p], [p.T, np.diag(p.sum(axis=0))]])
        return full[:-1, :-1] / eps

    start = np.zeros(nr + nc - 1)
    out = minimize(objective, start, jac=gradient, hess=hessian, method="trust-exact",
                   options={"gtol": 1e-13, "maxiter": 10_000})
    logger.debug("dual Newton: %s after %d iterations", out.message, out.nit)
    masses = np.zeros((g.n, g.n))
    masses[np.ix_(rows, cols)] = plan_of(out.x)
    return DiscretePlan(masses, g)


# ---------------- Functionals ----------------
def entropy_of_plan(p: DiscretePlan, g: Grid = None) -> float:
    """Σ p log(p / (a ⊗ b)), 0 log 0 = 0, +inf off the support of a ⊗ b."""
    g = p.grid if g is None else g
    ref = np.outer(g.a, g.b)
    masses = p.masses
    if np.any((masses > 0) & (ref == 0)):
        return float("inf")
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(masses > 0, masses / np.where(ref > 0, ref, 1.0), 1.0)
    return float(np.sum(xlogy(masses, ratio)))


def j_eps(p: DiscretePlan, g: Grid, eps: float) -> float:
    return float(np.sum(g.cost * p.masses)) + eps * entropy_of_plan(p, g)


def h_eps(p: DiscretePlan, g: Grid, eps: float, w1: float) -> float:
    """(1/eps)(Σ c p - W1) + Ent(p | a ⊗ b)."""
    return (float(np.sum(g.cost * p.masses)) - w1) / eps + entropy_of_plan(p, g)


def f_eps(p: DiscretePlan, g: Grid, eps: float, w1: float, massA: float) -> float:
    """(1/eps)(Σ c p - W1) + Ent(p | a ⊗ b) - |log 2 eps| mu(A)."""
    return h_eps(p, g, eps, w1) - abs(np.log(2.0 * eps)) * massA
