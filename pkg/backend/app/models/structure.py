"""Structure of the optimal plans for the cost |y - x| on the line.

Everything is driven by the sign of F_mu - F_nu: where it vanishes (A) every
optimal plan is diagonal, on a component of {F_mu > F_nu} (resp. <) mass moves
right (resp. left) and stays in the component.
"""
import logging
from dataclasses import dataclass
from enum import Enum

import numpy as np

from app.core.errors import MarginalMismatchError, MassBalanceError, NotLipschitzError
from app.models.measures import Interval, Measure1D
from app.utils import integrate_log_distance

logger = logging.getLogger(__name__)

TAU_SIGN = 1e-10
MASS_BALANCE_TOL = 1e-9


class Sign(str, Enum):
    ZERO = "zero"
    PLUS = "plus"
    MINUS = "minus"

    @property
    def slope(self) -> int:
        return {"zero": 0, "plus": 1, "minus": -1}[self.value]


@dataclass(frozen=True)
class Region:
    interval: Interval
    sign: Sign


class CdfGap:
    """F_mu - F_nu, affine between consecutive knots.

    `mu_density[k]` / `nu_density[k]` are the densities on [knots[k], knots[k+1]].
    """

    def __init__(self, knots, values, mu_density, nu_density):
        self.knots = np.asarray(knots, dtype=float)
        self.values = np.asarray(values, dtype=float)
        self.mu_density = np.asarray(mu_density, dtype=float)
        self.nu_density = np.asarray(nu_density, dtype=float)

    @classmethod
    def from_measures(cls, mu: Measure1D, nu: Measure1D) -> "CdfGap":
        hull = support_hull(mu, nu)
        knots = np.union1d(mu.breakpoints, nu.breakpoints)
        knots = np.union1d(knots[(knots > hull.lo) & (knots < hull.hi)], [hull.lo, hull.hi])
        mids = 0.5 * (knots[:-1] + knots[1:])
        return cls(knots, mu.cdf(knots) - nu.cdf(knots), mu.density(mids), nu.density(mids))

    def __call__(self, x):
        return np.interp(x, self.knots, self.values, left=0.0, right=0.0)

    @property
    def slopes(self) -> np.ndarray:
        return self.mu_density - self.nu_density

    @property
    def lengths(self) -> np.ndarray:
        return np.diff(self.knots)

    def with_knots(self, extra, zero: bool = False) -> "CdfGap":
        """Insert knots (values interpolated, or pinned to 0 when `zero`)."""
        extra = np.asarray(extra, dtype=float)
        extra = extra[(extra > self.knots[0]) & (extra < self.knots[-1])]
        if extra.size == 0:
            return self
        knots = np.union1d(self.knots, extra)
        values = self(knots)
        if zero:
            values[np.isin(knots, extra)] = 0.0
        mids = 0.5 * (knots[:-1] + knots[1:])
        piece = np.searchsorted(self.knots, mids, side="right") - 1
        return CdfGap(knots, values, self.mu_density[piece], self.nu_density[piece])

    def restrict(self, interval: Interval) -> "CdfGap":
        gap = self.with_knots([interval.lo, interval.hi])
        keep = (gap.knots >= interval.lo) & (gap.knots <= interval.hi)
        idx = np.flatnonzero(keep)
        return CdfGap(gap.knots[idx], gap.values[idx],
                      gap.mu_density[idx[:-1]], gap.nu_density[idx[:-1]])

    def reflect(self) -> "CdfGap":
        """The gap of the reflected pair: x -> -F(-x)."""
        return CdfGap(-self.knots[::-1], -self.values[::-1],
                      self.mu_density[::-1], self.nu_density[::-1])

    def with_roots(self, tau: float = TAU_SIGN) -> "CdfGap":
        """Insert the exact zero of every piece on which the gap changes sign."""
        f, x = self.values, self.knots
        cross = ((f[:-1] > tau) & (f[1:] < -tau)) | ((f[:-1] < -tau) & (f[1:] > tau))
        k = np.flatnonzero(cross)
        roots = x[k] - f[k] * (x[k + 1] - x[k]) / (f[k + 1] - f[k])
        return self.with_knots(roots, zero=True)

    def with_touches(self, tau: float = TAU_SIGN) -> "CdfGap":
        """Pin interior knot values with |𝓕| <= tau to exactly 0."""
        touch = np.zeros(self.values.size, dtype=bool)
        touch[1:-1] = np.abs(self.values[1:-1]) <= tau
        if not touch.any():
            return self
        values = np.where(touch, 0.0, self.values)
        return CdfGap(self.knots, values, self.mu_density, self.nu_density)


@dataclass(frozen=True)
class SignDecomposition:
    regions: tuple
    hull: Interval
    gap: CdfGap
    tau: float = TAU_SIGN

    @property
    def zero_regions(self) -> list:
        return [r for r in self.regions if r.sign is Sign.ZERO]

    @property
    def signed_regions(self) -> list:
        return [r for r in self.regions if r.sign is not Sign.ZERO]

    def mass_A(self, mu: Measure1D) -> float:
        return float(sum(mu.mass(r.interval) for r in self.zero_regions))


def support_hull(mu: Measure1D, nu: Measure1D) -> Interval:
    a, b = mu.support, nu.support
    return Interval(min(a.lo, b.lo), max(a.hi, b.hi))


# ---------------- Sign decomposition ----------------
def sign_decompose(mu: Measure1D, nu: Measure1D, tau_sign: float = TAU_SIGN) -> SignDecomposition:
    gap = CdfGap.from_measures(mu, nu).with_roots(tau_sign).with_touches(tau_sign)
    f = gap.values
    flat = np.maximum(np.abs(f[:-1]), np.abs(f[1:])) <= tau_sign
    signs = np.where(flat, 0, np.sign(f[:-1] + f[1:]))

    regions = []
    start = 0
    for k in range(1, signs.size + 1):
        # a signed run also ends where 𝓕 touches 0 without changing sign
        if k == signs.size or signs[k] != signs[start] or (signs[start] != 0 and f[k] == 0.0):
            sign = {0: Sign.ZERO, 1: Sign.PLUS, -1: Sign.MINUS}[int(signs[start])]
            regions.append(Region(Interval(float(gap.knots[start]), float(gap.knots[k])), sign))
            start = k

    for r in regions:
        if r.sign is Sign.ZERO:
            continue
        imbalance = mu.mass(r.interval) - nu.mass(r.interval)
        if abs(imbalance) > MASS_BALANCE_TOL:
            raise MassBalanceError(
                f"{r.sign.value} region [{r.interval.lo}, {r.interval.hi}] has mu(I) - nu(I) = {imbalance:.3e}"
            )
    logger.debug("sign decomposition: %s", [(r.sign.value, r.interval.lo, r.interval.hi) for r in regions])
    return SignDecomposition(tuple(regions), support_hull(mu, nu), gap, tau_sign)


# ---------------- Monotone map and W1 ----------------
class MonotoneMap:
    """T(x) = inf{y : F_nu(y) >= F_mu(x)}, the nondecreasing map pushing source to target."""

    def __init__(self, source: Measure1D, target: Measure1D):
        self.source = source
        self.target = target
        # x-knots between which T is affine: source breakpoints and preimages of target breakpoints
        inner = target._cum[(target._cum > 0) & (target._cum < 1)]
        self.knots = np.union1d(source.breakpoints, source.quantile(inner))

    def __call__(self, x):
        return self.target.quantile(self.source.cdf(x))


def monotone_map(mu: Measure1D, nu: Measure1D) -> MonotoneMap:
    return MonotoneMap(mu, nu)


def w1(mu: Measure1D, nu: Measure1D) -> float:
    """∫ |F_mu - F_nu| dx, exact (trapezoid on pieces without sign change)."""
    gap = CdfGap.from_measures(mu, nu).with_roots(0.0)
    f = np.abs(gap.values)
    return float(np.sum(0.5 * (f[:-1] + f[1:]) * gap.lengths))


def transport_cost(tmap: MonotoneMap, nodes: int = 8) -> float:
    """∫ |T(x) - x| dmu(x), by Gauss-Legendre in quantile space.

    On each p-interval between the images F_mu(knots) of the map's knots,
    T(Q_mu(p)) - Q_mu(p) is affine; it is split where it changes sign.
    """
    mu = tmap.source
    p_knots = np.unique(np.clip(mu.cdf(tmap.knots), 0.0, 1.0))
    gl_x, gl_w = np.polynomial.legendre.leggauss(nodes)

    def displacement(p):
        x = mu.quantile(p)
        return tmap(x) - x

    total = 0.0
    for lo, hi in zip(p_knots[:-1], p_knots[1:]):
        if hi - lo <= 0:
            continue
        q1, q3 = lo + 0.25 * (hi - lo), lo + 0.75 * (hi - lo)
        d1, d3 = displacement(q1), displacement(q3)
        cuts = [lo, hi]
        if d1 * d3 < 0:
            cuts.insert(1, q1 - d1 * (q3 - q1) / (d3 - d1))
        for a, b in zip(cuts[:-1], cuts[1:]):
            p = 0.5 * (a + b) + 0.5 * (b - a) * gl_x
            total += 0.5 * (b - a) * float(np.sum(gl_w * np.abs(displacement(p))))
    return total


# ---------------- Kantorovich potential ----------------
@dataclass(frozen=True)
class KantorovichPotential:
    knots: np.ndarray
    values: np.ndarray

    def __call__(self, x):
        return np.interp(x, self.knots, self.values)

    @property
    def slopes(self) -> np.ndarray:
        return np.diff(self.values) / np.diff(self.knots)

    def integrate(self, m) -> float:
        """∫ u dm for a piecewise-constant measure m (exact)."""
        knots = np.union1d(self.knots, m.breakpoints)
        u = self(knots)
        mids = 0.5 * (knots[:-1] + knots[1:])
        return float(np.sum(m.density(mids) * 0.5 * (u[:-1] + u[1:]) * np.diff(knots)))


def potential(dec: SignDecomposition) -> KantorovichPotential:
    """u' = +1 on Plus regions, -1 on Minus, 0 on Zero; u(hull.lo) = 0."""
    knots = [dec.hull.lo] + [r.interval.hi for r in dec.regions]
    steps = [r.sign.slope * r.interval.length for r in dec.regions]
    values = np.concatenate(([0.0], np.cumsum(steps)))
    return KantorovichPotential(np.asarray(knots), values)


def duality_gap(u: KantorovichPotential, mu: Measure1D, nu: Measure1D) -> float:
    if np.any(np.abs(u.slopes) > 1 + 1e-12):
        raise NotLipschitzError(f"potential slope {np.abs(u.slopes).max():.6g} exceeds 1")
    return w1(mu, nu) - (u.integrate(nu) - u.integrate(mu))


def potential_slack(plan, u: KantorovichPotential) -> float:
    """Σ p_ij (|y_j - x_i| - (u(y_j) - u(x_i))): zero iff p is optimal and u a potential."""
    x = plan.grid.midpoints
    ux = u(x)
    slack = np.abs(x[None, :] - x[:, None]) - (ux[None, :] - ux[:, None])
    return float(np.sum(plan.masses * slack))


# ---------------- Optimality predicate ----------------
def is_optimal_plan(plan, dec: SignDecomposition, tol: float = 1e-6):
    """Check the support conditions of optimal plans, up to one grid cell.

    Returns (ok, violations) with violations a list of (i, j, mass) sorted by mass.
    """
    grid = plan.grid
    p = plan.masses
    marginal_tol = max(tol, 1e-9)
    row_err = float(np.abs(p.sum(axis=1) - grid.a).sum())
    col_err = float(np.abs(p.sum(axis=0) - grid.b).sum())
    if row_err > marginal_tol or col_err > marginal_tol:
        raise MarginalMismatchError(f"plan marginals off by {row_err:.3e} (rows), {col_err:.3e} (cols)")

    lo, hi = grid.edges[:-1], grid.edges[1:]
    h = grid.h
    i = np.arange(grid.n)[:, None]
    j = np.arange(grid.n)[None, :]
    allowed = np.zeros(p.shape, dtype=bool)
    for r in dec.regions:
        iv = r.interval
        in_x = (iv.overlap(lo, hi) > 1e-12 * h)[:, None]
        in_y = ((lo < iv.hi + h) & (hi > iv.lo - h))[None, :]
        if r.sign is Sign.ZERO:
            allowed |= in_x & (np.abs(j - i) <= 1)
        elif r.sign is Sign.PLUS:
            allowed |= in_x & in_y & (j >= i - 1)
        else:
            allowed |= in_x & in_y & (j <= i + 1)

    bad = (~allowed) & (p > 0)
    rows, cols = np.nonzero(bad)
    masses = p[rows, cols]
    order = np.argsort(-masses, kind="stable")
    violations = [(int(rows[k]), int(cols[k]), float(masses[k])) for k in order]
    return float(masses.sum()) <= tol, violations


# ---------------- (H1) diagnostic ----------------
def zero_components(mu: Measure1D, dec: SignDecomposition) -> list:
    """Components (a_i, b_i) of the interior of A ∩ supp mu."""
    components = []
    for r in dec.zero_regions:
        iv = r.interval
        knots = np.union1d(mu.breakpoints[(mu.breakpoints > iv.lo) & (mu.breakpoints < iv.hi)], [iv.lo, iv.hi])
        positive = mu.density(0.5 * (knots[:-1] + knots[1:])) > 0
        start = None
        for k, pos in enumerate(np.append(positive, False)):
            if pos and start is None:
                start = k
            elif not pos and start is not None:
                components.append(Interval(float(knots[start]), float(knots[k])))
                start = None
    return components


def h1_diagnostic(mu: Measure1D, dec: SignDecomposition) -> float:
    """-Σ_i ∫_{a_i}^{b_i} log(min(x - a_i, b_i - x)) dmu(x), closed form per piece."""
    total = 0.0
    for comp in zero_components(mu, dec):
        a, b, c = comp.lo, comp.hi, comp.midpoint
        knots = np.union1d(mu.breakpoints[(mu.breakpoints > a) & (mu.breakpoints < b)], [a, b, c])
        for lo, hi in zip(knots[:-1], knots[1:]):
            d = mu.density(0.5 * (lo + hi))
            anchor = a if hi <= c else b
            total -= d * float(integrate_log_distance(lo, hi, anchor))
    return total
