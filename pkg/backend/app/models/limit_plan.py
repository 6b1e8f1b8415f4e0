"""The plan selected by vanishing entropic regularization.

On a Plus component I = (a, b) of the CDF gap 𝓕 = F_mu - F_nu the limit plan is

    dγ0(x, y) = ρ1(x) ρ2(y) 1{y > x} dx dy,    ρ1 = mu / G,  ρ2 = nu / F,

where F = exp(T̃), T̃' = mu / 𝓕 and G = 𝓕 / F. F vanishes at a, G at b, so both
are carried in log space (T̃ and log G) and only exponentiated inside 1/(G F).
Minus components are built as Plus components of the reflected pair.
On A = {𝓕 = 0} the plan is mu|A carried by the diagonal.
"""
import logging
from dataclasses import dataclass

import numpy as np
from scipy.special import xlogy

from app.core.errors import (
    InfiniteEntropyError,
    OutsideIntervalError,
    RegionNotSignDefiniteError,
    SingularIntegralError,
)
from app.models.grid import DiscretePlan, Grid, make_grid
from app.models.measures import Interval, Measure1D, PiecewiseDensity
from app.models.structure import TAU_SIGN, CdfGap, Sign, SignDecomposition
from app.utils import graded_rule, integrate_log_linear

logger = logging.getLogger(__name__)

FLAT_REL_TOL = 1e-12


def _times(coef, log_value):
    """coef * log_value with 0 * (-inf) = 0."""
    with np.errstate(invalid="ignore"):
        return np.where(coef == 0, 0.0, coef * log_value)


class PlusCore:
    """T̃ and log G on a Plus interval, in closed form per piece.

    On a piece where 𝓕 is affine with slope s != 0, T̃ = c + (mu/s) log 𝓕;
    where 𝓕 is flat, T̃ = c + (mu/𝓕) x. T̃ = 0 at the midpoint.
    """

    def __init__(self, gap: CdfGap):
        lo, hi = gap.knots[0], gap.knots[-1]
        mid = 0.5 * (lo + hi)
        gap = gap.with_knots([mid])
        f = gap.values
        if np.any(f[1:-1] < -TAU_SIGN):
            raise RegionNotSignDefiniteError(f"CDF gap changes sign inside ({lo}, {hi})")
        if np.any(f[1:-1] <= TAU_SIGN):
            raise SingularIntegralError(f"CDF gap touches 0 inside ({lo}, {hi}); split the region there")
        f = f.copy()
        f[[0, -1]] = 0.0

        self.gap = gap
        self.knots = gap.knots
        self.values = f
        self.mu_density = gap.mu_density
        self.nu_density = gap.nu_density
        self.mu_cum = np.concatenate(([0.0], np.cumsum(self.mu_density * gap.lengths)))

        k_count = self.mu_density.size
        slope = np.diff(f) / gap.lengths
        flat = np.abs(np.diff(f)) <= FLAT_REL_TOL * np.maximum(f[:-1], f[1:])
        with np.errstate(divide="ignore", invalid="ignore"):
            power = np.where(flat, 0.0, self.mu_density / slope)
            power = np.where(~flat & (self.nu_density == 0), 1.0, power)
            linear = np.where(flat, self.mu_density / np.maximum(f[:-1], f[1:]), 0.0)
            log_f = np.log(f)

        const = np.zeros(k_count)
        t_knots = np.zeros(k_count + 1)
        m = int(np.searchsorted(self.knots, mid))
        for k in range(m - 1, -1, -1):
            ref = k + 1
            const[k] = t_knots[ref] - _times(power[k], log_f[ref]) - linear[k] * self.knots[ref]
            t_knots[k] = const[k] + _times(power[k], log_f[k]) + linear[k] * self.knots[k]
        for k in range(m, k_count):
            const[k] = t_knots[k] - _times(power[k], log_f[k]) - linear[k] * self.knots[k]
            t_knots[k + 1] = const[k] + _times(power[k], log_f[k + 1]) + linear[k] * self.knots[k + 1]

        self.power = power
        self.linear = linear
        self.const = const
        self.t_knots = t_knots

    @property
    def interval(self) -> Interval:
        return Interval(float(self.knots[0]), float(self.knots[-1]))

    def _piece(self, z):
        z = np.clip(np.asarray(z, dtype=float), self.knots[0], self.knots[-1])
        k = np.clip(np.searchsorted(self.knots, z, side="right") - 1, 0, self.mu_density.size - 1)
        return z, k

    def _log_gap(self, z):
        with np.errstate(divide="ignore"):
            return np.log(np.interp(z, self.knots, self.values))

    def log_F(self, z):
        z, k = self._piece(z)
        return self.const[k] + _times(self.power[k], self._log_gap(z)) + self.linear[k] * z

    def log_G(self, z):
        z, k = self._piece(z)
        return _times(1.0 - self.power[k], self._log_gap(z)) - self.const[k] - self.linear[k] * z

    def mu_at(self, z):
        z, k = self._piece(z)
        return self.mu_density[k]

    def nu_at(self, z):
        z, k = self._piece(z)
        return self.nu_density[k]

    def mu_cdf(self, z):
        return np.interp(z, self.knots, self.mu_cum)


@dataclass(frozen=True)
class LimitPlanFactor:
    interval: Interval
    sign: Sign
    core: PlusCore
    entropy_value: float

    @property
    def orientation(self) -> float:
        return 1.0 if self.sign is Sign.PLUS else -1.0

    def _z(self, x):
        return self.orientation * np.asarray(x, dtype=float)

    def log_F(self, x):
        return self.core.log_F(self._z(x))

    def log_G(self, x):
        return self.core.log_G(self._z(x))

    def F(self, x):
        return np.exp(self.log_F(x))

    def G(self, x):
        return np.exp(self.log_G(x))

    def rho1(self, x):
        return self.core.mu_at(self._z(x)) * np.exp(-self.log_G(x))

    def rho2(self, x):
        return self.core.nu_at(self._z(x)) * np.exp(-self.log_F(x))


@dataclass(frozen=True)
class LimitPlan:
    factors: tuple
    diagonal_measure: PiecewiseDensity
    zero_region_entropy_term: float
    mu: Measure1D
    nu: Measure1D
    dec: SignDecomposition

    @property
    def mass_A(self) -> float:
        return self.diagonal_measure.total_mass


# ---------------- Factor construction ----------------
def _neg_log_gap_integral(gap: CdfGap, density) -> float:
    """-∫ log|𝓕| d(density) over the gap's knots, closed form per piece."""
    f = np.abs(gap.values)
    pieces = integrate_log_linear(f[:-1], f[1:], gap.lengths)
    with np.errstate(invalid="ignore"):
        terms = np.where(density > 0, -density * pieces, 0.0)
    return float(terms.sum())


def build_factor(mu: Measure1D, nu: Measure1D, region: Interval, sign: Sign, gap: CdfGap = None) -> LimitPlanFactor:
    if sign is Sign.ZERO:
        raise RegionNotSignDefiniteError(f"[{region.lo}, {region.hi}] is a Zero region")
    if gap is None:
        gap = CdfGap.from_measures(mu, nu).with_roots().with_touches()
    local = gap.restrict(region)
    if sign is Sign.MINUS:
        local = local.reflect()
    core = PlusCore(local)
    entropy = _neg_log_gap_integral(local, local.mu_density) - mu.mass(region)
    logger.info("built %s factor on [%.6g, %.6g], entropy %.6g", sign.value, region.lo, region.hi, entropy)
    return LimitPlanFactor(region, sign, core, entropy)


def factor_entropy_formula(f: LimitPlanFactor, mu: Measure1D) -> float:
    """-∫_I log|𝓕| dmu - mu(I)."""
    core = f.core
    return _neg_log_gap_integral(core.gap, core.mu_density) - mu.mass(f.interval)


def gamma0_density(f: LimitPlanFactor, x, y):
    """dγ0 / d(mu ⊗ nu) = 1 / (G(x) F(y)) on the allowed half, else 0."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if not (np.all(f.interval.contains(x, closed=True)) and np.all(f.interval.contains(y, closed=True))):
        raise OutsideIntervalError(f"points outside [{f.interval.lo}, {f.interval.hi}]")
    z, w = f.orientation * x, f.orientation * y
    with np.errstate(over="ignore", invalid="ignore"):
        value = np.exp(-f.core.log_G(z) - f.core.log_F(w))
    out = np.where(w > z, value, 0.0)
    return float(out) if out.ndim == 0 else out


# ---------------- Quadrature checks ----------------
def _pieces(density):
    return np.flatnonzero(density > 0)


def factor_entropy_quadrature(f: LimitPlanFactor, mu: Measure1D = None, nu: Measure1D = None,
                              n_quad: int = 1024) -> float:
    """Ent(γ0|_{I²} | mu ⊗ nu) = ∬_{y>x} λ e^λ dmu dnu, λ = -log G(x) - T̃(y).

    Tensor graded Gauss-Legendre: outer over mu pieces, inner over the nu
    pieces clipped to [x, b].
    """
    core = f.core
    knots = core.knots
    total = 0.0
    for k in _pieces(core.mu_density):
        xs, wx = graded_rule(knots[k], knots[k + 1], n_quad)
        lg = core.log_G(xs)
        inner = np.zeros_like(xs)
        for j in _pieces(core.nu_density):
            if knots[j + 1] <= knots[k]:
                continue
            lo = np.minimum(np.maximum(xs, knots[j]), knots[j + 1])
            ys, wy = graded_rule(lo, np.full_like(lo, knots[j + 1]), n_quad)
            with np.errstate(over="ignore"):
                t = np.exp(-lg[:, None] - core.log_F(ys))
            inner += core.nu_density[j] * np.sum(wy * xlogy(t, t), axis=-1)
        total += core.mu_density[k] * float(np.sum(wx * inner))
    return total


def factor_marginal_error(f: LimitPlanFactor, n: int = 2048):
    """L1 distance of the quadrature marginals of γ0|_{I²} to mu and nu on I."""
    core = f.core
    knots = core.knots
    err_mu = 0.0
    for k in _pieces(core.mu_density):
        xs, wx = graded_rule(knots[k], knots[k + 1], n)
        lg = core.log_G(xs)
        row = np.zeros_like(xs)
        for j in _pieces(core.nu_density):
            if knots[j + 1] <= knots[k]:
                continue
            lo = np.minimum(np.maximum(xs, knots[j]), knots[j + 1])
            ys, wy = graded_rule(lo, np.full_like(lo, knots[j + 1]), n)
            row += core.nu_density[j] * np.sum(wy * np.exp(-lg[:, None] - core.log_F(ys)), axis=-1)
        d = core.mu_density[k]
        err_mu += float(np.sum(wx * np.abs(d * row - d)))

    err_nu = 0.0
    for j in _pieces(core.nu_density):
        ys, wy = graded_rule(knots[j], knots[j + 1], n)
        lf = core.log_F(ys)
        col = np.zeros_like(ys)
        for k in _pieces(core.mu_density):
            if knots[k] >= knots[j + 1]:
                continue
            hi = np.maximum(np.minimum(ys, knots[k + 1]), knots[k])
            xs, wx = graded_rule(np.full_like(hi, knots[k]), hi, n)
            col += core.mu_density[k] * np.sum(wx * np.exp(-core.log_G(xs) - lf[:, None]), axis=-1)
        d = core.nu_density[j]
        err_nu += float(np.sum(wy * np.abs(d * col - d)))
    return err_mu, err_nu


# ---------------- Whole plan ----------------
def h2_value(mu: Measure1D, dec: SignDecomposition) -> float:
    """-∫_{A+ ∪ A-} log|𝓕| dmu; +inf when it diverges."""
    total = 0.0
    for r in dec.signed_regions:
        local = dec.gap.restrict(r.interval)
        mids = 0.5 * (local.knots[:-1] + local.knots[1:])
        total += _neg_log_gap_integral(local, mu.density(mids))
    return total


def build_limit_plan(mu: Measure1D, nu: Measure1D, dec: SignDecomposition) -> LimitPlan:
    factors = tuple(build_factor(mu, nu, r.interval, r.sign, gap=dec.gap) for r in dec.signed_regions)
    zero = [r.interval for r in dec.zero_regions]
    diagonal = mu.restrict(zero)
    # + 0.0 keeps an empty A from reporting -0.0
    zero_term = -mu.entropy_vs_lebesgue(within=zero) + 0.0
    return LimitPlan(factors, diagonal, zero_term, mu, nu, dec)


def limit_functional_value(lp: LimitPlan) -> float:
    """min F = Σ factor entropies - ∫_A log(dmu/dx) dmu."""
    value = sum(f.entropy_value for f in lp.factors) + lp.zero_region_entropy_term
    if not np.isfinite(value):
        raise InfiniteEntropyError("limit plan has infinite entropy")
    return float(value)


# ---------------- Discretization ----------------
def _log_increments(v):
    """log(v[i+1] - v[i]) in log space for nondecreasing log-values v."""
    lo, hi = v[:-1], v[1:]
    with np.errstate(invalid="ignore", divide="ignore"):
        out = hi + np.log(-np.expm1(lo - hi))
    return np.where(hi > lo, out, -np.inf)


def factor_cells(f: LimitPlanFactor, grid: Grid) -> np.ndarray:
    """Exact γ0 masses of the grid cells for one factor.

    Off-diagonal cells are (F(x_{i+1}) - F(x_i)) (G(y_j) - G(y_{j+1})); the
    diagonal cell [l, h]² carries mu([l, h]) - 𝓕(h) + G(h) F(l).
    """
    g = grid if f.sign is Sign.PLUS else grid.reflect()
    core = f.core
    e = np.clip(g.edges, core.knots[0], core.knots[-1])
    log_f = core.log_F(e)
    log_g = core.log_G(e)

    inc_f = _log_increments(log_f)
    # G decreasing: log(G_j - G_{j+1}) = log G_j + log(-expm1(log G_{j+1} - log G_j))
    with np.errstate(invalid="ignore", divide="ignore"):
        dec_g = log_g[:-1] + np.log(-np.expm1(log_g[1:] - log_g[:-1]))
    dec_g = np.where(log_g[:-1] > log_g[1:], dec_g, -np.inf)

    dead = np.isneginf(inc_f)[:, None] | np.isneginf(dec_g)[None, :]
    with np.errstate(invalid="ignore", over="ignore"):
        off = np.where(dead, 0.0, np.exp(inc_f[:, None] + dec_g[None, :]))
    off = np.triu(off, k=1)

    lo, hi = e[:-1], e[1:]
    with np.errstate(invalid="ignore", over="ignore"):
        corner = np.where(hi > lo, np.exp(log_g[1:] + log_f[:-1]), 0.0)
    corner = np.nan_to_num(corner, nan=0.0)
    diag = core.mu_cdf(hi) - core.mu_cdf(lo) - np.interp(hi, core.knots, core.values) + corner
    off[np.diag_indices_from(off)] = np.where(hi > lo, np.clip(diag, 0.0, None), 0.0)

    if f.sign is Sign.MINUS:
        off = off[::-1, ::-1]
    return off


def discretize_limit_plan(lp: LimitPlan, n: int = None, grid: Grid = None, rescale: bool = True) -> DiscretePlan:
    if grid is None:
        grid = make_grid(lp.mu, lp.nu, n)
    masses = np.diag(lp.diagonal_measure.cell_masses(grid.edges))
    for f in lp.factors:
        masses = masses + factor_cells(f, grid)
    if rescale:
        rows = masses.sum(axis=1)
        masses *= np.divide(grid.a, rows, out=np.zeros_like(rows), where=rows > 0)[:, None]
        cols = masses.sum(axis=0)
        masses *= np.divide(grid.b, cols, out=np.zeros_like(cols), where=cols > 0)[None, :]
    return DiscretePlan(masses, grid)
