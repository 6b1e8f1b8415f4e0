"""Compactly supported, atomless 1-D measures with piecewise-constant densities.

The CDF of such a measure is continuous and piecewise linear, which keeps every
downstream quantity (W1, the sign regions of F_mu - F_nu, entropies) in closed
form.
"""
import logging
from dataclasses import dataclass

import numpy as np
from scipy.special import xlogy

from app.core.errors import (
    DegenerateRangeError,
    InvalidIntervalError,
    MassNotOneError,
    NegativeDensityError,
    NonIncreasingBreakpointsError,
    TooFewSamplesError,
    ZeroMassError,
)

logger = logging.getLogger(__name__)

MASS_TOL = 1e-9


@dataclass(frozen=True)
class Interval:
    lo: float
    hi: float

    def __post_init__(self):
        if not (np.isfinite(self.lo) and np.isfinite(self.hi) and self.lo < self.hi):
            raise InvalidIntervalError(f"interval needs finite lo < hi, got ({self.lo}, {self.hi})")

    @property
    def length(self) -> float:
        return self.hi - self.lo

    @property
    def midpoint(self) -> float:
        return 0.5 * (self.lo + self.hi)

    def contains(self, x, closed: bool = False):
        x = np.asarray(x, dtype=float)
        if closed:
            return (x >= self.lo) & (x <= self.hi)
        return (x > self.lo) & (x < self.hi)

    def overlap(self, lo, hi):
        """Length of [lo, hi] ∩ self (vectorized in lo, hi)."""
        return np.clip(np.minimum(hi, self.hi) - np.maximum(lo, self.lo), 0.0, None)

    def reflect(self) -> "Interval":
        return Interval(-self.hi, -self.lo)


class PiecewiseDensity:
    """Finite measure with density `densities[i]` on [breakpoints[i], breakpoints[i+1]].

    Total mass is arbitrary; this is what restrictions such as mu|A are.
    """

    def __init__(self, breakpoints, densities):
        x = np.array(breakpoints, dtype=float)
        d = np.array(densities, dtype=float)
        if x.ndim != 1 or d.ndim != 1 or x.size != d.size + 1 or d.size == 0:
            raise NonIncreasingBreakpointsError(
                f"need m+1 breakpoints for m densities, got {x.size} and {d.size}"
            )
        if not np.all(np.isfinite(x)) or np.any(np.diff(x) <= 0):
            raise NonIncreasingBreakpointsError("breakpoints must be finite and strictly increasing")
        if not np.all(np.isfinite(d)) or np.any(d < 0):
            raise NegativeDensityError("densities must be finite and nonnegative")
        x.flags.writeable = False
        d.flags.writeable = False
        self.breakpoints = x
        self.densities = d
        cum = np.concatenate(([0.0], np.cumsum(d * np.diff(x))))
        cum.flags.writeable = False
        self._cum = cum

    def __repr__(self):
        return f"{type(self).__name__}(pieces={self.densities.size}, hull=[{self.breakpoints[0]}, {self.breakpoints[-1]}])"

    @property
    def total_mass(self) -> float:
        return float(self._cum[-1])

    @property
    def hull(self) -> Interval:
        return Interval(float(self.breakpoints[0]), float(self.breakpoints[-1]))

    @property
    def support(self) -> Interval:
        """Smallest interval carrying all the mass."""
        positive = np.flatnonzero(self.densities > 0)
        if positive.size == 0:
            raise ZeroMassError("measure has zero mass")
        return Interval(float(self.breakpoints[positive[0]]), float(self.breakpoints[positive[-1] + 1]))

    @property
    def max_density(self) -> float:
        return float(self.densities.max())

    def cdf(self, x):
        """F(x) = mass of (-inf, x]; continuous and piecewise linear."""
        out = np.interp(x, self.breakpoints, self._cum, left=0.0, right=self.total_mass)
        return float(out) if np.ndim(out) == 0 else out

    def density(self, x):
        """Right-continuous density value; 0 outside the breakpoints."""
        x = np.asarray(x, dtype=float)
        idx = np.searchsorted(self.breakpoints, x, side="right") - 1
        inside = (idx >= 0) & (idx < self.densities.size)
        out = np.where(inside, self.densities[np.clip(idx, 0, self.densities.size - 1)], 0.0)
        return float(out) if out.ndim == 0 else out

    def mass(self, interval: Interval) -> float:
        return float(self.cdf(interval.hi) - self.cdf(interval.lo))

    def cell_masses(self, edges) -> np.ndarray:
        return np.diff(self.cdf(np.asarray(edges, dtype=float)))

    def entropy_vs_lebesgue(self, within=None) -> float:
        """∫ log(dm/dx) dm, optionally only over the union of `within` intervals."""
        lengths = np.diff(self.breakpoints)
        if within is not None:
            lo, hi = self.breakpoints[:-1], self.breakpoints[1:]
            lengths = sum((iv.overlap(lo, hi) for iv in within), np.zeros_like(lengths))
        return float(np.sum(xlogy(self.densities, self.densities) * lengths))

    def restrict(self, intervals) -> "PiecewiseDensity":
        """The measure restricted to a union of disjoint intervals."""
        knots = np.unique(np.concatenate(
            [self.breakpoints] + [[iv.lo, iv.hi] for iv in intervals]
        ))
        knots = knots[(knots >= self.breakpoints[0]) & (knots <= self.breakpoints[-1])]
        mids = 0.5 * (knots[:-1] + knots[1:])
        keep = np.zeros(mids.size, dtype=bool)
        for iv in intervals:
            keep |= iv.contains(mids)
        return PiecewiseDensity(knots, np.where(keep, self.density(mids), 0.0))

    def reflect(self):
        """Image under x -> -x."""
        return type(self)(-self.breakpoints[::-1], self.densities[::-1])


class Measure1D(PiecewiseDensity):
    """Probability measure: PiecewiseDensity with unit mass (to 1e-12)."""

    def __init__(self, breakpoints, densities):
        super().__init__(breakpoints, densities)
        if self.total_mass <= 0:
            raise ZeroMassError("measure has zero mass")
        if abs(self.total_mass - 1.0) > 1e-12:
            raise MassNotOneError(f"total mass {self.total_mass!r} is not 1")

    def quantile(self, p):
        """inf{y : F(y) >= p}; on a flat CDF stretch this is the left end of the gap."""
        p = np.clip(np.asarray(p, dtype=float), 0.0, self.total_mass)
        cum = self._cum
        k = np.clip(np.searchsorted(cum, p, side="left"), 1, self.densities.size)
        piece = k - 1
        with np.errstate(divide="ignore", invalid="ignore"):
            y = self.breakpoints[piece] + (p - cum[piece]) / self.densities[piece]
        out = np.where(p <= 0.0, self.support.lo, y)
        return float(out) if out.ndim == 0 else out


# ---------------- Constructors ----------------
def from_piecewise(breakpoints, densities, normalize: bool = False) -> Measure1D:
    raw = PiecewiseDensity(breakpoints, densities)
    total = raw.total_mass
    if total <= 0:
        raise ZeroMassError("total mass must be positive")
    if not normalize and abs(total - 1.0) > MASS_TOL:
        raise MassNotOneError(f"total mass is {total!r}, expected 1 (pass normalize to rescale)")
    return Measure1D(raw.breakpoints, raw.densities / total)


def from_samples(samples, bin_count: int) -> Measure1D:
    """Histogram density on equal-width bins spanning [min, max] of the samples."""
    samples = np.asarray(samples, dtype=float).ravel()
    if samples.size < 2:
        raise TooFewSamplesError(f"need at least 2 samples, got {samples.size}")
    if bin_count < 1:
        raise TooFewSamplesError("bin_count must be at least 1")
    lo, hi = float(samples.min()), float(samples.max())
    if lo == hi:
        raise DegenerateRangeError(f"all samples equal {lo}")
    densities, edges = np.histogram(samples, bins=bin_count, range=(lo, hi), density=True)
    return from_piecewise(edges, densities, normalize=True)


def random_measure(rng: np.random.Generator, lo: float = 0.0, hi: float = 1.0, max_pieces: int = 4,
                   gap_prob: float = 0.0) -> Measure1D:
    """Seed-driven piecewise-constant measure on [lo, hi] (test corpora and `verify`)."""
    pieces = int(rng.integers(1, max_pieces + 1))
    inner = np.sort(rng.uniform(lo, hi, size=pieces - 1))
    breakpoints = np.concatenate(([lo], inner, [hi]))
    densities = rng.uniform(0.2, 2.0, size=pieces)
    if pieces > 2:
        gaps = rng.random(pieces) < gap_prob
        gaps[[0, -1]] = False
        densities[gaps] = 0.0
    # sorted uniforms can coincide in principle; drop zero-width pieces
    keep = np.diff(breakpoints) > 1e-9
    breakpoints = np.concatenate(([breakpoints[0]], breakpoints[1:][keep]))
    return from_piecewise(breakpoints, densities[keep], normalize=True)
