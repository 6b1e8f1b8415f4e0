"""Uniform grids over the support hull and discrete plans living on them."""
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from app.core.errors import DimensionMismatchError, MarginalMismatchError
from app.models.measures import Interval, Measure1D
from app.models.structure import Sign, SignDecomposition, support_hull

GRID_MASS_TOL = 1e-12


@dataclass(frozen=True)
class Grid:
    edges: np.ndarray
    a: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        if self.a.shape != self.b.shape or self.edges.shape != (self.a.size + 1,):
            raise DimensionMismatchError(
                f"grid has {self.edges.size} edges for marginals of size {self.a.size} and {self.b.size}"
            )
        if np.any(self.a < 0) or np.any(self.b < 0):
            raise MarginalMismatchError("grid marginals must be nonnegative")
        if abs(self.a.sum() - 1.0) > GRID_MASS_TOL or abs(self.b.sum() - 1.0) > GRID_MASS_TOL:
            raise MarginalMismatchError(f"grid marginals sum to {self.a.sum()!r} and {self.b.sum()!r}")

    @classmethod
    def from_masses(cls, a, b, edges=None) -> "Grid":
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        if edges is None:
            edges = np.linspace(0.0, 1.0, a.size + 1)
        return cls(np.asarray(edges, dtype=float), a, b)

    @property
    def n(self) -> int:
        return self.a.size

    @property
    def h(self) -> float:
        return float(self.edges[1] - self.edges[0])

    @property
    def hull(self) -> Interval:
        return Interval(float(self.edges[0]), float(self.edges[-1]))

    @cached_property
    def midpoints(self) -> np.ndarray:
        return 0.5 * (self.edges[:-1] + self.edges[1:])

    @cached_property
    def cost(self) -> np.ndarray:
        x = self.midpoints
        return np.abs(x[None, :] - x[:, None])

    def reflect(self) -> "Grid":
        return Grid(-self.edges[::-1], self.a[::-1], self.b[::-1])


@dataclass(frozen=True)
class DiscretePlan:
    masses: np.ndarray
    grid: Grid

    def __post_init__(self):
        if self.masses.shape != (self.grid.n, self.grid.n):
            raise DimensionMismatchError(f"plan of shape {self.masses.shape} on a grid with n={self.grid.n}")

    @property
    def row_sums(self) -> np.ndarray:
        return self.masses.sum(axis=1)

    @property
    def col_sums(self) -> np.ndarray:
        return self.masses.sum(axis=0)

    @property
    def marginal_residual(self) -> float:
        """max of the L1 row and column deviations."""
        return float(max(np.abs(self.row_sums - self.grid.a).sum(),
                         np.abs(self.col_sums - self.grid.b).sum()))

    @property
    def transport_cost(self) -> float:
        return float(np.sum(self.grid.cost * self.masses))


def make_grid(mu: Measure1D, nu: Measure1D, n: int) -> Grid:
    if n < 1:
        raise DimensionMismatchError(f"grid size must be positive, got {n}")
    hull = support_hull(mu, nu)
    edges = np.linspace(hull.lo, hull.hi, n + 1)
    return Grid(edges, mu.cell_masses(edges), nu.cell_masses(edges))


def plan_tv(p: DiscretePlan, q: DiscretePlan) -> float:
    if p.masses.shape != q.masses.shape:
        raise DimensionMismatchError(f"cannot compare plans of shape {p.masses.shape} and {q.masses.shape}")
    return 0.5 * float(np.abs(p.masses - q.masses).sum())


def product_plan(grid: Grid) -> DiscretePlan:
    return DiscretePlan(np.outer(grid.a, grid.b), grid)


def diagonal_plan(grid: Grid) -> DiscretePlan:
    return DiscretePlan(np.diag(grid.a), grid)


def monotone_plan(grid: Grid) -> DiscretePlan:
    """North-west-corner coupling: overlap of the cumulative intervals of a and b."""
    ca = np.concatenate(([0.0], np.cumsum(grid.a)))
    cb = np.concatenate(([0.0], np.cumsum(grid.b)))
    upper = np.minimum(ca[1:, None], cb[None, 1:])
    lower = np.maximum(ca[:-1, None], cb[None, :-1])
    return DiscretePlan(np.clip(upper - lower, 0.0, None), grid)


def sign_mask(grid: Grid, dec: SignDecomposition) -> np.ndarray:
    """Support weights of the optimal-plan set on the grid.

    Cells are assigned to the region holding their midpoint. Zero cells only
    couple to themselves; within a Plus (Minus) region cell i couples to the
    cells on its right (left) with weight 1 and to itself with weight 1/2.
    """
    x = grid.midpoints
    i = np.arange(grid.n)[:, None]
    j = np.arange(grid.n)[None, :]
    weights = np.zeros((grid.n, grid.n))
    for r in dec.regions:
        inside = r.interval.contains(x, closed=True)
        both = inside[:, None] & inside[None, :]
        if r.sign is Sign.ZERO:
            weights[both & (i == j)] = 1.0
            continue
        ahead = (j > i) if r.sign is Sign.PLUS else (j < i)
        weights[both & ahead] = 1.0
        weights[both & (i == j)] = 0.5
    return weights
