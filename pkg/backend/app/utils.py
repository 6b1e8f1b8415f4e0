from functools import lru_cache

import numpy as np
from scipy.special import xlogy

# ---------------- Quadrature ----------------
# Composite Gauss-Legendre on a mesh graded geometrically toward both ends of
# [lo, hi]. Nodes never touch the endpoints, so integrands with log or power
# singularities there can be evaluated safely.


@lru_cache(maxsize=64)
def _unit_graded_rule(n: int, order: int, depth: int):
    cells = max(4, n // order)
    levels = min(depth, max(1, cells // 4))
    middle = cells - 2 * levels
    left = 0.25 * 2.0 ** -np.arange(levels - 1, -1, -1.0)
    edges = np.concatenate((
        [0.0],
        left,
        np.linspace(0.25, 0.75, middle + 1)[1:-1],
        (1.0 - left)[::-1],
        [1.0],
    ))
    x, w = np.polynomial.legendre.leggauss(order)
    lo, width = edges[:-1, None], np.diff(edges)[:, None]
    nodes = (lo + 0.5 * width * (x + 1.0)).ravel()
    weights = (0.5 * width * w).ravel()
    nodes.flags.writeable = False
    weights.flags.writeable = False
    return nodes, weights


def graded_rule(lo, hi, n: int = 256, order: int = 8, depth: int = 30):
    """Nodes and weights for ∫_lo^hi; lo/hi may be arrays (rule on the last axis)."""
    u, w = _unit_graded_rule(int(n), int(order), int(depth))
    lo = np.asarray(lo, dtype=float)[..., None]
    width = np.asarray(hi, dtype=float)[..., None] - lo
    return lo + width * u, width * w


# ---------------- Closed-form piecewise integrals ----------------
def xlogx_primitive(t):
    """Antiderivative of log t: t log t - t, equal to 0 at t = 0."""
    t = np.asarray(t, dtype=float)
    return xlogy(t, t) - t


def integrate_log_linear(f_left, f_right, length):
    """∫ log f over a piece where f is affine from f_left to f_right (both >= 0)."""
    f_left = np.asarray(f_left, dtype=float)
    f_right = np.asarray(f_right, dtype=float)
    length = np.asarray(length, dtype=float)
    delta = f_right - f_left
    flat = np.abs(delta) <= 1e-9 * np.maximum(np.abs(f_left), np.abs(f_right))
    with np.errstate(divide="ignore", invalid="ignore"):
        sloped = length * (xlogx_primitive(f_right) - xlogx_primitive(f_left)) / delta
        level = length * np.log(0.5 * (f_left + f_right))
    return np.where(flat, level, sloped)


def integrate_log_distance(lo, hi, anchor):
    """∫_lo^hi log|x - anchor| dx for an interval not containing anchor in its interior."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    side = np.where(lo >= anchor, 1.0, -1.0)
    return side * (xlogx_primitive(np.abs(hi - anchor)) - xlogx_primitive(np.abs(lo - anchor)))
