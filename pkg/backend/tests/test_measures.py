import numpy as np
import pytest

from app.core.errors import (
    DegenerateRangeError,
    InvalidIntervalError,
    MassNotOneError,
    NegativeDensityError,
    NonIncreasingBreakpointsError,
    TooFewSamplesError,
    ZeroMassError,
)
from app.models.measures import Interval, PiecewiseDensity, from_piecewise, from_samples, random_measure

from conftest import LOG2, uniform


# ---------------- Construction ----------------
def test_from_piecewise_uniform():
    m = from_piecewise([0.0, 1.0], [1.0])
    assert m.total_mass == pytest.approx(1.0, abs=1e-12)
    assert m.support == Interval(0.0, 1.0)


def test_from_piecewise_normalizes():
    m = from_piecewise([0.0, 1.0, 2.0], [1.0, 1.0], normalize=True)
    np.testing.assert_allclose(m.densities, [0.5, 0.5])


def test_from_piecewise_rejects_unnormalized_mass():
    with pytest.raises(MassNotOneError):
        from_piecewise([0.0, 1.0, 2.0], [1.0, 1.0])


@pytest.mark.parametrize(
    "breakpoints, densities, error",
    [
        ([0.0, 0.0, 1.0], [1.0, 1.0], NonIncreasingBreakpointsError),
        ([1.0, 0.0], [1.0], NonIncreasingBreakpointsError),
        ([0.0, 1.0], [1.0, 2.0], NonIncreasingBreakpointsError),
        ([0.0, 1.0, 2.0], [2.0, -1.0], NegativeDensityError),
        ([0.0, 1.0], [0.0], ZeroMassError),
    ],
)
def test_from_piecewise_rejects_bad_input(breakpoints, densities, error):
    with pytest.raises(error):
        from_piecewise(breakpoints, densities, normalize=True)


def test_interval_needs_lo_below_hi():
    with pytest.raises(InvalidIntervalError):
        Interval(1.0, 1.0)
    with pytest.raises(InvalidIntervalError):
        Interval(0.0, float("inf"))


def test_from_samples_single_bin():
    m = from_samples([0.0, 1.0], 1)
    np.testing.assert_allclose(m.breakpoints, [0.0, 1.0])
    np.testing.assert_allclose(m.densities, [1.0])


def test_from_samples_two_bins():
    m = from_samples([0.0, 0.25, 0.75, 1.0], 2)
    np.testing.assert_allclose(m.densities, [1.0, 1.0])


def test_from_samples_uniform_draws():
    rng = np.random.default_rng(7)
    m = from_samples(rng.uniform(0.0, 1.0, 10_000), 32)
    assert np.all(np.abs(m.densities - 1.0) <= 0.15)


def test_from_samples_errors():
    with pytest.raises(TooFewSamplesError):
        from_samples([0.5], 4)
    with pytest.raises(DegenerateRangeError):
        from_samples([0.5, 0.5, 0.5], 4)


# ---------------- CDF and quantile ----------------
def test_cdf_is_piecewise_linear():
    m = from_piecewise([0.0, 1.0, 3.0], [0.5, 0.25])
    assert m.cdf(-1.0) == 0.0
    assert m.cdf(0.5) == pytest.approx(0.25)
    assert m.cdf(2.0) == pytest.approx(0.75)
    assert m.cdf(5.0) == pytest.approx(1.0)


def test_quantile_left_end_of_gap(e4):
    _, nu = e4
    assert nu.quantile(0.5) == pytest.approx(1.0)
    assert nu.quantile(0.75) == pytest.approx(1.75)
    assert nu.quantile(0.0) == pytest.approx(0.0)


def test_quantile_inverts_cdf():
    rng = np.random.default_rng(3)
    for _ in range(20):
        m = random_measure(rng, -1.0, 2.0)
        p = rng.uniform(0.0, 1.0, 100)
        np.testing.assert_allclose(m.cdf(m.quantile(p)), p, atol=1e-12)


def test_reflect_mirrors_cdf():
    m = from_piecewise([0.0, 1.0, 3.0], [0.5, 0.25])
    r = m.reflect()
    x = np.linspace(-0.5, 3.5, 41)
    np.testing.assert_allclose(r.cdf(-x), 1.0 - m.cdf(x), atol=1e-14)


# ---------------- Restriction and entropy ----------------
def test_restrict_keeps_mass_inside(e4):
    mu, _ = e4
    part = mu.restrict([Interval(0.0, 1.0)])
    assert isinstance(part, PiecewiseDensity)
    assert part.total_mass == pytest.approx(0.5)
    assert part.density(1.5) == 0.0


def test_entropy_vs_lebesgue_closed_form():
    m = uniform(0.0, 2.0)
    assert m.entropy_vs_lebesgue() == pytest.approx(-LOG2, abs=1e-14)
    assert m.entropy_vs_lebesgue(within=[Interval(0.0, 1.0)]) == pytest.approx(-LOG2 / 2, abs=1e-14)


def test_entropy_vs_lebesgue_matches_quadrature():
    m = from_piecewise([0.0, 0.28, 0.98, 1.4], [0.5, 1.0, 0.5], normalize=True)
    x = np.linspace(0.0, 1.4, 10_001)
    mids = 0.5 * (x[:-1] + x[1:])
    d = m.density(mids)
    quad = float(np.sum(d * np.log(d) * np.diff(x)))
    assert m.entropy_vs_lebesgue() == pytest.approx(quad, abs=1e-9)


def test_random_measure_is_reproducible():
    a = random_measure(np.random.default_rng(11), gap_prob=0.5)
    b = random_measure(np.random.default_rng(11), gap_prob=0.5)
    np.testing.assert_array_equal(a.breakpoints, b.breakpoints)
    np.testing.assert_array_equal(a.densities, b.densities)
    assert a.total_mass == pytest.approx(1.0, abs=1e-12)
