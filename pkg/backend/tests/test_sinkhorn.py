import numpy as np
import pytest

from app.core.errors import (
    DimensionMismatchError,
    InfeasibleError,
    MarginalMismatchError,
    NonpositiveEpsError,
    NotConvergedError,
)
from app.models.grid import (
    DiscretePlan,
    Grid,
    diagonal_plan,
    make_grid,
    monotone_plan,
    plan_tv,
    product_plan,
    sign_mask,
)
from app.models.structure import sign_decompose
from solver.sinkhorn import (
    CHECK_EVERY,
    brute_min,
    entropy_of_plan,
    f_eps,
    h_eps,
    ipf_masked,
    ipf_sweep,
    j_eps,
    reconstruct_plan,
    sinkhorn,
)


def _random_grid(rng, n):
    a, b = rng.uniform(0.1, 1.0, n), rng.uniform(0.1, 1.0, n)
    return Grid.from_masses(a / a.sum(), b / b.sum())


# ---------------- Grids ----------------
def test_make_grid_identity(e1):
    g = make_grid(*e1, 4)
    np.testing.assert_allclose(g.a, 0.25)
    np.testing.assert_allclose(g.b, 0.25)
    np.testing.assert_allclose(g.midpoints, [0.125, 0.375, 0.625, 0.875])


def test_make_grid_disjoint(e2):
    g = make_grid(*e2, 4)
    np.testing.assert_allclose(g.a, [0.5, 0.5, 0.0, 0.0])
    np.testing.assert_allclose(g.b, [0.0, 0.0, 0.5, 0.5])


def test_make_grid_with_gap(e4):
    g = make_grid(*e4, 8)
    np.testing.assert_allclose(g.a, 0.125)
    np.testing.assert_allclose(g.b, [0.125] * 4 + [0.0, 0.0, 0.25, 0.25], atol=1e-15)


def test_grid_validation(e1):
    with pytest.raises(DimensionMismatchError):
        Grid.from_masses([0.5, 0.5], [1.0])
    with pytest.raises(MarginalMismatchError):
        Grid.from_masses([0.5, 0.6], [0.5, 0.5])
    with pytest.raises(DimensionMismatchError):
        make_grid(*e1, 0)


def test_plan_tv():
    g = Grid.from_masses([0.5, 0.5], [0.5, 0.5])
    assert plan_tv(product_plan(g), product_plan(g)) == 0.0
    assert plan_tv(product_plan(g), diagonal_plan(g)) == pytest.approx(0.5)
    other = Grid.from_masses([1.0, 0.0, 0.0], [1.0, 0.0, 0.0])
    with pytest.raises(DimensionMismatchError):
        plan_tv(product_plan(g), product_plan(other))


def test_plan_tv_of_disjoint_plans():
    g = Grid.from_masses([0.5, 0.5], [0.5, 0.5])
    p = DiscretePlan(np.array([[0.5, 0.0], [0.0, 0.5]]), g)
    q = DiscretePlan(np.array([[0.0, 0.5], [0.5, 0.0]]), g)
    assert plan_tv(p, q) == pytest.approx(1.0)


def test_monotone_plan_marginals():
    g = _random_grid(np.random.default_rng(4), 12)
    plan = monotone_plan(g)
    assert plan.marginal_residual <= 1e-14
    assert np.count_nonzero(plan.masses) <= 2 * g.n - 1


def test_sign_mask_mixed(e4):
    mu, nu = e4
    g = make_grid(mu, nu, 8)
    mask = sign_mask(g, sign_decompose(mu, nu))
    zero, plus = slice(0, 4), slice(4, 8)
    np.testing.assert_array_equal(mask[zero, zero], np.eye(4))
    np.testing.assert_array_equal(mask[plus, plus], np.triu(np.ones((4, 4)), 1) + 0.5 * np.eye(4))
    assert mask[zero, plus].sum() == 0.0
    assert mask[plus, zero].sum() == 0.0


# ---------------- Sinkhorn ----------------
def test_sinkhorn_large_eps_is_product(e3):
    g = make_grid(*e3, 16)
    result = sinkhorn(g, 1e6, tol=1e-13)
    assert np.abs(result.plan.masses - np.outer(g.a, g.b)).max() <= 1e-6


def test_sinkhorn_symmetric_instance():
    g = Grid.from_masses([0.5, 0.5], [0.5, 0.5])
    result = sinkhorn(g, 0.1, tol=1e-12).raise_for_status()
    p = result.plan.masses
    np.testing.assert_allclose(p, p.T, atol=1e-12)
    assert result.marginal_residual <= 1e-12
    assert np.all(p > 0)


def test_sinkhorn_matches_oracle_on_small_grid():
    g = _random_grid(np.random.default_rng(0), 5)
    fast = sinkhorn(g, 0.1, tol=1e-13, max_iter=200_000)
    slow = brute_min(g, 0.1)
    np.testing.assert_allclose(fast.plan.masses, slow.masses, atol=1e-6)


def test_sinkhorn_oracle_objective():
    rng = np.random.default_rng(12)
    for _ in range(20):
        g = _random_grid(rng, int(rng.integers(1, 6)))
        for eps in (0.05, 0.5):
            fast = sinkhorn(g, eps, tol=1e-13, max_iter=200_000)
            slow = brute_min(g, eps)
            assert abs(fast.j_eps - j_eps(slow, g, eps)) <= 1e-9


def test_brute_min_symmetric_instance():
    g = Grid.from_masses([0.5, 0.5], [0.5, 0.5])
    np.testing.assert_allclose(brute_min(g, 0.1).masses, sinkhorn(g, 0.1, tol=1e-13).plan.masses, atol=1e-8)


def test_product_form_certificate(e3):
    g = make_grid(*e3, 32)
    result = sinkhorn(g, 0.1)
    np.testing.assert_allclose(reconstruct_plan(result), result.plan.masses, rtol=1e-10, atol=1e-300)


def test_residual_history_decreases(e3):
    result = sinkhorn(make_grid(*e3, 32), 0.1, tol=1e-12)
    history = np.array(result.residual_history)
    assert history.size >= 2
    assert np.all(history[1:] <= history[:-1] * (1 + 1e-9) + 1e-15)


def test_zero_mass_rows_stay_empty(e2):
    g = make_grid(*e2, 16)
    result = sinkhorn(g, 0.05)
    assert result.converged
    assert result.plan.masses[8:, :].sum() == 0.0
    assert result.plan.masses[:, :8].sum() == 0.0


def test_warm_start_reuses_scalings(e3):
    g = make_grid(*e3, 32)
    cold = sinkhorn(g, 0.05)
    warm = sinkhorn(g, 0.05, init=cold.log_scalings)
    assert warm.iterations <= CHECK_EVERY
    np.testing.assert_allclose(warm.plan.masses, cold.plan.masses, atol=1e-9)


def test_not_converged_is_reported(e3):
    result = sinkhorn(make_grid(*e3, 32), 0.01, tol=1e-15, max_iter=1)
    assert not result.converged
    assert result.iterations == 1
    with pytest.raises(NotConvergedError):
        result.raise_for_status()


@pytest.mark.parametrize("eps", [0.0, -1.0])
def test_nonpositive_eps(e1, eps):
    g = make_grid(*e1, 4)
    with pytest.raises(NonpositiveEpsError):
        sinkhorn(g, eps)
    with pytest.raises(NonpositiveEpsError):
        brute_min(g, eps)


# ---------------- Masked IPF ----------------
def test_ipf_full_mask_is_product():
    g = _random_grid(np.random.default_rng(8), 6)
    plan = ipf_masked(g, np.ones((6, 6), dtype=bool))
    np.testing.assert_allclose(plan.masses, np.outer(g.a, g.b), atol=1e-15)


def test_ipf_fixed_point(e3):
    mu, nu = e3
    g = make_grid(mu, nu, 64)
    plan = ipf_masked(g, sign_mask(g, sign_decompose(mu, nu)), tol=1e-12)
    np.testing.assert_allclose(ipf_sweep(plan).masses, plan.masses, atol=1e-12)


def test_ipf_infeasible_mask():
    g = Grid.from_masses([0.5, 0.5], [0.5, 0.5])
    with pytest.raises(InfeasibleError):
        ipf_masked(g, np.array([[1.0, 1.0], [0.0, 0.0]]))


# ---------------- Functionals ----------------
def test_entropy_of_product_is_zero(e3):
    g = make_grid(*e3, 16)
    p = product_plan(g)
    assert entropy_of_plan(p) == pytest.approx(0.0, abs=1e-14)
    assert j_eps(p, g, 0.1) == pytest.approx(p.transport_cost, abs=1e-14)


def test_entropy_off_support_is_infinite(e2):
    g = make_grid(*e2, 16)
    masses = np.outer(g.a, g.b)
    masses[12, 12] = 0.1
    assert entropy_of_plan(DiscretePlan(masses, g)) == float("inf")


def test_f_eps_of_diagonal_plan(e1):
    g = make_grid(*e1, 64)
    p = diagonal_plan(g)
    assert entropy_of_plan(p) == pytest.approx(np.log(64))
    assert h_eps(p, g, 0.01, 0.0) == pytest.approx(np.log(64))
    assert f_eps(p, g, 0.01, 0.0, 1.0) == pytest.approx(np.log(64) - abs(np.log(0.02)))
