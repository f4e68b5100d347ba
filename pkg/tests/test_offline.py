import numpy as np
import pytest

from rhig.core import FeasibleSet, InstanceError, quadratic_tracking_cost, second_difference_cost
from rhig.offline import (OfflineConvergenceError, banded_solve, check_lemma1, full_gradient,
                          hessian, offline_optimum, partial_gradient, stage_costs, total_cost)


def test_total_cost_two_terms():
    spec = quadratic_tracking_cost(1.0, 0.5)
    assert total_cost(spec, [1.0], [1.0], np.zeros(1)) == 0.25


def test_total_cost_zero_at_tracking():
    spec = quadratic_tracking_cost(1.0, 0.5)
    assert total_cost(spec, [2.0, 2.0, 2.0], [2.0, 2.0, 2.0], np.array([2.0])) == 0.0


def test_total_cost_hand_sum(rng):
    spec = quadratic_tracking_cost(1.3, 0.7)
    x, th, x0 = rng.normal(size=2), rng.normal(size=2), rng.normal()
    hand = (0.65 * (x[0] - th[0]) ** 2 + 0.35 * (x[0] - x0) ** 2
            + 0.65 * (x[1] - th[1]) ** 2 + 0.35 * (x[1] - x[0]) ** 2)
    assert total_cost(spec, x, th, np.array([x0])) == pytest.approx(hand, rel=1e-14)


def test_total_cost_length_mismatch():
    with pytest.raises(InstanceError):
        total_cost(quadratic_tracking_cost(1, 1), [1.0, 2.0], [1.0], np.zeros(1))


def test_partial_gradient_example():
    spec = quadratic_tracking_cost(1.0, 0.5)
    g = partial_gradient(spec, [1.0, 1.0], np.array([0.0]), 2, np.zeros(1))
    assert g[0] == 1.0


def test_partial_gradient_last_stage_has_no_forward_term():
    spec = quadratic_tracking_cost(1.0, 2.0)
    # x_T = theta_T and x_{T-1} = x_T: only a forward term could make it nonzero
    g = partial_gradient(spec, [5.0, 1.0, 1.0], np.array([1.0]), 3, np.zeros(1))
    assert g[0] == 0.0


def test_partial_gradient_out_of_range():
    with pytest.raises(InstanceError):
        partial_gradient(quadratic_tracking_cost(1, 1), [1.0], np.array([0.0]), 2, np.zeros(1))


@pytest.mark.parametrize("arity", [2, 3])
def test_gradient_matches_central_differences(rng, arity):
    for _ in range(10):
        T, n = int(rng.integers(1, 11)), int(rng.integers(1, 4))
        if arity == 2:
            spec = quadratic_tracking_cost(rng.uniform(0.5, 2), rng.uniform(0, 2))
        else:
            spec = second_difference_cost(1.0, 0.05, 1.0, 1.0, 9.8, 0.5)
        x, th = rng.normal(size=(2, T, n))
        x0 = rng.normal(size=n)
        g = full_gradient(spec, x, th, x0)
        stacked = np.array([partial_gradient(spec, x, th[t], t + 1, x0) for t in range(T)])
        np.testing.assert_allclose(stacked, g, atol=1e-12)
        fd = np.zeros_like(x)
        eps = 1e-6
        for idx in np.ndindex(*x.shape):
            e = np.zeros_like(x)
            e[idx] = eps
            fd[idx] = (total_cost(spec, x + e, th, x0) - total_cost(spec, x - e, th, x0)) / (2 * eps)
        assert np.max(np.abs(fd - g)) <= 1e-5


def test_offline_decoupled_when_beta_zero(rng):
    th = rng.normal(size=(6, 2))
    sol = offline_optimum(quadratic_tracking_cost(1.0, 0.0), th, FeasibleSet.whole_space(2),
                          np.zeros(2))
    np.testing.assert_allclose(sol.x_star, th, atol=1e-14)


def test_offline_two_stage_linear_solve():
    spec = quadratic_tracking_cost(1.0, 0.5)
    direct = np.linalg.solve([[2.0, -0.5], [-0.5, 1.5]], [1.0, 1.0])
    np.testing.assert_allclose(direct, [8 / 11, 10 / 11], rtol=1e-15)
    for method in ("banded", "pgd"):
        sol = offline_optimum(spec, [1.0, 1.0], FeasibleSet.whole_space(1), np.zeros(1),
                              method=method)
        np.testing.assert_allclose(sol.x_star.ravel(), direct, atol=1e-9)
    # grid cross-check at 1e-3
    g = np.arange(0.0, 1.0005, 1e-3)
    X1, X2 = np.meshgrid(g, g, indexing="ij")
    C = 0.5 * (X1 - 1) ** 2 + 0.25 * X1**2 + 0.5 * (X2 - 1) ** 2 + 0.25 * (X2 - X1) ** 2
    i, j = np.unravel_index(np.argmin(C), C.shape)
    assert abs(g[i] - direct[0]) <= 1e-3 and abs(g[j] - direct[1]) <= 1e-3


def test_offline_cost_is_recomputed(rng):
    spec = quadratic_tracking_cost(1.0, 1.0)
    th = rng.normal(size=(5, 1))
    sol = offline_optimum(spec, th, FeasibleSet.box(-0.2, 0.2), np.zeros(1))
    assert sol.cost == total_cost(spec, sol.x_star, th, np.zeros(1))
    assert sol.residual <= 1e-10 and sol.method == "pgd"


def test_offline_optimality_under_perturbation(rng):
    spec = quadratic_tracking_cost(1.0, 0.8)
    fset = FeasibleSet.box(-0.5, 0.5, dim=2)
    th = rng.normal(size=(6, 2))
    sol = offline_optimum(spec, th, fset, np.zeros(2))
    for _ in range(200):
        y = fset.project(sol.x_star + 1e-3 * rng.choice([-1, 1], size=sol.x_star.shape))
        assert total_cost(spec, y, th, np.zeros(2)) >= sol.cost - 1e-8


def test_offline_nonconvergence_carries_iterate(rng):
    spec = quadratic_tracking_cost(1.0, 1.0)
    with pytest.raises(OfflineConvergenceError) as info:
        offline_optimum(spec, rng.normal(size=(5, 1)), FeasibleSet.box(-0.1, 0.1), np.zeros(1),
                        max_iter=1)
    assert info.value.last_iterate.shape == (5, 1)


def test_offline_rejects_bad_tol():
    with pytest.raises(InstanceError):
        offline_optimum(quadratic_tracking_cost(1, 1), [1.0], FeasibleSet.box(0, 1), np.zeros(1),
                        tol=0)


def test_banded_matches_dense_triple_arity(rng):
    spec = second_difference_cost(1.0, 1e-3, 1.0, 1.0, 9.8, 0.2)
    th = rng.normal(size=(12, 1))
    x0 = np.array([0.3])
    H = hessian(spec, th, x0)
    rhs = -full_gradient(spec, np.zeros((12, 1)), th, x0).ravel()
    np.testing.assert_allclose(banded_solve(spec, th, x0, 1).ravel(), np.linalg.solve(H, rhs),
                               atol=1e-10)


def test_lemma1_report():
    spec = quadratic_tracking_cost(1.0, 0.5)
    rep = check_lemma1(spec, T=6, trials=200)
    assert rep["strong_convexity_violation"] <= 1e-8
    assert rep["smoothness_violation"] <= 1e-8
    free = check_lemma1(quadratic_tracking_cost(2.0, 0.0), T=5, trials=50)
    assert free["max_curvature"] <= free["L"] + 1e-9


def test_hessian_spectrum_T4():
    spec = quadratic_tracking_cost(1.0, 0.5)
    w = np.linalg.eigvalsh(hessian(spec, np.zeros((4, 1)), np.zeros(1)))
    assert w.min() >= 1.0 - 1e-12 and w.max() <= 3.0 + 1e-12


def test_stage_costs_sum_to_total(rng):
    spec = second_difference_cost(1.0, 1e-4, 1.0, 1.0, 9.8, 0.1)
    x, th = rng.normal(size=(2, 7, 1))
    assert np.sum(stage_costs(spec, x, th, np.ones(1))) == pytest.approx(
        total_cost(spec, x, th, np.ones(1)), rel=1e-14)


def test_projection_is_proximal_argmin(rng):
    # the projected step solves min <g, y> + |y - x|^2 / (2 eta) over the set
    fset = FeasibleSet.box(-0.4, 0.7)
    grid = np.arange(-0.4, 0.7 + 5e-5, 1e-4)
    for _ in range(50):
        x, g, eta = rng.uniform(-1, 1), rng.normal(), rng.uniform(0.1, 2)
        step = fset.project(np.array([x - eta * g]))[0]
        obj = g * grid + (grid - x) ** 2 / (2 * eta)
        assert abs(grid[np.argmin(obj)] - step) <= 1e-4
