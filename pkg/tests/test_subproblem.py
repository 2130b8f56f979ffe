import numpy as np
import pytest

from moco.core import InvalidInputError, RngStream, project_simplex
from moco.subproblem import (lambda_step_regularized, lambda_step_softmax,
                             multi_gradient, solve_lambda,
                             solve_lambda_closed_form_2)


def random_jacobian(rng, d, M, scale=1.0):
    return rng.normal((d, M), scale=scale)


def grid_min_norm_2(J, rho=0.0, resolution=1e-6):
    """Brute-force weight search on a 1-d grid, independent of the solver."""
    t = np.arange(0.0, 1.0 + resolution, resolution)
    lam = np.column_stack([t, 1.0 - t])
    vals = np.sum((lam @ J.T) ** 2, axis=1) + 0.5 * rho * np.sum(lam ** 2, axis=1)
    i = np.argmin(vals)
    return lam[i], vals[i]


class TestSolveLambda:
    def test_opposed_gradients_cancel(self):
        J = np.array([[1.0, -1.0], [0.0, 0.0]])
        rep = solve_lambda(J, 0.0)
        assert rep.converged
        np.testing.assert_allclose(rep.weights, [0.5, 0.5], atol=1e-8)
        assert rep.objective_value <= 1e-12

    def test_identical_columns_regularized(self):
        g = np.array([1.0, 2.0, -0.5])
        J = np.column_stack([g, g])
        rep = solve_lambda(J, rho=0.1)
        np.testing.assert_allclose(rep.weights, [0.5, 0.5], atol=1e-6)

    def test_against_grid_search(self):
        J = np.array([[2.0, 0.0], [0.0, 1.0]])
        lam_grid, val_grid = grid_min_norm_2(J)
        rep = solve_lambda(J, 0.0, tol=1e-12)
        assert abs(rep.objective_value - val_grid) <= 1e-6
        np.testing.assert_allclose(rep.weights, [0.2, 0.8], atol=1e-6)
        np.testing.assert_allclose(J @ rep.weights, [0.4, 0.8], atol=1e-6)
        np.testing.assert_allclose(lam_grid, [0.2, 0.8], atol=1e-5)

    def test_budget_exhaustion_reports_not_raises(self):
        rng = RngStream(3)
        J = random_jacobian(rng, 4, 3)
        rep = solve_lambda(J, 0.0, tol=1e-16, max_iters=3)
        assert not rep.converged
        assert rep.iterations == 3

    def test_single_objective(self):
        rep = solve_lambda(np.array([[3.0], [4.0]]), 0.0)
        np.testing.assert_array_equal(rep.weights, [1.0])
        assert rep.objective_value == pytest.approx(25.0)

    def test_zero_jacobian(self):
        rep = solve_lambda(np.zeros((3, 2)), 0.0)
        assert rep.objective_value == 0.0
        assert rep.converged

    def test_min_norm_optimality_property(self):
        rng = RngStream(11)
        for M in (2, 3, 5):
            for d in (2, 10):
                for _ in range(30):
                    J = random_jacobian(rng, d, M)
                    rep = solve_lambda(J, 0.0, tol=1e-10)
                    val = np.sum((J @ rep.weights) ** 2)
                    for m in range(M):
                        assert val <= np.sum(J[:, m] ** 2) + 1e-6
                    for _ in range(20):
                        lam = project_simplex(rng.normal(M))
                        assert val <= np.sum((J @ lam) ** 2) + 1e-6


class TestClosedForm2:
    def test_orthogonal_equal_norm(self):
        assert solve_lambda_closed_form_2([1.0, 0.0], [0.0, 1.0]) == pytest.approx(0.5)

    def test_aligned_clipped(self):
        assert solve_lambda_closed_form_2([1.0, 0.0], [3.0, 0.0]) == 1.0

    def test_matches_iterative(self):
        w = solve_lambda_closed_form_2([2.0, 0.0], [0.0, 1.0])
        assert w == pytest.approx(0.2, abs=1e-12)
        rep = solve_lambda(np.array([[2.0, 0.0], [0.0, 1.0]]), 0.0, tol=1e-10)
        assert abs(w - rep.weights[0]) <= 1e-6

    def test_identical_gradients_convention(self):
        g = [1.5, -2.0]
        assert solve_lambda_closed_form_2(g, g) == 0.5

    def test_equivalence_property(self):
        # closed form versus iterative QP on 1000 random two-objective cases
        rng = RngStream(21)
        for _ in range(1000):
            J = random_jacobian(rng, 3, 2)
            w_cf = solve_lambda_closed_form_2(J[:, 0], J[:, 1])
            w_it = solve_lambda(J, 0.0, tol=1e-12).weights[0]
            assert abs(w_cf - w_it) <= 1e-6


class TestLambdaSteps:
    def test_zero_matrix_fixed_point(self):
        lam = np.array([0.3, 0.7])
        out = lambda_step_regularized(lam, np.zeros((4, 2)), 0.0, 0.5)
        np.testing.assert_allclose(out, lam, atol=1e-15)

    def test_orthonormal_full_step(self):
        # Y'Y = I, gamma = 1: pre-projection point is the origin
        Y = np.eye(2)
        out = lambda_step_regularized(np.array([1.0, 0.0]), Y, 0.0, 1.0)
        np.testing.assert_allclose(out, project_simplex(np.zeros(2)), atol=1e-15)
        np.testing.assert_allclose(out, [0.5, 0.5], atol=1e-15)

    def test_zero_stepsize(self):
        lam = np.array([0.25, 0.75])
        out = lambda_step_regularized(lam, np.ones((3, 2)), 0.1, 0.0)
        np.testing.assert_allclose(out, lam, atol=1e-15)

    def test_dimension_mismatch(self):
        with pytest.raises(InvalidInputError):
            lambda_step_regularized(np.array([1.0, 0.0]), np.zeros((3, 3)), 0.0, 0.1)

    def test_softmax_uniform_on_equal_components(self):
        lam = np.array([0.25, 0.25, 0.25, 0.25])
        out = lambda_step_softmax(lam, np.zeros((2, 4)), 0.0, 1.0)
        np.testing.assert_allclose(out, np.full(4, 0.25), atol=1e-15)

    def test_softmax_definition_at_zero_matrix(self):
        lam = np.array([1.0, 0.0])
        out = lambda_step_softmax(lam, np.zeros((2, 2)), 0.0, 0.7)
        e = np.exp(lam)
        np.testing.assert_allclose(out, e / e.sum(), atol=1e-15)

    def test_softmax_hand_value(self):
        # softmax((ln 3, 0)) = (0.75, 0.25); build raw update = lam with Y=0, gamma=0
        lam = np.array([np.log(3.0), 0.0])
        out = lambda_step_softmax(lam, np.zeros((2, 2)), 0.0, 0.0)
        np.testing.assert_allclose(out, [0.75, 0.25], atol=1e-12)

    def test_softmax_strictly_interior(self):
        rng = RngStream(5)
        for _ in range(100):
            lam = project_simplex(rng.normal(3))
            out = lambda_step_softmax(lam, rng.normal((4, 3)), 0.05, 0.3)
            assert np.all(out > 0)
            assert abs(out.sum() - 1) <= 1e-12


class TestMultiGradient:
    def test_vertex_selects_column(self):
        rng = RngStream(1)
        J = random_jacobian(rng, 5, 3)
        np.testing.assert_array_equal(multi_gradient(J, [0.0, 1.0, 0.0]), J[:, 1])

    def test_opposed_cancel(self):
        J = np.column_stack([[2.0, -1.0], [-2.0, 1.0]])
        np.testing.assert_allclose(multi_gradient(J, [0.5, 0.5]), [0.0, 0.0], atol=1e-15)

    def test_weighted_sum(self):
        J = np.array([[2.0, 0.0], [0.0, 1.0]])
        np.testing.assert_allclose(multi_gradient(J, [0.2, 0.8]), [0.4, 0.8])


class TestAppendixInequalities:
    def test_regularization_gap_bound(self):
        # 0 <= ||J lam_rho||^2 - ||J lam*||^2 <= rho/2 (1 - 1/M)
        rng = RngStream(42)
        for rho in (1e-3, 1e-2, 1e-1):
            for _ in range(120):
                M = int(rng.integers(2, 5))
                J = random_jacobian(rng, 4, M)
                lam_r = solve_lambda(J, rho, tol=1e-10).weights
                # warm start keeps the rho=0 solve on a descent path from lam_r
                lam_0 = solve_lambda(J, 0.0, tol=1e-10, lambda0=lam_r).weights
                gap = np.sum((J @ lam_r) ** 2) - np.sum((J @ lam_0) ** 2)
                assert gap >= -1e-9
                assert gap <= 0.5 * rho * (1 - 1 / M) + 1e-8

    def test_descent_direction_inequality(self):
        # <J lam*, J lam> >= ||J lam*||^2 for every simplex lam
        rng = RngStream(43)
        for _ in range(100):
            M = int(rng.integers(2, 5))
            J = random_jacobian(rng, 5, M)
            d = J @ solve_lambda(J, 0.0, tol=1e-10).weights
            dd = float(d @ d)
            for _ in range(10):
                lam = project_simplex(rng.normal(M))
                assert float(d @ (J @ lam)) >= dd - 1e-7

    def test_lambda_rho_stability_trend(self):
        # ||lam_rho(J) - lam_rho(J')|| <= safety * (sum_m L_m / rho) * ||J - J'||_F
        rng = RngStream(44)
        rho = 0.05
        safety = 2.0
        for _ in range(1000):
            M = int(rng.integers(2, 5))
            J = random_jacobian(rng, 4, M)
            Jp = J + rng.normal((4, M), scale=0.05)
            lam = solve_lambda(J, rho, tol=1e-11).weights
            lam_p = solve_lambda(Jp, rho, tol=1e-11).weights
            lip = sum(max(np.linalg.norm(J[:, m]), np.linalg.norm(Jp[:, m]))
                      for m in range(M)) / rho
            lhs = np.linalg.norm(lam - lam_p)
            rhs = safety * lip * np.linalg.norm(J - Jp)
            assert lhs <= rhs + 1e-9
