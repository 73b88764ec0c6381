"""Galerkin policy iteration: assembly, stopping metrics, solver runs."""

import math

import numpy as np
import pytest

from hjbpass.errors import (
    ConfigurationError,
    NonConvergenceError,
    SingularMatrixError,
)
from hjbpass.galerkin import LegendreBasis, Rectangle, gauss_rule
from hjbpass.hjb import (
    PolicyIterConfig,
    assemble_system,
    hjb_residual_values,
    optimal_feedback,
    policy_iteration,
    stopping_metrics,
)
from hjbpass.hjb import test_grid as make_grid
from hjbpass.linalg import lu_factor, solve_care
from hjbpass.models import LtiPhPlant, PlantModel, pendulum_plant


def random_ph_plant(seed: int) -> LtiPhPlant:
    rng = np.random.default_rng(seed)
    a = rng.uniform(0.5, 2.0)
    M = rng.standard_normal((2, 2))
    R = M.T @ M + 0.1 * np.eye(2)
    Q = np.diag(rng.uniform(0.5, 2.0, size=2))
    Bc = rng.standard_normal((2, 1))
    return LtiPhPlant(J=np.array([[0.0, a], [-a, 0.0]]), R=R, Q=Q, Bc=Bc)


class TestTestGrid:
    def test_shape_and_extremes(self):
        domain = Rectangle(-1.0, 2.0, 0.0, 1.0)
        grid = make_grid(domain, 100)
        assert grid.shape == (10000, 2)
        assert grid[:, 0].min() == -1.0 and grid[:, 0].max() == 2.0
        assert grid[:, 1].min() == 0.0 and grid[:, 1].max() == 1.0

    def test_equispaced(self):
        grid = make_grid(Rectangle.square(1.0), 5)
        xs = np.unique(grid[:, 0])
        np.testing.assert_allclose(np.diff(xs), 0.5, atol=1e-15)


class TestStoppingMetrics:
    def test_identical_policies(self):
        u = np.ones((10, 1))
        assert stopping_metrics(u, u) == (0.0, 0.0)

    def test_constant_policies(self):
        u_old = np.full((7, 1), 1.0)
        u_new = np.full((7, 1), 1.5)
        assert stopping_metrics(u_new, u_old) == pytest.approx((0.5, 0.5))

    def test_linear_policies_on_two_point_grid(self):
        grid = np.array([[1.0, 0.0], [2.0, 0.0]])
        u_old = grid[:, :1]
        u_new = 2.0 * grid[:, :1]
        assert stopping_metrics(u_new, u_old) == pytest.approx((2.0, 1.0))

    def test_zero_old_policy_gives_infinite_relative_change(self):
        delta_abs, delta_rel = stopping_metrics(np.ones((5, 1)), np.zeros((5, 1)))
        assert delta_abs == 1.0
        assert math.isinf(delta_rel)

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ConfigurationError):
            stopping_metrics(np.ones((5, 1)), np.ones((4, 1)))


class TestPolicyIterConfig:
    def test_validation(self):
        domain = Rectangle.square(1.0)
        with pytest.raises(ConfigurationError):
            PolicyIterConfig(degree=0, domain=domain)
        with pytest.raises(ConfigurationError):
            PolicyIterConfig(degree=3, domain=domain, max_iters=0)
        with pytest.raises(ConfigurationError):
            PolicyIterConfig(degree=3, domain=domain, tol_abs=0.0)
        with pytest.raises(ConfigurationError):
            PolicyIterConfig(degree=3, domain=domain, test_grid_per_axis=1)

    def test_default_quadrature_over_integrates(self):
        config = PolicyIterConfig(degree=10, domain=Rectangle.square(1.0))
        assert config.quad_points == 22


class TestAssembly:
    def test_zero_plant_yields_singular_system(self):
        plant = PlantModel(
            name="null",
            n=2,
            m=1,
            f=lambda z: np.zeros(2),
            B=lambda z: np.array([[0.0], [0.0]]),
            h=lambda z: np.zeros(1),
        )
        basis = LegendreBasis(degree=3, domain=Rectangle.square(1.0))
        quad = gauss_rule(8, Rectangle.square(1.0))
        M, rhs = assemble_system(plant, lambda z: np.zeros(1), basis, quad)
        assert np.max(np.abs(M)) == 0.0
        assert np.max(np.abs(rhs)) == 0.0
        with pytest.raises(SingularMatrixError):
            lu_factor(M)

    def test_odd_field_decouples_opposite_parity_modes(self):
        # The pendulum field is odd and the initial feedback is linear, so
        # entries pairing basis modes of opposite parity integrate to zero
        # on the symmetric box.
        plant = pendulum_plant()
        A, B0, C = plant.linearize()
        care = solve_care(A, B0, C)
        BtP = B0.T @ care.P
        basis = LegendreBasis(degree=5, domain=Rectangle.square(2.0))
        quad = gauss_rule(12, Rectangle.square(2.0))
        M, _ = assemble_system(plant, lambda z: -(BtP @ z), basis, quad)
        parity = np.array([(i + j) % 2 for i in range(5) for j in range(5)])[1:]
        mask = parity[:, None] != parity[None, :]
        scale = np.max(np.abs(M))
        assert np.max(np.abs(M[mask])) <= 1e-12 * scale
        assert np.max(np.abs(M[~mask])) > 1e-3 * scale

    def test_three_state_plant_rejected(self):
        plant = PlantModel(
            name="3d", n=3, m=1,
            f=lambda z: -z, B=lambda z: np.array([[0.0], [0.0], [1.0]]), h=lambda z: z[:1],
        )
        config = PolicyIterConfig(degree=3, domain=Rectangle.square(1.0))
        with pytest.raises(ConfigurationError):
            policy_iteration(plant, config)


class TestPolicyIteration:
    def test_pendulum_preset_run(self, pendulum_solved):
        _, report = pendulum_solved
        assert report.converged
        assert report.iterations < 10
        assert len(report.delta_abs_history) == report.iterations
        assert len(report.delta_rel_history) == report.iterations
        assert len(report.hjb_residual_history) == report.iterations
        last_abs = report.delta_abs_history[-1]
        last_rel = report.delta_rel_history[-1]
        assert last_abs <= 1e-14 or last_rel <= 1e-10
        assert report.final_hjb_residual == report.hjb_residual_history[-1]
        assert report.final_hjb_residual < report.hjb_residual_history[0]

    def test_vdp_preset_run(self, vdp_solved):
        _, report = vdp_solved
        assert report.converged
        assert report.iterations < 10
        assert report.final_hjb_residual < report.hjb_residual_history[0]

    def test_pendulum_matches_closed_form_solution(self, pendulum_solved):
        # Independent oracle: with collocated velocity damping the solution
        # is kappa * (g (1 - cos z1) + z2^2 / 2) where kappa solves
        # kappa^2 + 2 lambda kappa - 1 = 0, from matching the quadratic
        # terms pointwise.
        preset, report = pendulum_solved
        g, lam = 9.81, 0.2
        kappa = math.sqrt(lam * lam + 1.0) - lam
        grid = make_grid(preset.domain, 100)
        V_exact = kappa * (g * (1.0 - np.cos(grid[:, 0])) + 0.5 * grid[:, 1] ** 2)
        G_exact = np.column_stack([kappa * g * np.sin(grid[:, 0]), kappa * grid[:, 1]])
        V = report.value.values(grid)
        G = report.value.gradients(grid)
        value_err = np.max(np.abs(V - V_exact)) / np.max(np.abs(V_exact))
        grad_err = np.max(np.linalg.norm(G - G_exact, axis=1)) / np.max(
            np.linalg.norm(G_exact, axis=1)
        )
        assert value_err <= 1e-3
        assert grad_err <= 1e-2

    def test_pendulum_residual_regression(self, pendulum_solved):
        # Tracked baseline from the first verified build: max 8.59e-5.
        preset, report = pendulum_solved
        grid = make_grid(preset.domain, 100)
        res = hjb_residual_values(preset.plant, report.value, grid)
        assert np.max(np.abs(res)) <= 2e-4

    def test_policy_evaluation_consistency(self, pendulum_solved):
        # The converged coefficients must still solve the projected system
        # assembled from their own induced feedback.
        preset, report = pendulum_solved
        basis = report.value.basis
        quad = gauss_rule(2 * (basis.degree + 1), basis.domain)
        policy = optimal_feedback(preset.plant, report.value)
        M, rhs = assemble_system(preset.plant, policy, basis, quad)
        alpha_flat = report.value.alpha.ravel()[1:]
        residual = np.linalg.norm(M @ alpha_flat - rhs)
        assert residual <= 1e-10 * (1.0 + np.linalg.norm(rhs))

    def test_linear_plant_reproduces_riccati_value(self, lti_solved):
        preset, report = lti_solved
        grid = make_grid(preset.domain, 100)
        G = report.value.gradients(grid)
        G_exact = grid @ report.care.P.T
        rel = np.max(np.linalg.norm(G - G_exact, axis=1)) / np.max(
            np.linalg.norm(G_exact, axis=1)
        )
        assert rel <= 1e-6

    def test_random_linear_ph_plants_match_riccati(self):
        for seed in range(5):
            lti = random_ph_plant(seed)
            plant = lti.as_plant()
            config = PolicyIterConfig(degree=4, domain=Rectangle.square(2.0))
            report = policy_iteration(plant, config)
            care = solve_care(lti.A, lti.Bc, lti.Bc.T @ lti.Q)
            grid = make_grid(config.domain, 100)
            G = report.value.gradients(grid)
            G_exact = grid @ care.P.T
            rel = np.max(np.linalg.norm(G - G_exact, axis=1)) / np.max(
                np.linalg.norm(G_exact, axis=1)
            )
            assert rel <= 1e-6

    def test_exhausted_iterations_raise_with_history(self):
        plant = pendulum_plant()
        config = PolicyIterConfig(degree=10, domain=Rectangle.square(2.0), max_iters=1)
        with pytest.raises(NonConvergenceError) as excinfo:
            policy_iteration(plant, config)
        history = excinfo.value.history
        assert len(history["delta_abs"]) == 1
        assert len(history["hjb_residual"]) == 1

    def test_value_normalized_at_origin(self, pendulum_solved):
        _, report = pendulum_solved
        assert abs(report.value.value(np.zeros(2))) <= 1e-14


class TestFeedback:
    def test_closure_matches_direct_evaluation(self, pendulum_solved):
        preset, report = pendulum_solved
        policy = optimal_feedback(preset.plant, report.value)
        rng = np.random.default_rng(4)
        for z in rng.uniform(-2.0, 2.0, size=(20, 2)):
            expected = -np.atleast_2d(preset.plant.B(z)).reshape(2, 1).T @ report.value.gradient(z)
            np.testing.assert_allclose(policy(z), expected, atol=0.0)
