"""Observer-based controllers and their power-conserving interconnection."""

import numpy as np
import pytest

from hjbpass.controllers import (
    ClosedLoop,
    EkfController,
    PassiveController,
    closed_loop_rhs,
    ekf_rhs,
    optimal_feedback,
    passive_rhs,
)
from hjbpass.errors import ConfigurationError, CovarianceError
from hjbpass.hjb import hjb_residual_values
from hjbpass.integrators import MidpointSystem, TimeGrid, simulate
from hjbpass.linalg import solve_care, sym_eig
from hjbpass.models import PlantModel, lti_indefinite_example, pendulum_plant


class QuadraticValue:
    """Exact quadratic stand-in V(z) = z^T P z / 2 for controller formulas."""

    def __init__(self, P):
        self.P = np.asarray(P, dtype=float)

    def value(self, z):
        return 0.5 * float(z @ (self.P @ z))

    def gradient(self, z):
        return self.P @ np.asarray(z, dtype=float)

    def hessian(self, z):
        return self.P.copy()


@pytest.fixture(scope="module")
def lti_setup():
    lti = lti_indefinite_example()
    plant = lti.as_plant()
    care = solve_care(lti.A, lti.Bc, lti.Bc.T @ lti.Q)
    return lti, plant, QuadraticValue(care.P)


class TestOptimalFeedback:
    def test_zero_gradient_gives_zero_input(self, lti_setup):
        _, plant, value = lti_setup
        u = optimal_feedback(value, plant, np.zeros(2))
        assert u.shape == (1,)
        assert abs(u[0]) == 0.0

    def test_linear_plant_gain(self, lti_setup):
        lti, plant, value = lti_setup
        rng = np.random.default_rng(11)
        for z in rng.uniform(-2.0, 2.0, size=(20, 2)):
            expected = -(lti.Bc.T @ (value.P @ z))
            np.testing.assert_allclose(
                optimal_feedback(value, plant, z), expected, atol=1e-14
            )

    def test_pendulum_reads_velocity_gradient(self, pendulum_solved):
        preset, report = pendulum_solved
        z = np.array([0.3, -0.7])
        u = optimal_feedback(report.value, preset.plant, z)
        assert u == pytest.approx(-report.value.gradient(z)[1], abs=0.0)


class TestPassiveController:
    def test_origin_is_equilibrium(self, pendulum_solved):
        preset, report = pendulum_solved
        controller = PassiveController(preset.plant, report.value)
        assert controller.state_dim == 2
        np.testing.assert_array_equal(controller.z0, np.zeros(2))
        zdot, y_hat = passive_rhs(controller, np.zeros(2), np.zeros(1))
        assert np.max(np.abs(zdot)) <= 1e-12
        assert np.max(np.abs(y_hat)) <= 1e-12

    def test_matched_input_reduces_to_observer_drift(self, pendulum_solved):
        preset, report = pendulum_solved
        controller = PassiveController(preset.plant, report.value)
        rng = np.random.default_rng(21)
        for z in rng.uniform(-1.5, 1.5, size=(20, 2)):
            h = np.atleast_1d(preset.plant.h(z))
            zdot, _ = passive_rhs(controller, z, h)
            np.testing.assert_allclose(
                zdot, controller.observer_drift(z), atol=1e-14
            )

    def test_linear_plant_state_space(self, lti_setup):
        # With V = z^T P z / 2 the controller is the linear system
        # dz/dt = (A - B B^T P - B C) z + B u, y = B^T P z.
        lti, plant, value = lti_setup
        controller = PassiveController(plant, value)
        A, B, C = lti.A, lti.Bc, lti.Bc.T @ lti.Q
        Ac = A - B @ (B.T @ value.P) - B @ C
        rng = np.random.default_rng(31)
        for _ in range(20):
            z = rng.uniform(-2.0, 2.0, size=2)
            u = rng.uniform(-1.0, 1.0, size=1)
            zdot, y_hat = passive_rhs(controller, z, u)
            np.testing.assert_allclose(zdot, Ac @ z + (B @ u).ravel(), atol=1e-13)
            np.testing.assert_allclose(y_hat, B.T @ (value.P @ z), atol=1e-13)

    def test_dissipation_identity(self, pendulum_solved):
        # Along the autonomous controller drift the storage decays at the
        # collocated rate: eta_c^T f_hat = r(z) - |B^T eta_c + h|^2 / 2
        # where r is the pointwise defect of the converged solve.
        preset, report = pendulum_solved
        controller = PassiveController(preset.plant, report.value)
        rng = np.random.default_rng(41)
        zs = rng.uniform(-1.8, 1.8, size=(200, 2))
        res = hjb_residual_values(preset.plant, report.value, zs)
        for z, r in zip(zs, res):
            eta = controller.eta_c(z)
            h = np.atleast_1d(preset.plant.h(z))
            ell_sq = 0.5 * float(np.sum((controller.output(z) + h) ** 2))
            lhs = float(eta @ controller.drift(z)) + ell_sq
            assert abs(lhs) <= 10.0 * abs(r) + 1e-12


class TestEkfController:
    def test_state_dim_and_defaults(self, lti_setup):
        _, plant, value = lti_setup
        controller = EkfController(plant, value)
        assert controller.state_dim == 6
        np.testing.assert_array_equal(controller.Qw, np.eye(2))
        np.testing.assert_array_equal(controller.Rv, np.eye(1))
        np.testing.assert_array_equal(controller.Pi0, np.eye(2))
        z_bar, Pi = controller.unpack(controller.pack([1.0, 2.0], np.eye(2)))
        np.testing.assert_array_equal(z_bar, [1.0, 2.0])
        np.testing.assert_array_equal(Pi, np.eye(2))

    def test_weight_shape_validation(self, lti_setup):
        _, plant, value = lti_setup
        with pytest.raises(ConfigurationError):
            EkfController(plant, value, Qw=np.eye(3))
        with pytest.raises(ConfigurationError):
            EkfController(plant, value, Rv=np.eye(2))

    def test_covariance_flow_at_identity(self, lti_setup):
        # At Pi = I with unit weights the Riccati flow reads
        # F + F^T - H^T H + I for the constant closed-loop Jacobian F.
        lti, plant, value = lti_setup
        controller = EkfController(plant, value)
        B, C = lti.Bc, lti.Bc.T @ lti.Q
        F = lti.A - B @ (B.T @ value.P)
        z = np.array([0.4, -1.1])
        (z_dot, Pi_dot), y_bar = ekf_rhs(controller, (z, np.eye(2)), np.zeros(1))
        expected = F + F.T - C.T @ C + np.eye(2)
        np.testing.assert_allclose(Pi_dot, expected, atol=1e-12)
        np.testing.assert_allclose(y_bar, B.T @ (value.P @ z), atol=1e-13)
        K = C.T  # Pi H^T Rv^{-1} at Pi = I
        expected_zdot = F @ z + (K @ (np.zeros(1) - C @ z)).ravel()
        np.testing.assert_allclose(z_dot, expected_zdot, atol=1e-12)

    def test_zero_output_map_gives_lyapunov_flow(self):
        A = np.array([[-1.0, 0.5], [0.0, -2.0]])
        plant = PlantModel(
            name="silent", n=2, m=1,
            f=lambda z: A @ z,
            B=lambda z: np.array([[0.0], [1.0]]),
            h=lambda z: np.zeros(1),
            Df=lambda z: A.copy(),
            Dh=lambda z: np.zeros((1, 2)),
            b_constant=True,
        )
        value = QuadraticValue(np.eye(2))
        controller = EkfController(plant, value)
        Pi = np.diag([1.0, 2.0])
        F = A - np.array([[0.0], [1.0]]) @ np.array([[0.0, 1.0]])
        (_, Pi_dot), _ = ekf_rhs(controller, (np.zeros(2), Pi), np.zeros(1))
        np.testing.assert_allclose(Pi_dot, F @ Pi + Pi @ F.T + np.eye(2), atol=1e-13)

    def test_matched_input_follows_observer_drift(self, pendulum_solved):
        preset, report = pendulum_solved
        controller = EkfController(preset.plant, report.value)
        z = np.array([0.5, -0.3])
        h = np.atleast_1d(preset.plant.h(z))
        (z_dot, _), _ = ekf_rhs(controller, (z, np.eye(2)), h)
        np.testing.assert_allclose(z_dot, controller.observer_drift(z), atol=1e-14)

    def test_indefinite_covariance_rejected(self, lti_setup):
        _, plant, value = lti_setup
        controller = EkfController(plant, value)
        with pytest.raises(CovarianceError):
            ekf_rhs(controller, (np.zeros(2), -np.eye(2)), np.zeros(1))


class TestClosedLoop:
    def test_state_stacking(self, pendulum_solved):
        preset, report = pendulum_solved
        passive = ClosedLoop(preset.plant, PassiveController(preset.plant, report.value))
        assert passive.state_dim == 4
        x = passive.initial_state([1.0, -1.0])
        np.testing.assert_array_equal(x, [1.0, -1.0, 0.0, 0.0])
        z, xc = passive.split(x)
        np.testing.assert_array_equal(z, [1.0, -1.0])
        np.testing.assert_array_equal(xc, [0.0, 0.0])
        np.testing.assert_array_equal(passive.plant_trajectory_state(x), z)

        ekf = ClosedLoop(preset.plant, EkfController(preset.plant, report.value))
        assert ekf.state_dim == 8
        x = ekf.initial_state([1.0, -1.0])
        np.testing.assert_array_equal(x[:4], [1.0, -1.0, 0.0, 0.0])
        np.testing.assert_array_equal(x[4:].reshape(2, 2), np.eye(2))

    def test_ports_cancel_exactly(self, pendulum_solved):
        preset, report = pendulum_solved
        loop = ClosedLoop(preset.plant, PassiveController(preset.plant, report.value))
        rng = np.random.default_rng(51)
        for x in rng.uniform(-1.5, 1.5, size=(50, 4)):
            u, y, u_hat, y_hat = loop.ports(x)
            assert float(y @ u) + float(y_hat @ u_hat) == 0.0
            np.testing.assert_array_equal(u, -y_hat)
            np.testing.assert_array_equal(u_hat, y)

    def test_linear_closed_loop_matrix(self, lti_setup):
        lti, plant, value = lti_setup
        loop = ClosedLoop(plant, PassiveController(plant, value))
        A, B, C = lti.A, lti.Bc, lti.Bc.T @ lti.Q
        BBtP = B @ (B.T @ value.P)
        expected = np.block([[A, -BBtP], [B @ C, A - BBtP - B @ C]])
        actual = np.column_stack(
            [closed_loop_rhs(loop, e) for e in np.eye(4)]
        )
        np.testing.assert_allclose(actual, expected, atol=1e-12)

    def test_pendulum_rhs_hand_assembly(self, pendulum_solved):
        preset, report = pendulum_solved
        controller = PassiveController(preset.plant, report.value)
        loop = ClosedLoop(preset.plant, controller)
        x = np.array([0.7, -0.2, 0.1, 0.4])
        z, z_hat = x[:2], x[2:]
        y = np.atleast_1d(preset.plant.h(z))
        y_hat = controller.output(z_hat)
        expected_plant = preset.plant.dynamics(z, -y_hat)
        expected_ctrl, _ = passive_rhs(controller, z_hat, y)
        np.testing.assert_allclose(
            closed_loop_rhs(loop, x),
            np.concatenate([expected_plant, expected_ctrl]),
            atol=1e-14,
        )

    def test_ekf_covariance_stays_symmetric_psd(self, pendulum_solved):
        preset, report = pendulum_solved
        controller = EkfController(preset.plant, report.value)
        loop = ClosedLoop(preset.plant, controller)
        system = MidpointSystem(rhs=lambda t, x, u: closed_loop_rhs(loop, x, t), n=8)
        grid = TimeGrid.uniform(2.0, 100)
        traj = simulate(system, grid, loop.initial_state(preset.z0))
        for x in traj.states:
            _, Pi = controller.unpack(x[2:])
            assert np.max(np.abs(Pi - Pi.T)) <= 1e-10
            assert sym_eig(0.5 * (Pi + Pi.T))[0][0] >= -1e-8
