"""Passive output-feedback controllers built from a solved value function.

The passive controller is a model copy of the plant driven by the output
mismatch through the input map itself (observer gain = B), with the optimal
feedback folded into its drift; its output is the optimal-control estimate
with flipped sign convention, so coupling it to the plant through the
power-conserving interconnection (u = -y_hat, u_hat = y) closes the loop.
The EKF variant replaces the constant observer gain with a Kalman gain
driven by a differential Riccati equation along the estimate.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import ConfigurationError, CovarianceError
from .galerkin import ValueFunctionApprox
from .linalg import solve_linear, sym_eig
from .models import PlantModel, finite_difference_jacobian

__all__ = [
    "PassiveController",
    "EkfController",
    "ClosedLoop",
    "passive_rhs",
    "ekf_rhs",
    "optimal_feedback",
    "closed_loop_rhs",
]

#: Covariance inputs whose minimum eigenvalue falls below this are rejected.
PSD_TOLERANCE = -1e-8


def optimal_feedback(value, plant: PlantModel, z) -> np.ndarray:
    """Feedback u(z) = -B(z)^T grad V(z) for an energy-like ``value``.

    ``value`` may be a :class:`ValueFunctionApprox` or anything exposing
    ``gradient``.
    """
    z = np.asarray(z, dtype=float)
    B = np.atleast_2d(np.asarray(plant.B(z), dtype=float)).reshape(plant.n, plant.m)
    return -(B.T @ value.gradient(z))


@dataclass(frozen=True)
class PassiveController:
    """Observer-based controller state-space with storage function ``value``.

    Dynamics: dz_hat/dt = f(z_hat) - B B^T eta_c(z_hat) + B (u_hat - h(z_hat))
    with eta_c = grad ``value`` and output y_hat = B(z_hat)^T eta_c(z_hat).
    ``z0`` is the shipped initial controller state (zeros).
    """

    plant: PlantModel
    value: ValueFunctionApprox
    z0: np.ndarray = None  # type: ignore[assignment]

    def __post_init__(self):
        if self.z0 is None:
            object.__setattr__(self, "z0", np.zeros(self.plant.n))
        else:
            object.__setattr__(self, "z0", np.asarray(self.z0, dtype=float))

    @property
    def state_dim(self) -> int:
        return self.plant.n

    def eta_c(self, z) -> np.ndarray:
        return self.value.gradient(np.asarray(z, dtype=float))

    def output(self, z) -> np.ndarray:
        """y_hat = B(z)^T eta_c(z)."""
        z = np.asarray(z, dtype=float)
        B = np.atleast_2d(np.asarray(self.plant.B(z), dtype=float)).reshape(
            self.plant.n, self.plant.m
        )
        return B.T @ self.eta_c(z)

    def drift(self, z) -> np.ndarray:
        """Autonomous part f_hat(z) = f(z) - B B^T eta_c(z) - B h(z)."""
        z = np.asarray(z, dtype=float)
        p = self.plant
        B = np.atleast_2d(np.asarray(p.B(z), dtype=float)).reshape(p.n, p.m)
        f = np.asarray(p.f(z), dtype=float)
        h = np.atleast_1d(np.asarray(p.h(z), dtype=float))
        return f - B @ (B.T @ self.eta_c(z)) - B @ h

    def observer_drift(self, z) -> np.ndarray:
        """f(z) - B B^T eta_c(z): the model copy before output injection."""
        z = np.asarray(z, dtype=float)
        p = self.plant
        B = np.atleast_2d(np.asarray(p.B(z), dtype=float)).reshape(p.n, p.m)
        f = np.asarray(p.f(z), dtype=float)
        return f - B @ (B.T @ self.eta_c(z))


def passive_rhs(controller: PassiveController, z_hat, u_hat):
    """(dz_hat/dt, y_hat) for the passive controller.

    The returned output is produced by the same code path as
    ``controller.output`` so the two are bit-identical.
    """
    z_hat = np.asarray(z_hat, dtype=float)
    u_hat = np.atleast_1d(np.asarray(u_hat, dtype=float))
    p = controller.plant
    B = np.atleast_2d(np.asarray(p.B(z_hat), dtype=float)).reshape(p.n, p.m)
    y_hat = controller.output(z_hat)
    h = np.atleast_1d(np.asarray(p.h(z_hat), dtype=float))
    zdot = np.asarray(p.f(z_hat), dtype=float) - B @ y_hat + B @ (u_hat - h)
    return zdot, y_hat


@dataclass(frozen=True)
class EkfController:
    """Kalman-gain variant: the output injection u_hat - h(z_bar) enters
    through K = Pi H^T Rv^{-1} with Pi following the filter Riccati flow.

    State is the pair (z_bar, Pi); shipped initial data z_bar0 = 0,
    Pi0 = I, with unit weights Qw = I_n, Rv = I_m.
    """

    plant: PlantModel
    value: ValueFunctionApprox
    Qw: np.ndarray = None  # type: ignore[assignment]
    Rv: np.ndarray = None  # type: ignore[assignment]
    z0: np.ndarray = None  # type: ignore[assignment]
    Pi0: np.ndarray = None  # type: ignore[assignment]

    def __post_init__(self):
        n, m = self.plant.n, self.plant.m
        object.__setattr__(
            self, "Qw", np.eye(n) if self.Qw is None else np.asarray(self.Qw, dtype=float)
        )
        object.__setattr__(
            self, "Rv", np.eye(m) if self.Rv is None else np.asarray(self.Rv, dtype=float)
        )
        object.__setattr__(
            self, "z0", np.zeros(n) if self.z0 is None else np.asarray(self.z0, dtype=float)
        )
        object.__setattr__(
            self, "Pi0", np.eye(n) if self.Pi0 is None else np.asarray(self.Pi0, dtype=float)
        )
        for name in ("Qw", "Pi0"):
            M = getattr(self, name)
            if M.shape != (n, n):
                raise ConfigurationError(f"{name} must be {n}x{n}, got {M.shape}")
        if self.Rv.shape != (m, m):
            raise ConfigurationError(f"Rv must be {m}x{m}, got {self.Rv.shape}")

    @property
    def state_dim(self) -> int:
        """Dimension of the stacked (z_bar, vec Pi) state."""
        n = self.plant.n
        return n + n * n

    def eta_c(self, z) -> np.ndarray:
        return self.value.gradient(np.asarray(z, dtype=float))

    def output(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        p = self.plant
        B = np.atleast_2d(np.asarray(p.B(z), dtype=float)).reshape(p.n, p.m)
        return B.T @ self.eta_c(z)

    def observer_drift(self, z) -> np.ndarray:
        """f(z) - B B^T eta_c(z): the model flow the filter linearizes."""
        z = np.asarray(z, dtype=float)
        p = self.plant
        B = np.atleast_2d(np.asarray(p.B(z), dtype=float)).reshape(p.n, p.m)
        return np.asarray(p.f(z), dtype=float) - B @ (B.T @ self.eta_c(z))

    def drift_jacobian(self, z) -> np.ndarray:
        """F(z) = D(f - B B^T eta_c)(z).

        For constant input maps this is Df(z) - B B^T Hess V(z); otherwise
        the full drift is differenced.
        """
        z = np.asarray(z, dtype=float)
        p = self.plant
        if p.b_constant:
            B = np.atleast_2d(np.asarray(p.B(z), dtype=float)).reshape(p.n, p.m)
            return np.asarray(p.Df(z), dtype=float) - B @ (B.T @ self.value.hessian(z))
        return finite_difference_jacobian(self.observer_drift, z)

    def pack(self, z_bar, Pi) -> np.ndarray:
        return np.concatenate([np.asarray(z_bar, float).ravel(), np.asarray(Pi, float).ravel()])

    def unpack(self, x):
        n = self.plant.n
        x = np.asarray(x, dtype=float)
        return x[:n], x[n:].reshape(n, n)


def ekf_rhs(controller: EkfController, state, u_bar):
    """((dz_bar/dt, dPi/dt), y_bar) for the EKF controller.

    ``state`` is the pair (z_bar, Pi).  A covariance whose symmetric part
    has an eigenvalue below the PSD tolerance is rejected.
    """
    z_bar, Pi = state
    z_bar = np.asarray(z_bar, dtype=float)
    Pi = np.asarray(Pi, dtype=float)
    u_bar = np.atleast_1d(np.asarray(u_bar, dtype=float))
    p = controller.plant

    Pi_sym = 0.5 * (Pi + Pi.T)
    w = sym_eig(Pi_sym)[0]
    if w[0] < PSD_TOLERANCE:
        raise CovarianceError(
            f"covariance has eigenvalue {w[0]:.3e} below tolerance {PSD_TOLERANCE:.0e}"
        )

    H = np.atleast_2d(np.asarray(p.Dh(z_bar), dtype=float)).reshape(p.m, p.n)
    # K = Pi H^T Rv^{-1}, formed by solving Rv K^T = H Pi^T.
    K = solve_linear(controller.Rv, H @ Pi_sym.T).T
    h = np.atleast_1d(np.asarray(p.h(z_bar), dtype=float))
    z_dot = controller.observer_drift(z_bar) + K @ (u_bar - h)

    F = controller.drift_jacobian(z_bar)
    Pi_dot = F @ Pi_sym + Pi_sym @ F.T - K @ (H @ Pi_sym) + controller.Qw
    Pi_dot = 0.5 * (Pi_dot + Pi_dot.T)
    y_bar = controller.output(z_bar)
    return (z_dot, Pi_dot), y_bar


@dataclass(frozen=True)
class ClosedLoop:
    """Plant coupled to a controller through u = -y_hat, u_hat = y.

    The stacked state is [z; controller state]; for the EKF controller the
    covariance rides along as extra state entries.  The interconnection is
    assembled so the port products cancel identically:
    y^T u + y_hat^T u_hat = 0.
    """

    plant: PlantModel
    controller: object  # PassiveController | EkfController

    @property
    def state_dim(self) -> int:
        return self.plant.n + self.controller.state_dim

    def initial_state(self, z0) -> np.ndarray:
        z0 = np.asarray(z0, dtype=float)
        c = self.controller
        if isinstance(c, EkfController):
            return np.concatenate([z0, c.pack(c.z0, c.Pi0)])
        return np.concatenate([z0, c.z0])

    def split(self, x):
        """(plant state, controller state-vector view)."""
        x = np.asarray(x, dtype=float)
        return x[: self.plant.n], x[self.plant.n :]

    def ports(self, x):
        """(u, y, u_hat, y_hat) at the stacked state, with u = -y_hat and
        u_hat = y by construction (shared arrays, negated once)."""
        z, xc = self.split(x)
        c = self.controller
        if isinstance(c, EkfController):
            z_ctrl = c.unpack(xc)[0]
        else:
            z_ctrl = xc
        y = self.plant.output(z)
        y_hat = c.output(z_ctrl)
        return -y_hat, y, y, y_hat

    def plant_trajectory_state(self, x) -> np.ndarray:
        return self.split(x)[0]


def closed_loop_rhs(loop: ClosedLoop, x, t: float = 0.0) -> np.ndarray:
    """Stacked derivative of the power-conserving interconnection."""
    z, xc = loop.split(x)
    c = loop.controller
    y = loop.plant.output(z)
    if isinstance(c, EkfController):
        z_bar, Pi = c.unpack(xc)
        (z_bar_dot, Pi_dot), y_hat = ekf_rhs(c, (z_bar, Pi), y)
        z_dot = loop.plant.dynamics(z, -y_hat)
        return np.concatenate([z_dot, z_bar_dot.ravel(), Pi_dot.ravel()])
    z_hat_dot, y_hat = passive_rhs(c, xc, y)
    z_dot = loop.plant.dynamics(z, -y_hat)
    return np.concatenate([z_dot, z_hat_dot])
