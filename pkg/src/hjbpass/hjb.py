"""Galerkin policy iteration for the stationary HJB equation.

Approximates the value function of the infinite-horizon problem with state
cost ``|h|^2/2`` and input cost ``|u|^2/2`` on a rectangle: policy
evaluation projects the linear PDE onto a tensor Legendre basis (the
pure-constant mode is excluded and the value is pinned to 0 at the
origin), policy improvement substitutes ``u = -B' grad V``.  The initial
policy comes from the Riccati solution of the linearization.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import (
    ConfigurationError,
    NonConvergenceError,
    SingularGalerkinSystemError,
    SingularMatrixError,
)
from .galerkin import LegendreBasis, QuadratureRule, Rectangle, ValueFunctionApprox, gauss_rule
from .linalg import CareSolution, lu_factor, solve_care
from .models import PlantModel

logger = logging.getLogger("hjbpass.hjb")


@dataclass(frozen=True)
class PolicyIterConfig:
    """Discretization and stopping parameters for :func:`policy_iteration`."""

    degree: int
    domain: Rectangle
    tol_abs: float = 1e-14
    tol_rel: float = 1e-10
    max_iters: int = 30
    test_grid_per_axis: int = 100
    quad_points_per_axis: Optional[int] = None

    def __post_init__(self):
        if self.degree < 1:
            raise ConfigurationError(f"degree must be >= 1, got {self.degree}")
        if self.max_iters < 1:
            raise ConfigurationError(f"max_iters must be >= 1, got {self.max_iters}")
        if self.test_grid_per_axis < 2:
            raise ConfigurationError(f"test grid needs >= 2 points per axis, got {self.test_grid_per_axis}")
        if self.tol_abs <= 0.0 or self.tol_rel <= 0.0:
            raise ConfigurationError("stopping tolerances must be positive")
        q = self.quad_points_per_axis
        if q is not None and q < 1:
            raise ConfigurationError(f"quadrature points per axis must be >= 1, got {q}")

    @property
    def quad_points(self) -> int:
        """Quadrature nodes per axis; default twice (degree + 1) for safe over-integration."""
        return self.quad_points_per_axis or 2 * (self.degree + 1)


@dataclass
class PolicyIterReport:
    """Result of a policy-iteration run with per-iteration diagnostics."""

    value: ValueFunctionApprox
    care: CareSolution
    iterations: int
    converged: bool
    delta_abs_history: list
    delta_rel_history: list
    hjb_residual_history: list
    final_hjb_residual: float
    wall_time: float


def test_grid(domain: Rectangle, per_axis: int) -> np.ndarray:
    """Equispaced tensor grid (endpoints included), flattened to (per_axis^2, 2)."""
    xs = np.linspace(domain.x_lo, domain.x_hi, per_axis)
    ys = np.linspace(domain.y_lo, domain.y_hi, per_axis)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    return np.column_stack([X.ravel(), Y.ravel()])


def stopping_metrics(u_new: np.ndarray, u_old: np.ndarray):
    """(delta_abs, delta_rel) between two policies sampled on the same grid.

    ``delta_abs`` is the max pointwise euclidean distance; ``delta_rel``
    normalizes by the max pointwise norm of the old policy (inf when the
    old policy is identically zero).
    """
    u_new = np.atleast_2d(np.asarray(u_new, dtype=float))
    u_old = np.atleast_2d(np.asarray(u_old, dtype=float))
    if u_new.shape != u_old.shape:
        raise ConfigurationError(f"policy samples differ in shape: {u_new.shape} vs {u_old.shape}")
    delta_abs = float(np.max(np.sqrt(np.sum((u_new - u_old) ** 2, axis=1))))
    denom = float(np.max(np.sqrt(np.sum(u_old**2, axis=1))))
    delta_rel = delta_abs / denom if denom > 0.0 else float("inf")
    return delta_abs, delta_rel


class PlantGridCache:
    """Plant fields sampled once on a fixed grid (f, B, h stacked as arrays)."""

    def __init__(self, plant: PlantModel, zs: np.ndarray):
        self.zs = np.asarray(zs, dtype=float)
        self.f = np.array([plant.f(z) for z in self.zs])
        self.B = np.array([np.atleast_2d(plant.B(z)).reshape(plant.n, plant.m) for z in self.zs])
        self.h = np.array([np.atleast_1d(plant.h(z)) for z in self.zs])


def hjb_residual_values(plant: PlantModel, value, zs, cache: Optional[PlantGridCache] = None) -> np.ndarray:
    """Pointwise residual of the HJB equation for a candidate value function.

    residual = eta' f - |B' eta|^2 / 2 + |h|^2 / 2 with eta = grad value.
    """
    if cache is None:
        cache = PlantGridCache(plant, zs)
    g = value.gradients(cache.zs)
    gf = np.sum(g * cache.f, axis=1)
    btg = np.einsum("nij,ni->nj", cache.B, g)
    return gf - 0.5 * np.sum(btg**2, axis=1) + 0.5 * np.sum(cache.h**2, axis=1)


def optimal_feedback(plant: PlantModel, value) -> Callable:
    """Minimizing feedback of the HJB Hamiltonian: u(z) = -B(z)' grad V(z)."""

    def policy(z):
        z = np.asarray(z, dtype=float)
        B = np.atleast_2d(np.asarray(plant.B(z), dtype=float)).reshape(plant.n, plant.m)
        return -(B.T @ value.gradient(z))

    return policy


def assemble_system(plant: PlantModel, policy: Callable, basis: LegendreBasis, quad: QuadratureRule):
    """Galerkin system of policy evaluation for a fixed policy.

    Row (r,s), column (i,j):  sum_n w_n grad psi_ij(z_n)' (f + B u)(z_n) psi_rs(z_n)
    equals  -(1/2) sum_n w_n (|h|^2 + |u|^2)(z_n) psi_rs(z_n).
    The pure-constant mode is removed from both test and trial space, so the
    returned system is (d^2 - 1) square.
    """
    d = basis.degree
    nodes = quad.nodes
    w = quad.weights
    N = nodes.shape[0]
    fvals = np.empty((N, 2))
    cost = np.empty(N)
    for k, z in enumerate(nodes):
        u = np.atleast_1d(np.asarray(policy(z), dtype=float))
        B = np.atleast_2d(np.asarray(plant.B(z), dtype=float)).reshape(plant.n, plant.m)
        h = np.atleast_1d(np.asarray(plant.h(z), dtype=float))
        fvals[k] = np.asarray(plant.f(z), dtype=float) + B @ u
        cost[k] = float(h @ h + u @ u)
    Px, Dx, _ = basis.axis_tableau(nodes[:, 0], 0)
    Py, Dy, _ = basis.axis_tableau(nodes[:, 1], 1)
    D = d * d
    Psi = np.einsum("ni,nj->nij", Px, Py).reshape(N, D)
    Gx = np.einsum("ni,nj->nij", Dx, Py).reshape(N, D)
    Gy = np.einsum("ni,nj->nij", Px, Dy).reshape(N, D)
    advect = Gx * fvals[:, :1] + Gy * fvals[:, 1:2]
    M = Psi.T @ (w[:, None] * advect)
    rhs = -0.5 * (Psi.T @ (w * cost))
    return M[1:, 1:], rhs[1:]


def _vfa_from_solution(basis: LegendreBasis, alpha_flat: np.ndarray) -> ValueFunctionApprox:
    d = basis.degree
    alpha = np.zeros(d * d)
    alpha[1:] = alpha_flat
    alpha = alpha.reshape(d, d)
    raw = ValueFunctionApprox(basis, alpha, offset=0.0)
    return ValueFunctionApprox(basis, alpha, offset=-raw.value(np.zeros(2)))


def policy_iteration(plant: PlantModel, config: PolicyIterConfig) -> PolicyIterReport:
    """Run Galerkin policy iteration until the policy stops changing.

    Starts from the Riccati feedback of the linearization; each iteration
    solves the projected policy-evaluation system by LU and improves the
    policy.  Stops when the max policy change on the test grid satisfies
    ``delta_abs <= tol_abs`` or ``delta_rel <= tol_rel``; exhausting
    ``max_iters`` raises NonConvergenceError (history attached).
    """
    if plant.n != 2:
        raise ConfigurationError(f"Galerkin solver handles 2-state plants, got n={plant.n}")
    t0 = time.perf_counter()
    basis = LegendreBasis(degree=config.degree, domain=config.domain)
    quad = gauss_rule(config.quad_points, config.domain)
    A, B0, C = plant.linearize()
    care = solve_care(A, B0, C)
    grid = test_grid(config.domain, config.test_grid_per_axis)
    cache = PlantGridCache(plant, grid)

    BtP = B0.T @ care.P
    policy = lambda z: -(BtP @ np.asarray(z, dtype=float))  # noqa: E731
    u_prev = -np.einsum("ij,nj->ni", BtP, grid)

    delta_abs_hist: list[float] = []
    delta_rel_hist: list[float] = []
    residual_hist: list[float] = []
    value = None
    converged = False
    for it in range(1, config.max_iters + 1):
        M, rhs = assemble_system(plant, policy, basis, quad)
        try:
            alpha_flat = lu_factor(M).solve(rhs)
        except SingularMatrixError as exc:
            raise SingularGalerkinSystemError(
                f"policy-evaluation system singular at iteration {it}: {exc}"
            ) from exc
        value = _vfa_from_solution(basis, alpha_flat)
        g = value.gradients(grid)
        u_new = -np.einsum("nij,ni->nj", cache.B, g)
        delta_abs, delta_rel = stopping_metrics(u_new, u_prev)
        residual_rms = float(np.sqrt(np.mean(hjb_residual_values(plant, value, grid, cache) ** 2)))
        delta_abs_hist.append(delta_abs)
        delta_rel_hist.append(delta_rel)
        residual_hist.append(residual_rms)
        logger.info(
            "policy iteration %d: delta_abs=%.3e delta_rel=%.3e hjb_rms=%.3e",
            it,
            delta_abs,
            delta_rel,
            residual_rms,
        )
        policy = optimal_feedback(plant, value)
        u_prev = u_new
        if delta_abs <= config.tol_abs or delta_rel <= config.tol_rel:
            converged = True
            break
    if not converged:
        raise NonConvergenceError(
            f"policy iteration did not converge in {config.max_iters} iterations "
            f"(last delta_abs={delta_abs_hist[-1]:.3e}, delta_rel={delta_rel_hist[-1]:.3e})",
            history={
                "delta_abs": delta_abs_hist,
                "delta_rel": delta_rel_hist,
                "hjb_residual": residual_hist,
            },
        )
    return PolicyIterReport(
        value=value,
        care=care,
        iterations=len(delta_abs_hist),
        converged=True,
        delta_abs_history=delta_abs_hist,
        delta_rel_history=delta_rel_hist,
        hjb_residual_history=residual_hist,
        final_hjb_residual=residual_hist[-1],
        wall_time=time.perf_counter() - t0,
    )
