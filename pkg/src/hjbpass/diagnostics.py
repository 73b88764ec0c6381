"""Audits for solved controllers: residual maps, monotonicity, structure checks.

Everything here is a pure function over immutable inputs, producing either a
small report dataclass or an :class:`AuditReport`.  Pass/fail thresholds are
parameters, never constants baked in here: residual magnitudes depend on the
basis degree and the domain size, so the calling experiment owns its
tolerance.  Reports carry the raw per-sample residuals so they can be dumped
to CSV next to the verdict.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import ConfigurationError, HjbpassError
from .hjb import PlantGridCache, hjb_residual_values
from .linalg import solve_care, solve_linear, sym_eig
from .models import LtiPhPlant, PlantModel, lti_indefinite_example

__all__ = [
    "AuditReport",
    "LureCertificate",
    "DissipationRankReport",
    "CounterexampleReport",
    "PhRealizationReport",
    "hjb_residual_map",
    "controller_dissipation_map",
    "storage_monotonicity",
    "dissipation_residuals",
    "controller_certificate",
    "pendulum_certificate",
    "lti_ph_certificate",
    "check_dissipation_rank",
    "counterexample_check",
    "ph_realizability_lti",
    "quadratic_fit_residual",
]


@dataclass(frozen=True)
class AuditReport:
    """Residuals sampled over a grid, judged against a configured tolerance.

    ``residuals`` holds the per-sample audit quantity; the report passes
    exactly when ``max_abs <= tolerance``.  ``points`` carries one row per
    sample: state coordinates for field audits, step indices for
    trajectory audits.
    """

    name: str
    points: np.ndarray
    residuals: np.ndarray
    tolerance: float

    def __post_init__(self):
        points = np.atleast_2d(np.asarray(self.points, dtype=float))
        residuals = np.asarray(self.residuals, dtype=float).ravel()
        if points.shape[0] != residuals.shape[0]:
            raise ConfigurationError(
                f"audit '{self.name}': {points.shape[0]} sample points but "
                f"{residuals.shape[0]} residuals"
            )
        if residuals.size == 0:
            raise ConfigurationError(f"audit '{self.name}' has no samples")
        if not (float(self.tolerance) >= 0.0):
            raise ConfigurationError(
                f"audit tolerance must be nonnegative, got {self.tolerance}"
            )
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "residuals", residuals)
        object.__setattr__(self, "tolerance", float(self.tolerance))

    @property
    def max_abs(self) -> float:
        return float(np.max(np.abs(self.residuals)))

    @property
    def mean_abs(self) -> float:
        return float(np.mean(np.abs(self.residuals)))

    @property
    def rms(self) -> float:
        return float(np.sqrt(np.mean(self.residuals**2)))

    @property
    def passed(self) -> bool:
        return self.max_abs <= self.tolerance

    def summary(self) -> str:
        """Human-readable block for standard output."""
        lines = [
            f"audit: {self.name}",
            f"  samples    : {self.residuals.size}",
            f"  max |r|    : {self.max_abs:.6e}",
            f"  mean |r|   : {self.mean_abs:.6e}",
            f"  rms        : {self.rms:.6e}",
            f"  tolerance  : {self.tolerance:.6e}",
            f"  verdict    : {'PASS' if self.passed else 'FAIL'}",
        ]
        return "\n".join(lines)


def hjb_residual_map(
    value,
    plant: PlantModel,
    grid,
    tolerance: float = math.inf,
    name: str = "hjb-residual",
) -> AuditReport:
    """Pointwise residual of the stationary optimality equation on a grid.

    residual(z) = eta' f - |B' eta|^2 / 2 + |h|^2 / 2 with eta = grad V.
    Zero everywhere for the exact value function; for a Galerkin solution
    the magnitude measures basis truncation error.
    """
    grid = np.atleast_2d(np.asarray(grid, dtype=float))
    res = hjb_residual_values(plant, value, grid)
    return AuditReport(name=name, points=grid, residuals=res, tolerance=tolerance)


def controller_dissipation_map(
    value,
    plant: PlantModel,
    grid,
    tolerance: float = math.inf,
) -> AuditReport:
    """Dissipation residual of the observer controller: eta' f_hat + |ell_hat|^2.

    Here ``f_hat = f - B B' eta - B h`` is the unforced controller drift and
    ``ell_hat = (h + B' eta) / sqrt(2)`` its damping certificate.  Expanding
    the squares shows the residual equals :func:`hjb_residual_map` pointwise
    for *any* differentiable V, so the two maps agreeing to rounding is an
    implementation check, while their shared magnitude measures V quality.
    """
    grid = np.atleast_2d(np.asarray(grid, dtype=float))
    cache = PlantGridCache(plant, grid)
    g = value.gradients(grid)
    bt_eta = np.einsum("nij,ni->nj", cache.B, g)
    f_hat = cache.f - np.einsum("nij,nj->ni", cache.B, bt_eta + cache.h)
    ell_sq = 0.5 * np.sum((cache.h + bt_eta) ** 2, axis=1)
    res = np.sum(g * f_hat, axis=1) + ell_sq
    return AuditReport(
        name="controller-dissipation", points=grid, residuals=res, tolerance=tolerance
    )


def storage_monotonicity(traj, tolerance: float) -> AuditReport:
    """Per-step storage increases of an unforced run, judged against ``tolerance``.

    Passes exactly when ``H(z_{i+1}) - H(z_i) <= tolerance`` for every step;
    the residual column stores the positive part of each increment, so
    decreases never mask an increase elsewhere.  Requires finite storage
    samples and an identically-zero input column.
    """
    H = np.asarray(traj.storage, dtype=float)
    if H.ndim != 1 or H.size < 2:
        raise ConfigurationError("monotonicity audit needs a storage series with >= 2 samples")
    if not np.all(np.isfinite(H)):
        raise ConfigurationError("monotonicity audit requires finite storage samples")
    inputs = np.asarray(traj.inputs, dtype=float)
    if inputs.size and float(np.max(np.abs(inputs))) != 0.0:
        raise ConfigurationError("monotonicity audit expects an unforced run (inputs all zero)")
    increases = np.maximum(np.diff(H), 0.0)
    steps = np.arange(1, H.size, dtype=float).reshape(-1, 1)
    return AuditReport(
        name="storage-monotonicity", points=steps, residuals=increases, tolerance=tolerance
    )


@dataclass(frozen=True)
class LureCertificate:
    """Damping certificate ``ell`` with ``eta' f = -|ell|^2`` along the flow.

    ``ell`` maps a state to a length-``p`` vector; a valid certificate makes
    :func:`dissipation_residuals` vanish identically, exhibiting the energy
    decay rate of the unforced system as an explicit square.
    """

    ell: Callable
    p: int

    def __post_init__(self):
        if self.p < 1:
            raise ConfigurationError(f"certificate output dimension must be >= 1, got {self.p}")


def dissipation_residuals(eta: Callable, f: Callable, ell: Callable, zs) -> np.ndarray:
    """``eta(z)' f(z) + |ell(z)|^2`` per sample row; zero for a valid certificate."""
    zs = np.atleast_2d(np.asarray(zs, dtype=float))
    out = np.empty(zs.shape[0])
    for i, z in enumerate(zs):
        e = np.asarray(eta(z), dtype=float)
        fz = np.asarray(f(z), dtype=float)
        lz = np.atleast_1d(np.asarray(ell(z), dtype=float))
        out[i] = float(e @ fz) + float(lz @ lz)
    return out


def controller_certificate(value, plant: PlantModel) -> LureCertificate:
    """Certificate ``ell(z) = (h(z) + B(z)' grad V(z)) / sqrt(2)`` of the controller drift."""

    def ell(z):
        z = np.asarray(z, dtype=float)
        B = np.atleast_2d(np.asarray(plant.B(z), dtype=float)).reshape(plant.n, plant.m)
        h = np.atleast_1d(np.asarray(plant.h(z), dtype=float))
        return (h + B.T @ value.gradient(z)) / math.sqrt(2.0)

    return LureCertificate(ell=ell, p=plant.m)


def pendulum_certificate(damping: float = 0.2) -> LureCertificate:
    """Exact certificate of the damped pendulum: ``ell(z) = sqrt(damping) * z_2``."""
    if damping < 0.0:
        raise ConfigurationError(f"damping must be nonnegative, got {damping}")
    root = math.sqrt(damping)
    return LureCertificate(ell=lambda z: np.array([root * float(z[1])]), p=1)


def lti_ph_certificate(plant: LtiPhPlant) -> LureCertificate:
    """Exact certificate of an LTI port-Hamiltonian plant: ``ell(z) = R^{1/2} Q z``."""
    w, V = sym_eig(plant.R)
    if w[0] < -1e-12:
        raise ConfigurationError(
            f"dissipation matrix must be positive semidefinite, min eigenvalue {w[0]:.3e}"
        )
    root = V @ np.diag(np.sqrt(np.maximum(w, 0.0))) @ V.T
    Q = plant.Q
    return LureCertificate(ell=lambda z: root @ (Q @ np.asarray(z, dtype=float)), p=plant.n)


@dataclass(frozen=True)
class DissipationRankReport:
    """Definiteness of R + Bc Bc': damping and input jointly span the state space."""

    satisfied: bool
    eigenvalues: np.ndarray


def check_dissipation_rank(plant: LtiPhPlant) -> DissipationRankReport:
    """Check ``R + Bc Bc' > 0`` (equivalently ``rank [R  Bc] = n``).

    When it holds, closing the loop injects damping in every direction, which
    upgrades Lyapunov stability of the controlled equilibrium to asymptotic
    stability.  Returns the eigenvalues (ascending) alongside the verdict.
    """
    S = plant.R + plant.Bc @ plant.Bc.T
    w, _ = sym_eig(S)
    return DissipationRankReport(satisfied=bool(w[0] > 0.0), eigenvalues=w)


@dataclass(frozen=True)
class CounterexampleReport:
    """Sign pattern of the summed-storage Lyapunov test for the shipped witness."""

    P_c: np.ndarray
    S: np.ndarray
    eigenvalues: np.ndarray

    @property
    def lambda_neg(self) -> float:
        return float(self.eigenvalues[0])

    @property
    def lambda_pos(self) -> float:
        return float(self.eigenvalues[-1])


def counterexample_check() -> CounterexampleReport:
    """Witness that the plain sum of plant and controller storage can fail.

    For the shipped rotational two-state plant, the Lyapunov test matrix
    ``S = A'(P_c + Q) + (P_c + Q) A`` of the summed candidate has one
    positive and one negative eigenvalue, so loop stability cannot be argued
    from that sum even though each storage works on its own.  Raises if the
    solved ``P_c`` ever loses this sign pattern, which would indicate a
    Riccati solver regression rather than a property of the model.
    """
    ph = lti_indefinite_example()
    plant = ph.as_plant()
    A, B, C = plant.linearize()
    care = solve_care(A, B, C)
    P_c = care.P
    S = A.T @ (P_c + ph.Q) + (P_c + ph.Q) @ A
    w, _ = sym_eig(S)
    if not (w[0] < 0.0 < w[-1]):
        raise HjbpassError(
            f"summed-storage witness lost its sign pattern: eigenvalues {w}"
        )
    return CounterexampleReport(P_c=P_c, S=S, eigenvalues=w)


@dataclass(frozen=True)
class PhRealizationReport:
    """Skew/symmetric split of the LTI controller drift against its gradient field."""

    J_hat: np.ndarray
    R_hat: np.ndarray
    P_c: np.ndarray
    A_closed: np.ndarray
    min_eigenvalue: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.min_eigenvalue >= -self.tolerance


def ph_realizability_lti(plant: LtiPhPlant, tolerance: float = 1e-10) -> PhRealizationReport:
    """Port-Hamiltonian structure of the LTI controller: skew J_hat, PSD R_hat.

    The unforced controller drift is ``A_closed z = (A - B B' P_c - B C) z``
    with gradient field ``P_c z``, so ``M = A_closed P_c^{-1}`` plays the role
    of ``J_hat - R_hat``.  Splits M into skew and symmetric parts and checks
    ``R_hat = -sym(M)`` is positive semidefinite to ``tolerance``; for LTI
    plants the construction guarantees this, so a violation is raised as an
    internal error.  A singular ``P_c`` propagates from the linear solve.
    """
    lti = plant.as_plant()
    A, B, C = lti.linearize()
    care = solve_care(A, B, C)
    P_c = care.P
    A_closed = A - B @ (B.T @ P_c) - B @ C
    M = solve_linear(P_c, A_closed.T).T
    J_hat = 0.5 * (M - M.T)
    R_hat = -0.5 * (M + M.T)
    w, _ = sym_eig(R_hat)
    report = PhRealizationReport(
        J_hat=J_hat,
        R_hat=R_hat,
        P_c=P_c,
        A_closed=A_closed,
        min_eigenvalue=float(w[0]),
        tolerance=float(tolerance),
    )
    if not report.passed:
        raise HjbpassError(
            f"controller dissipation matrix lost semidefiniteness: min eigenvalue {w[0]:.3e}"
        )
    return report


def quadratic_fit_residual(value, grid) -> float:
    """Relative RMS deviation of sampled V from its best-fit quadratic.

    Zero (to rounding) whenever V is quadratic, as for an LTI plant; a solved
    nonlinear value function that genuinely left its quadratic initializer
    shows a clearly nonzero value.  Fitted by least squares on the six
    monomials of degree <= 2 via the normal equations, which are perfectly
    conditioned enough at six parameters on a bounded grid.
    """
    zs = np.atleast_2d(np.asarray(grid, dtype=float))
    v = value.values(zs)
    x, y = zs[:, 0], zs[:, 1]
    F = np.column_stack([np.ones_like(x), x, y, 0.5 * x * x, x * y, 0.5 * y * y])
    coef = solve_linear(F.T @ F, F.T @ v)
    resid = v - F @ coef
    denom = float(np.sqrt(np.mean(v**2)))
    if denom == 0.0:
        return 0.0
    return float(np.sqrt(np.mean(resid**2)) / denom)
