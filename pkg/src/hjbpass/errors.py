"""Exception types shared across the package."""

from __future__ import annotations


class HjbpassError(Exception):
    """Base class for all package-specific errors."""


class ConfigurationError(HjbpassError):
    """Invalid configuration value, unknown key, or malformed input file."""


class UnsupportedOperationError(HjbpassError):
    """Operation requires a capability the object does not have (e.g. a storage function)."""


class SingularMatrixError(HjbpassError):
    """LU elimination hit a pivot below the singularity threshold."""


class NotHurwitzError(HjbpassError):
    """A Lyapunov solve needs a Hurwitz coefficient matrix and did not get one."""


class NoStabilizingSolutionError(HjbpassError):
    """The Riccati solver could not produce a stabilizing solution."""


class SingularGalerkinSystemError(HjbpassError):
    """The projected policy-evaluation system is singular (degenerate plant/policy)."""


class NonConvergenceError(HjbpassError):
    """An iteration exhausted its budget without meeting its stopping rule.

    Carries whatever diagnostic history the caller attached.
    """

    def __init__(self, message: str, history=None):
        super().__init__(message)
        self.history = history


class NewtonDivergenceError(HjbpassError):
    """A Newton solve failed; carries the last iterate and residual norm."""

    def __init__(self, message: str, last_iterate=None, residual_norm: float | None = None):
        super().__init__(message)
        self.last_iterate = last_iterate
        self.residual_norm = residual_norm


class TrustRegionError(HjbpassError):
    """A recovered point left the region where the gradient map is trusted invertible."""


class CovarianceError(HjbpassError):
    """Filter covariance lost symmetry/positivity beyond tolerance."""
