"""Passive output-feedback controller synthesis and structure-preserving simulation.

The package solves a Hamilton-Jacobi-Bellman equation by Galerkin policy
iteration on a tensor Legendre basis, builds passive observer-based and
extended-Kalman-filter controllers from the computed value function,
integrates the resulting systems with an energy-consistent discrete-gradient
scheme (plus implicit midpoint), and audits passivity via discrete power
balances.
"""

from .errors import (
    ConfigurationError,
    CovarianceError,
    HjbpassError,
    NewtonDivergenceError,
    NonConvergenceError,
    NoStabilizingSolutionError,
    NotHurwitzError,
    SingularGalerkinSystemError,
    SingularMatrixError,
    TrustRegionError,
    UnsupportedOperationError,
)
from .galerkin import (
    LegendreBasis,
    QuadratureRule,
    Rectangle,
    ValueFunctionApprox,
    gauss_rule,
    legendre_eval,
    project,
)
from .kernels import backend_name

__version__ = "0.1.0"

__all__ = [
    "ConfigurationError",
    "CovarianceError",
    "HjbpassError",
    "LegendreBasis",
    "NewtonDivergenceError",
    "NonConvergenceError",
    "NoStabilizingSolutionError",
    "NotHurwitzError",
    "QuadratureRule",
    "Rectangle",
    "SingularGalerkinSystemError",
    "SingularMatrixError",
    "TrustRegionError",
    "UnsupportedOperationError",
    "ValueFunctionApprox",
    "backend_name",
    "gauss_rule",
    "legendre_eval",
    "project",
    "__version__",
]
