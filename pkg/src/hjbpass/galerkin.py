"""Tensor scaled-Legendre approximation on a rectangle.

Provides the axis-aligned domain type, an L2-orthonormal Legendre family
per axis, tensor Gauss-Legendre quadrature, and ``ValueFunctionApprox`` - a
two-dimensional series with fast point evaluation (value, gradient,
Hessian) used as the computed storage function of the synthesized
controllers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np
from numpy.polynomial.legendre import leggauss

from .errors import ConfigurationError
from .kernels import get_kernels


@dataclass(frozen=True)
class Rectangle:
    """Axis-aligned rectangle [x_lo, x_hi] x [y_lo, y_hi]."""

    x_lo: float
    x_hi: float
    y_lo: float
    y_hi: float

    def __post_init__(self):
        if not (self.x_lo < self.x_hi and self.y_lo < self.y_hi):
            raise ConfigurationError(
                f"degenerate rectangle: [{self.x_lo}, {self.x_hi}] x [{self.y_lo}, {self.y_hi}]"
            )

    @classmethod
    def square(cls, half_width: float) -> "Rectangle":
        return cls(-half_width, half_width, -half_width, half_width)

    @property
    def center(self) -> np.ndarray:
        return np.array([0.5 * (self.x_lo + self.x_hi), 0.5 * (self.y_lo + self.y_hi)])

    @property
    def area(self) -> float:
        return (self.x_hi - self.x_lo) * (self.y_hi - self.y_lo)

    def axis(self, k: int) -> tuple[float, float]:
        return (self.x_lo, self.x_hi) if k == 0 else (self.y_lo, self.y_hi)

    def scaled(self, factor: float) -> "Rectangle":
        """Rectangle scaled by ``factor`` about its center."""
        cx, cy = self.center
        hx = 0.5 * factor * (self.x_hi - self.x_lo)
        hy = 0.5 * factor * (self.y_hi - self.y_lo)
        return Rectangle(cx - hx, cx + hx, cy - hy, cy + hy)

    def contains(self, z, scale: float = 1.0) -> bool:
        """Whether ``z`` lies in the rectangle scaled by ``scale`` about its center."""
        r = self if scale == 1.0 else self.scaled(scale)
        return bool(r.x_lo <= z[0] <= r.x_hi and r.y_lo <= z[1] <= r.y_hi)


def legendre_tableau(xs, lo: float, hi: float, d: int):
    """Batch values/derivatives of the d orthonormal scaled-Legendre functions.

    Returns ``(P, D1, D2)`` with shape ``(len(xs), d)`` each; column i holds
    the function of polynomial degree i.  Uses the three-term recurrence for
    values and the summed recurrences ``P'_{k+1} = P'_{k-1} + (2k+1) P_k``
    (and its derivative) for the derivative rows.
    """
    xs = np.atleast_1d(np.asarray(xs, dtype=float))
    t = (2.0 * xs - (lo + hi)) / (hi - lo)
    s = 2.0 / (hi - lo)
    n = t.shape[0]
    p = np.empty((n, d))
    dp = np.empty((n, d))
    ddp = np.empty((n, d))
    p[:, 0] = 1.0
    dp[:, 0] = 0.0
    ddp[:, 0] = 0.0
    if d > 1:
        p[:, 1] = t
        dp[:, 1] = 1.0
        ddp[:, 1] = 0.0
    for k in range(1, d - 1):
        c = 2.0 * k + 1.0
        p[:, k + 1] = (c * t * p[:, k] - k * p[:, k - 1]) / (k + 1.0)
        dp[:, k + 1] = dp[:, k - 1] + c * p[:, k]
        ddp[:, k + 1] = ddp[:, k - 1] + c * dp[:, k]
    scale = np.sqrt((2.0 * np.arange(d) + 1.0) / (hi - lo))
    return scale * p, scale * dp * s, scale * ddp * (s * s)


def legendre_eval(i: int, x: float, lo: float = -1.0, hi: float = 1.0):
    """Value and first derivative of the i-th (1-indexed) scaled-Legendre function."""
    if i < 1:
        raise ConfigurationError(f"basis index must be >= 1, got {i}")
    P, D1, _ = legendre_tableau([x], lo, hi, i)
    return float(P[0, i - 1]), float(D1[0, i - 1])


@dataclass(frozen=True)
class LegendreBasis:
    """Tensor basis of d x d scaled-Legendre products on a rectangle.

    ``psi_{i,j}(x, y) = phi_i(x) phi_j(y)`` with 1-indexed ``phi_i`` of
    polynomial degree ``i - 1``; the family is L2-orthonormal on the domain.
    """

    degree: int
    domain: Rectangle

    def __post_init__(self):
        if self.degree < 1:
            raise ConfigurationError(f"basis needs at least one function per axis, got {self.degree}")

    @property
    def size(self) -> int:
        return self.degree * self.degree

    def axis_tableau(self, xs, axis: int):
        lo, hi = self.domain.axis(axis)
        return legendre_tableau(xs, lo, hi, self.degree)


@dataclass(frozen=True)
class QuadratureRule:
    """Flat list of 2-d nodes with positive weights."""

    nodes: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        if self.nodes.ndim != 2 or self.nodes.shape[1] != 2 or self.weights.shape != (self.nodes.shape[0],):
            raise ConfigurationError("quadrature nodes must be (N, 2) with matching weights")


def gauss_rule(points_per_axis: int, domain: Rectangle) -> QuadratureRule:
    """Tensor Gauss-Legendre rule with ``points_per_axis`` nodes per axis.

    Exact for polynomials of degree <= 2*points_per_axis - 1 per axis.
    """
    if points_per_axis < 1:
        raise ConfigurationError(f"need at least one quadrature point per axis, got {points_per_axis}")
    xi, wi = leggauss(points_per_axis)
    xs = 0.5 * (domain.x_lo + domain.x_hi) + 0.5 * (domain.x_hi - domain.x_lo) * xi
    ys = 0.5 * (domain.y_lo + domain.y_hi) + 0.5 * (domain.y_hi - domain.y_lo) * xi
    wx = 0.5 * (domain.x_hi - domain.x_lo) * wi
    wy = 0.5 * (domain.y_hi - domain.y_lo) * wi
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    W = np.outer(wx, wy)
    nodes = np.column_stack([X.ravel(), Y.ravel()])
    return QuadratureRule(nodes=nodes, weights=W.ravel())


class VfaEval(NamedTuple):
    """Point evaluation of a series: value, gradient (2,), Hessian (2,2), extrapolation flag."""

    value: float
    gradient: np.ndarray
    hessian: np.ndarray
    extrapolated: bool


class ValueFunctionApprox:
    """Two-dimensional scaled-Legendre series ``offset + sum_ij alpha[i,j] psi_{i+1,j+1}``.

    The pure-constant mode is pinned: ``alpha[0, 0] == 0``; any constant part
    lives in ``offset``.  Evaluation outside the domain is polynomial
    extrapolation and is flagged in :meth:`eval`.
    """

    def __init__(self, basis: LegendreBasis, alpha, offset: float = 0.0):
        alpha = np.ascontiguousarray(alpha, dtype=float)
        if alpha.shape != (basis.degree, basis.degree):
            raise ConfigurationError(
                f"coefficient grid must be {basis.degree} x {basis.degree}, got {alpha.shape}"
            )
        if alpha[0, 0] != 0.0:
            raise ConfigurationError("pure-constant coefficient alpha[0, 0] must be 0 (use offset)")
        self.basis = basis
        self.alpha = alpha
        self.offset = float(offset)
        self._kern = get_kernels(basis.degree)

    # -- point evaluation ------------------------------------------------

    def _point(self, z):
        dom = self.basis.domain
        return self._kern.eval_point(
            self.alpha, self.offset, dom.x_lo, dom.x_hi, dom.y_lo, dom.y_hi, float(z[0]), float(z[1])
        )

    def value(self, z) -> float:
        return self._point(z)[0]

    def gradient(self, z) -> np.ndarray:
        _, gx, gy, _, _, _ = self._point(z)
        return np.array([gx, gy])

    def hessian(self, z) -> np.ndarray:
        _, _, _, hxx, hxy, hyy = self._point(z)
        return np.array([[hxx, hxy], [hxy, hyy]])

    def eval(self, z) -> VfaEval:
        v, gx, gy, hxx, hxy, hyy = self._point(z)
        return VfaEval(
            value=v,
            gradient=np.array([gx, gy]),
            hessian=np.array([[hxx, hxy], [hxy, hyy]]),
            extrapolated=not self.basis.domain.contains(z),
        )

    def value_diff(self, z1, z2) -> float:
        """``value(z2) - value(z1)`` without subtractive cancellation.

        Computed from divided-difference recurrences, so the relative error
        is a few ulp of the *difference* even when ``z1`` and ``z2`` are
        nearly coincident and the two values agree to most of their digits.
        """
        dom = self.basis.domain
        return self._kern.value_diff(
            self.alpha,
            dom.x_lo,
            dom.x_hi,
            dom.y_lo,
            dom.y_hi,
            float(z1[0]),
            float(z1[1]),
            float(z2[0]),
            float(z2[1]),
        )

    # -- batch evaluation ------------------------------------------------

    def values(self, zs) -> np.ndarray:
        zs = np.asarray(zs, dtype=float)
        Px, _, _ = self.basis.axis_tableau(zs[:, 0], 0)
        Py, _, _ = self.basis.axis_tableau(zs[:, 1], 1)
        return np.einsum("ni,ij,nj->n", Px, self.alpha, Py) + self.offset

    def gradients(self, zs) -> np.ndarray:
        zs = np.asarray(zs, dtype=float)
        Px, Dx, _ = self.basis.axis_tableau(zs[:, 0], 0)
        Py, Dy, _ = self.basis.axis_tableau(zs[:, 1], 1)
        gx = np.einsum("ni,ij,nj->n", Dx, self.alpha, Py)
        gy = np.einsum("ni,ij,nj->n", Px, self.alpha, Dy)
        return np.column_stack([gx, gy])

    # -- serialization ---------------------------------------------------

    def save(self, path) -> None:
        """Write the series as CSV with a commented header (17 significant digits)."""
        dom = self.basis.domain
        lines = [
            "# hjbpass value function v1",
            f"# degree = {self.basis.degree}",
            "# domain = " + ",".join(f"{v:.17g}" for v in (dom.x_lo, dom.x_hi, dom.y_lo, dom.y_hi)),
            f"# offset = {self.offset:.17g}",
        ]
        for row in self.alpha:
            lines.append(",".join(f"{v:.17g}" for v in row))
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("\n".join(lines) + "\n")

    @classmethod
    def load(cls, path) -> "ValueFunctionApprox":
        header: dict[str, str] = {}
        rows: list[list[float]] = []
        with open(path, "r", encoding="utf-8") as fh:
            for raw in fh:
                line = raw.strip()
                if not line:
                    continue
                if line.startswith("#"):
                    if "=" in line:
                        key, _, val = line[1:].partition("=")
                        header[key.strip()] = val.strip()
                    continue
                rows.append([float(tok) for tok in line.split(",")])
        try:
            degree = int(header["degree"])
            lo0, hi0, lo1, hi1 = (float(t) for t in header["domain"].split(","))
            offset = float(header.get("offset", "0"))
        except (KeyError, ValueError) as exc:
            raise ConfigurationError(f"malformed value-function file {path}: {exc}") from exc
        alpha = np.array(rows)
        basis = LegendreBasis(degree=degree, domain=Rectangle(lo0, hi0, lo1, hi1))
        if alpha.shape != (degree, degree):
            raise ConfigurationError(
                f"value-function file {path}: coefficient grid {alpha.shape} does not match degree {degree}"
            )
        return cls(basis, alpha, offset)


def project(fn: Callable, basis: LegendreBasis, quad: QuadratureRule | None = None) -> ValueFunctionApprox:
    """L2-project a scalar function onto the tensor basis.

    Exact (to quadrature precision) for polynomials inside the span; the
    constant part is moved to the series offset so the pinned-mode invariant
    holds.
    """
    if quad is None:
        quad = gauss_rule(2 * (basis.degree + 1), basis.domain)
    fvals = np.array([float(fn(z)) for z in quad.nodes])
    Px, _, _ = basis.axis_tableau(quad.nodes[:, 0], 0)
    Py, _, _ = basis.axis_tableau(quad.nodes[:, 1], 1)
    coeff = np.einsum("n,ni,nj->ij", quad.weights * fvals, Px, Py)
    lo0, hi0 = basis.domain.axis(0)
    lo1, hi1 = basis.domain.axis(1)
    const_value = coeff[0, 0] / math.sqrt((hi0 - lo0) * (hi1 - lo1))
    coeff[0, 0] = 0.0
    return ValueFunctionApprox(basis, coeff, offset=const_value)
