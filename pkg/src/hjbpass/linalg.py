"""Self-contained dense linear algebra for small matrices.

Everything here is written against plain numpy array arithmetic (no
``numpy.linalg``/LAPACK solver calls) so the numerical behaviour is fully
pinned down by this file: LU with partial pivoting, a cyclic Jacobi
symmetric eigensolver, a Kronecker-product Lyapunov solve, and a Riccati
solver based on the matrix sign function with Newton-Kleinman refinement.
Intended for the n <= ~30 matrices that appear in controller synthesis, not
as a general-purpose library.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NoStabilizingSolutionError, NotHurwitzError, SingularMatrixError

#: Relative pivot threshold below which elimination treats a matrix as singular.
PIVOT_RTOL = 1e-14


def _frobenius(A) -> float:
    return float(np.sqrt(np.sum(A * A)))


@dataclass
class LuFactorization:
    """Compact LU factors of a row-permuted square matrix."""

    lu: np.ndarray
    perm: np.ndarray
    sign: float

    def solve(self, b):
        """Solve A x = b for vector or matrix ``b`` by substitution."""
        b = np.asarray(b, dtype=float)
        vector = b.ndim == 1
        x = b.reshape(-1, 1).copy() if vector else b.copy()
        x = x[self.perm]
        n = self.lu.shape[0]
        for k in range(n):  # forward: L y = P b (unit lower triangle)
            x[k + 1 :] -= np.outer(self.lu[k + 1 :, k], x[k])
        for k in range(n - 1, -1, -1):  # backward: U x = y
            x[k] /= self.lu[k, k]
            x[:k] -= np.outer(self.lu[:k, k], x[k])
        return x[:, 0] if vector else x

    def logabsdet(self) -> float:
        return float(np.sum(np.log(np.abs(np.diag(self.lu)))))


def lu_factor(A) -> LuFactorization:
    """LU with partial pivoting; raises SingularMatrixError on a tiny pivot.

    The singularity threshold is ``PIVOT_RTOL`` times the largest absolute
    entry of ``A``.
    """
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise SingularMatrixError(f"expected a square matrix, got shape {A.shape}")
    n = A.shape[0]
    scale = float(np.max(np.abs(A)))
    if scale == 0.0:
        raise SingularMatrixError("matrix is identically zero")
    lu = A.copy()
    perm = np.arange(n)
    sign = 1.0
    for k in range(n):
        p = k + int(np.argmax(np.abs(lu[k:, k])))
        if abs(lu[p, k]) <= PIVOT_RTOL * scale:
            raise SingularMatrixError(
                f"pivot {abs(lu[p, k]):.3e} below threshold {PIVOT_RTOL * scale:.3e} in column {k}"
            )
        if p != k:
            lu[[k, p]] = lu[[p, k]]
            perm[[k, p]] = perm[[p, k]]
            sign = -sign
        lu[k + 1 :, k] /= lu[k, k]
        lu[k + 1 :, k + 1 :] -= np.outer(lu[k + 1 :, k], lu[k, k + 1 :])
    return LuFactorization(lu=lu, perm=perm, sign=sign)


def solve_linear(A, b):
    """Solve the square system A x = b (vector or matrix right-hand side)."""
    return lu_factor(A).solve(b)


def sym_eig(S, max_sweeps: int = 30, rel_tol: float = 1e-14):
    """Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.

    Returns ``(w, V)`` with eigenvalues ascending and orthonormal
    eigenvector columns; sweeps stop once the off-diagonal Frobenius mass
    falls below ``rel_tol`` times the matrix norm.
    """
    A = np.array(S, dtype=float)
    A = 0.5 * (A + A.T)
    n = A.shape[0]
    V = np.eye(n)
    fro = _frobenius(A)
    if n == 1 or fro == 0.0:
        w = np.diag(A).copy()
        order = np.argsort(w, kind="stable")
        return w[order], V[:, order]
    for _ in range(max_sweeps):
        off = math.sqrt(max(2.0 * float(np.sum(np.triu(A, 1) ** 2)), 0.0))
        if off <= rel_tol * fro:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if abs(apq) <= 1e-300:
                    continue
                tau = (A[q, q] - A[p, p]) / (2.0 * apq)
                t = math.copysign(1.0, tau) / (abs(tau) + math.sqrt(1.0 + tau * tau))
                c = 1.0 / math.sqrt(1.0 + t * t)
                s = t * c
                app, aqq = A[p, p], A[q, q]
                A[p, p] = app - t * apq
                A[q, q] = aqq + t * apq
                A[p, q] = A[q, p] = 0.0
                mask = np.ones(n, dtype=bool)
                mask[p] = mask[q] = False
                akp = A[mask, p].copy()
                akq = A[mask, q].copy()
                A[mask, p] = A[p, mask] = c * akp - s * akq
                A[mask, q] = A[q, mask] = c * akq + s * akp
                vp = V[:, p].copy()
                V[:, p] = c * vp - s * V[:, q]
                V[:, q] = c * V[:, q] + s * vp
    w = np.diag(A).copy()
    order = np.argsort(w, kind="stable")
    return w[order], V[:, order]


def solve_lyapunov(A, W):
    """Solve A' X + X A + W = 0 for symmetric W, requiring A Hurwitz.

    Vectorizes to a Kronecker system solved by LU.  Hurwitz-ness is
    certified on the same factorization by solving ``A' Y + Y A + I = 0``
    and checking ``Y`` positive definite; failure raises NotHurwitzError.
    """
    A = np.asarray(A, dtype=float)
    W = np.asarray(W, dtype=float)
    n = A.shape[0]
    eye = np.eye(n)
    K = np.kron(A.T, eye) + np.kron(eye, A.T)
    try:
        fac = lu_factor(K)
    except SingularMatrixError as exc:
        raise NotHurwitzError(f"Lyapunov operator singular (imaginary-axis eigenvalue): {exc}") from exc
    Y = fac.solve(-eye.ravel()).reshape(n, n)
    Y = 0.5 * (Y + Y.T)
    wmin = sym_eig(Y)[0][0]
    if wmin <= 0.0:
        raise NotHurwitzError(f"Lyapunov certificate not positive definite (min eigenvalue {wmin:.3e})")
    X = fac.solve(-W.ravel()).reshape(n, n)
    return 0.5 * (X + X.T)


def spectral_abscissa_bound(A) -> float:
    """Max real part of the spectrum: exact for n = 2, a sign-correct bound otherwise.

    For n > 2 a Lyapunov certificate decides the sign; the returned scalar
    is the certified upper bound ``-1/(2 lambda_max(Y))`` in the Hurwitz
    case and ``lambda_max(sym(A)) >= 0`` otherwise.
    """
    A = np.asarray(A, dtype=float)
    n = A.shape[0]
    if n == 1:
        return float(A[0, 0])
    if n == 2:
        tr = A[0, 0] + A[1, 1]
        det = A[0, 0] * A[1, 1] - A[0, 1] * A[1, 0]
        disc = tr * tr - 4.0 * det
        return 0.5 * (tr + math.sqrt(disc)) if disc >= 0.0 else 0.5 * tr
    eye = np.eye(n)
    try:
        K = np.kron(A.T, eye) + np.kron(eye, A.T)
        Y = lu_factor(K).solve(-eye.ravel()).reshape(n, n)
        Y = 0.5 * (Y + Y.T)
        wy = sym_eig(Y)[0]
        if wy[0] > 0.0:
            return -0.5 / wy[-1]
    except SingularMatrixError:
        pass
    return max(sym_eig(0.5 * (A + A.T))[0][-1], 0.0)


@dataclass(frozen=True)
class CareSolution:
    """Stabilizing Riccati solution with diagnostics."""

    P: np.ndarray
    residual_norm: float
    closed_loop_spectral_abscissa: float


def care_residual(A, B, C, P) -> float:
    """Frobenius norm of A'P + PA - P BB' P + C'C."""
    G = B @ B.T
    return _frobenius(A.T @ P + P @ A - P @ G @ P + C.T @ C)


def solve_care(A, B, C, max_sign_iters: int = 100, sign_tol: float = 1e-14) -> CareSolution:
    """Stabilizing solution of A'P + PA - P BB' P + C'C = 0.

    Runs the matrix sign iteration with determinant scaling on the 2n x 2n
    Hamiltonian, extracts P from the stable-subspace equations by normal
    equations, then applies Newton-Kleinman refinement steps (at least one,
    more only while the residual exceeds tolerance).  Raises
    NoStabilizingSolutionError when no stabilizing solution can be produced.
    """
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    C = np.asarray(C, dtype=float)
    n = A.shape[0]
    if A.shape != (n, n) or B.shape[0] != n or C.shape[1] != n:
        raise NoStabilizingSolutionError(
            f"inconsistent shapes A{A.shape}, B{B.shape}, C{C.shape}"
        )
    G = B @ B.T
    Qm = C.T @ C
    H = np.block([[A, -G], [-Qm, -A.T]])
    Z = H.copy()
    eye2n = np.eye(2 * n)
    converged = False
    for _ in range(max_sign_iters):
        try:
            fac = lu_factor(Z)
        except SingularMatrixError as exc:
            raise NoStabilizingSolutionError(
                f"sign iteration produced a singular iterate: {exc}"
            ) from exc
        Zinv = fac.solve(eye2n)
        c = math.exp(fac.logabsdet() / (2.0 * n))
        Znew = 0.5 * (Z / c + c * Zinv)
        delta = _frobenius(Znew - Z) / max(_frobenius(Z), 1e-300)
        Z = Znew
        if delta <= sign_tol:
            converged = True
            break
    if not converged:
        raise NoStabilizingSolutionError(
            f"matrix sign iteration did not converge in {max_sign_iters} steps"
        )
    M = Z + eye2n
    N = np.vstack([M[:n, n:], M[n:, n:]])
    Rhs = -np.vstack([M[:n, :n], M[n:, :n]])
    try:
        P = solve_linear(N.T @ N, N.T @ Rhs)
    except SingularMatrixError as exc:
        raise NoStabilizingSolutionError(
            f"stable subspace is not a graph over the state space: {exc}"
        ) from exc
    P = 0.5 * (P + P.T)
    residual = care_residual(A, B, C, P)
    for _ in range(3):
        try:
            Pn = solve_lyapunov(A - G @ P, Qm + P @ G @ P)
        except NotHurwitzError as exc:
            raise NoStabilizingSolutionError(
                f"Newton-Kleinman closed loop not Hurwitz: {exc}"
            ) from exc
        P = 0.5 * (Pn + Pn.T)
        residual = care_residual(A, B, C, P)
        if residual <= 1e-13 * (1.0 + _frobenius(P) ** 2):
            break
    return CareSolution(
        P=P,
        residual_norm=residual,
        closed_loop_spectral_abscissa=spectral_abscissa_bound(A - G @ P),
    )
