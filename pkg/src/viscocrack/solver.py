"""Jacobi-preconditioned conjugate gradients and a dense reference solver."""
from __future__ import annotations

import numpy as np
import scipy.linalg


class SolverError(RuntimeError):
    """CG did not reach the requested tolerance."""

    def __init__(self, message, residual=None, iterations=None):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class NotSPDError(SolverError):
    """A search direction with non-positive curvature was met."""


def cg_solve(A, b, tol: float = 1e-10, max_iter: int | None = None, x0=None,
             callback=None) -> np.ndarray:
    """Solve A x = b for symmetric positive definite A.

    Stops when ||b - A x|| <= tol ||b|| (recursively updated residual).
    ``callback(x)`` is called after every iteration.

    Raises
    ------
    NotSPDError
        If p^T A p <= 0 for some search direction p.
    SolverError
        If ``max_iter`` iterations do not reach ``tol``; carries the final
        relative residual.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    b = np.asarray(b, dtype=float)
    n = len(b)
    max_iter = 10 * n + 10 if max_iter is None else max_iter
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return np.zeros(n)
    diag = A.diagonal() if hasattr(A, "diagonal") else np.diag(A)
    if np.any(diag <= 0):
        raise NotSPDError("matrix has a non-positive diagonal entry")
    dinv = 1.0 / diag

    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    r = b - A @ x
    rnorm = np.linalg.norm(r)
    if rnorm <= tol * bnorm:
        return x
    z = dinv * r
    p = z.copy()
    rz = r @ z
    for it in range(1, max_iter + 1):
        Ap = A @ p
        pAp = p @ Ap
        if pAp <= 0.0:
            raise NotSPDError(f"non-positive curvature p^T A p = {pAp:.3e} at iteration {it}",
                              rnorm / bnorm, it)
        alpha = rz / pAp
        x += alpha * p
        r -= alpha * Ap
        if callback is not None:
            callback(x)
        rnorm = np.linalg.norm(r)
        if rnorm <= tol * bnorm:
            return x
        z = dinv * r
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new
    raise SolverError(f"CG did not converge in {max_iter} iterations "
                      f"(relative residual {rnorm / bnorm:.3e})", rnorm / bnorm, max_iter)


def dense_solve(A, b) -> np.ndarray:
    """Direct LU solve for small dense systems (test oracle)."""
    A = A.toarray() if hasattr(A, "toarray") else np.asarray(A, dtype=float)
    return scipy.linalg.solve(A, np.asarray(b, dtype=float))
