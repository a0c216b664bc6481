"""Small dense symmetric-matrix numerics.

Everything here works on ``p x p`` arrays with ``p`` in the single or low
double digits, so the routines favour clarity over blocking or BLAS-level
tuning.  Tolerances are relative to the matrix norm.
"""

import math

import numpy as np

TINY = 1e-300


class NotPositiveDefiniteError(ValueError):
    """Raised when a Cholesky factorization meets a non-positive pivot."""


class ConvergenceError(RuntimeError):
    pass


def symmetrize(a):
    a = np.asarray(a, dtype=float)
    if a.ndim == 0:
        a = a.reshape(1, 1)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    return 0.5 * (a + a.T)


def cholesky(a):
    """Lower-triangular ``L`` with ``L @ L.T == a``.

    Raises NotPositiveDefiniteError on the first non-positive pivot.
    """
    a = symmetrize(a)
    p = a.shape[0]
    L = np.zeros_like(a)
    for j in range(p):
        d = a[j, j] - L[j, :j] @ L[j, :j]
        if not d > 0.0:
            raise NotPositiveDefiniteError(
                f"matrix is not positive definite (pivot {j} = {d:.3g})"
            )
        L[j, j] = math.sqrt(d)
        if j + 1 < p:
            L[j + 1:, j] = (a[j + 1:, j] - L[j + 1:, :j] @ L[j, :j]) / L[j, j]
    return L


def solve_lower(L, b):
    """Forward substitution for ``L x = b`` (``b`` may be a matrix)."""
    b = np.array(b, dtype=float)
    x = np.zeros_like(b)
    for i in range(L.shape[0]):
        x[i] = (b[i] - L[i, :i] @ x[:i]) / L[i, i]
    return x


def log_det(a):
    """Natural log of the determinant of a positive definite matrix."""
    L = cholesky(a)
    return 2.0 * float(np.sum(np.log(np.maximum(np.diag(L), TINY))))


def slogdet_lu(a):
    """Sign and log-|det| via LU with partial pivoting.

    Used on the diagnostic path for matrices that may be indefinite, where
    Cholesky would simply refuse.
    """
    u = np.array(a, dtype=float)
    if u.ndim != 2 or u.shape[0] != u.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {u.shape}")
    p = u.shape[0]
    sign = 1.0
    logabs = 0.0
    for k in range(p):
        piv = k + int(np.argmax(np.abs(u[k:, k])))
        if u[piv, k] == 0.0:
            return 0.0, -math.inf
        if piv != k:
            u[[k, piv]] = u[[piv, k]]
            sign = -sign
        if u[k, k] < 0:
            sign = -sign
        logabs += math.log(max(abs(u[k, k]), TINY))
        u[k + 1:, k:] -= np.outer(u[k + 1:, k] / u[k, k], u[k, k:])
    return sign, logabs


def sym_eigen(a, tol=1e-14, max_sweeps=100):
    """Cyclic Jacobi eigendecomposition of a symmetric matrix.

    Returns ``(w, V)`` with eigenvalues ``w`` ascending and orthonormal
    eigenvectors in the columns of ``V``.
    """
    a = symmetrize(a)
    p = a.shape[0]
    V = np.eye(p)
    if p == 1:
        return a[0].copy(), V
    scale = float(np.linalg.norm(a))
    if scale == 0.0:
        return np.zeros(p), V
    A = a.copy()
    for _ in range(max_sweeps):
        off = math.sqrt(2.0 * float(np.sum(np.triu(A, 1) ** 2)))
        if off <= tol * scale:
            break
        for i in range(p - 1):
            for j in range(i + 1, p):
                aij = A[i, j]
                if abs(aij) <= 1e-300:
                    continue
                theta = (A[j, j] - A[i, i]) / (2.0 * aij)
                t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                # A <- J^T A J with J the (i, j) plane rotation
                Ai = A[:, i].copy()
                Aj = A[:, j].copy()
                A[:, i] = c * Ai - s * Aj
                A[:, j] = s * Ai + c * Aj
                Ai = A[i, :].copy()
                Aj = A[j, :].copy()
                A[i, :] = c * Ai - s * Aj
                A[j, :] = s * Ai + c * Aj
                A[i, j] = A[j, i] = 0.0
                Vi = V[:, i].copy()
                Vj = V[:, j].copy()
                V[:, i] = c * Vi - s * Vj
                V[:, j] = s * Vi + c * Vj
    else:
        resid = float(np.linalg.norm(a @ V - V * np.diag(A)))
        raise ConvergenceError(f"Jacobi iteration did not converge (residual {resid:.3g})")
    w = np.diag(A).copy()
    order = np.argsort(w, kind="stable")
    return w[order], V[:, order]


def whiten(S, B):
    """Return ``L^{-1} B L^{-T}`` where ``S = L L^T``."""
    L = cholesky(S)
    C = solve_lower(L, symmetrize(B))
    C = solve_lower(L, C.T)
    return symmetrize(C)


def max_gen_eig(S, B):
    """Largest eigenvalue of ``S^{-1} B`` for ``S`` positive definite."""
    w, _ = sym_eigen(whiten(S, B))
    return float(w[-1])


def psd_repair(a, rel_floor=1e-12):
    """Clamp eigenvalues below ``rel_floor * |trace|`` up to that floor.

    Returns ``(matrix, repaired)``.
    """
    a = symmetrize(a)
    floor = rel_floor * max(abs(float(np.trace(a))), TINY)
    w, V = sym_eigen(a)
    if w[0] >= floor:
        return a, False
    w = np.maximum(w, floor)
    return symmetrize((V * w) @ V.T), True
