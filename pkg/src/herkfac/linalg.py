"""Dense linear algebra on 2-D float64 arrays.

Matrices are plain ``numpy.ndarray`` objects of shape ``(rows, cols)``.
Vectorization is column-stacking throughout, so that

    vec(B @ V @ A.T) == kron(A, B) @ vec(V)

which is the identity the K-FAC preconditioner relies on.
"""

from __future__ import annotations

import numpy as np

from .errors import CurvatureError, NumericError, ShapeError


def as_matrix(x) -> np.ndarray:
    m = np.asarray(x, dtype=np.float64)
    if m.ndim == 1:
        m = m.reshape(-1, 1)
    if m.ndim != 2 or m.shape[0] < 1 or m.shape[1] < 1:
        raise ShapeError(f"expected a non-empty 2-D matrix, got shape {m.shape}")
    return m


def _check_finite(m: np.ndarray) -> np.ndarray:
    if not np.all(np.isfinite(m)):
        raise NumericError("matrix contains non-finite entries")
    return m


def matmul(a, b) -> np.ndarray:
    a, b = as_matrix(a), as_matrix(b)
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"cannot multiply {a.shape} by {b.shape}")
    return _check_finite(a @ b)


def is_symmetric(m: np.ndarray, tol: float = 1e-10) -> bool:
    scale = max(1.0, float(np.max(np.abs(m))))
    return bool(np.max(np.abs(m - m.T)) <= tol * scale)


def sym_inverse(m, jitter: float = 0.0) -> np.ndarray:
    """Return ``(m + jitter * I)^-1`` for a symmetric positive-definite ``m``.

    Uses a Cholesky factorization; the result is explicitly symmetrized.
    Raises :class:`CurvatureError` when the jittered matrix is not positive
    definite, in which case the caller is expected to increase damping.
    """
    m = as_matrix(m)
    n = m.shape[0]
    if m.shape[1] != n:
        raise ShapeError(f"sym_inverse needs a square matrix, got {m.shape}")
    if jitter < 0:
        raise ValueError("jitter must be non-negative")
    if not np.all(np.isfinite(m)):
        raise CurvatureError("matrix contains non-finite entries")
    if not is_symmetric(m):
        raise ShapeError("sym_inverse needs a symmetric matrix")
    damped = m + jitter * np.eye(n)
    try:
        chol = np.linalg.cholesky(damped)
    except np.linalg.LinAlgError as exc:
        raise CurvatureError("matrix is not positive definite; increase damping") from exc
    chol_inv = np.linalg.solve(chol, np.eye(n))
    inv = chol_inv.T @ chol_inv
    inv = 0.5 * (inv + inv.T)
    if not np.all(np.isfinite(inv)):
        raise CurvatureError("inverse is not finite; increase damping")
    return inv


def kron(a, b) -> np.ndarray:
    a, b = as_matrix(a), as_matrix(b)
    rows, cols = a.shape[0] * b.shape[0], a.shape[1] * b.shape[1]
    out = (a[:, None, :, None] * b[None, :, None, :]).reshape(rows, cols)
    return _check_finite(out)


def vec(m) -> np.ndarray:
    """Column-stack ``m`` into an ``(rows*cols, 1)`` column vector."""
    m = as_matrix(m)
    return m.reshape(-1, 1, order="F").copy()


def unvec(v, rows: int, cols: int) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    if v.size != rows * cols:
        raise ShapeError(f"cannot reshape {v.size} entries into ({rows}, {cols})")
    return v.reshape(rows, cols, order="F").copy()
