"""GMRES residual minimization on small dense matrices.

Polynomial convention used everywhere in this package::

    p(z; c) = 1 - sum_{j=1..k} c[j-1] * z**j

so ``c`` holds k coefficients and p(0; c) = 1 for every ``c``.

The k-th GMRES residual for (A, b) is ``r = p(A; gamma) b`` where ``gamma``
minimizes ``||b - K(b) c||`` and ``K(b) = [Ab, A^2 b, ..., A^k b]``. It is
computed from an orthonormal basis of ``span K(b)`` (modified Gram-Schmidt
with one reorthogonalization pass); the normal-equations formula
``(K^T K)^{-1} K^T b`` is kept only as a cross-check.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

__all__ = [
    "SingularMatrixError",
    "DegenerateVectorError",
    "GmresResult",
    "KrylovMatrix",
    "poly_matrix",
    "poly_to_ascending",
    "krylov_matrix",
    "gmres_residual",
    "gmres_residual_complex",
    "gmres_polynomial",
    "gmres_polynomial_normal_equations",
    "min_poly_degree_vec",
    "min_poly_degree",
    "check_nonsingular",
]

_EPS = np.finfo(float).eps


class SingularMatrixError(ValueError):
    """The operator is numerically singular."""


class DegenerateVectorError(ValueError):
    """The Krylov vectors Av, ..., A^k v are (numerically) dependent."""


@dataclass
class GmresResult:
    residual: np.ndarray
    residual_norm: float
    coeffs: np.ndarray
    ortho_defect: float
    degenerate: bool = False

    @property
    def k(self):
        return len(self.coeffs)


@dataclass
class KrylovMatrix:
    columns: np.ndarray
    source_vector: np.ndarray

    def gramian(self):
        return self.columns.conj().T @ self.columns


def check_nonsingular(A):
    """Raise :class:`SingularMatrixError` if ``A`` is numerically singular."""
    A = np.asarray(A)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {A.shape}")
    s = np.linalg.svd(A, compute_uv=False)
    if s[-1] <= A.shape[0] * _EPS * s[0]:
        raise SingularMatrixError(
            f"matrix is numerically singular (sigma_min = {s[-1]:.3e})"
        )


def poly_matrix(A, c):
    """Return p(A; c) = I - sum_j c_j A^j."""
    A = np.asarray(A)
    c = np.asarray(c)
    dtype = np.result_type(A, c, float)
    n = A.shape[0]
    P = np.eye(n, dtype=dtype)
    Aj = np.eye(n, dtype=dtype)
    for cj in c:
        Aj = Aj @ A
        P = P - cj * Aj
    return P


def poly_to_ascending(c):
    """Coefficients of p(z; c) in ascending powers: [1, -c_1, ..., -c_k]."""
    return np.concatenate([[1.0], -np.asarray(c)])


def krylov_matrix(A, v, k):
    """K(v) = [Av, A^2 v, ..., A^k v] by repeated multiplication."""
    A = np.asarray(A)
    v = np.asarray(v)
    if k < 1:
        raise ValueError("k must be >= 1")
    if A.shape[1] != v.shape[0]:
        raise ValueError(f"dimension mismatch: A is {A.shape}, v has {v.shape[0]}")
    cols = np.empty((v.shape[0], k), dtype=np.result_type(A, v, float))
    x = v
    for j in range(k):
        x = A @ x
        cols[:, j] = x
    return KrylovMatrix(cols, v.copy())


def _orthonormal_basis(A, b, k, breakdown_tol):
    """Orthonormal basis of span{Ab, ..., A^k b}; stops early on breakdown."""
    n = b.shape[0]
    W = np.zeros((n, k), dtype=np.result_type(A, b, float))
    x = A @ b
    for j in range(k):
        xnorm = np.linalg.norm(x)
        for _ in range(2):
            x = x - W[:, :j] @ (W[:, :j].conj().T @ x)
        h = np.linalg.norm(x)
        if h <= breakdown_tol * xnorm or h == 0.0:
            return W[:, :j], True
        W[:, j] = x / h
        x = A @ W[:, j]
    return W, False


def _gmres_core(A, b, k, breakdown_tol=1e-13):
    """Residual, coefficients and degeneracy flag without input validation."""
    W, broke = _orthonormal_basis(A, b, k, breakdown_tol)
    proj = W.conj().T @ b
    r = b - W @ proj
    # second projection pass for orthogonality to working precision
    r = r - W @ (W.conj().T @ r)
    K = krylov_matrix(A, b, k).columns
    if broke:
        c = np.linalg.lstsq(K, b, rcond=None)[0]
    else:
        R = W.conj().T @ K
        c = scipy.linalg.solve_triangular(np.triu(R), proj)
    return r, c, K, broke


def _ortho_defect(K, r):
    rn = np.linalg.norm(r)
    if rn == 0.0:
        return 0.0
    colnorms = np.linalg.norm(K, axis=0)
    colnorms[colnorms == 0] = 1.0
    return float(np.max(np.abs(K.conj().T @ r) / (colnorms * rn)))


def _validate(A, b, k):
    A = np.asarray(A)
    b = np.asarray(b)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {A.shape}")
    if b.ndim != 1 or b.shape[0] != A.shape[0]:
        raise ValueError(f"dimension mismatch: A is {A.shape}, b has shape {b.shape}")
    if int(k) != k or not 1 <= k <= A.shape[0]:
        raise ValueError(f"k must satisfy 1 <= k <= n = {A.shape[0]}, got {k}")
    if not np.any(b):
        raise ValueError("b must be nonzero")
    return A, b, int(k)


def gmres_residual(A, b, k, *, check=True, zero_tol=1e-12):
    """k-th GMRES residual of A x = b with x_0 = 0.

    The result is flagged ``degenerate`` when the residual vanishes (to
    ``zero_tol`` relative to ||b||), i.e. when d(A, b) <= k; in that case the
    coefficients are the minimum-norm least-squares solution.
    """
    A, b, k = _validate(A, b, k)
    if check:
        check_nonsingular(A)
    dtype = np.result_type(A, b, float)
    r, c, K, broke = _gmres_core(A.astype(dtype), b.astype(dtype), k)
    rn = float(np.linalg.norm(r))
    degenerate = broke or rn <= zero_tol * np.linalg.norm(b)
    if degenerate and not broke:
        c = np.linalg.lstsq(K, b, rcond=None)[0]
    return GmresResult(r, rn, c, _ortho_defect(K, r), bool(degenerate))


def gmres_residual_complex(A, b, k, coeff_field="complex", *, check=True):
    """GMRES over complex vectors with real or complex polynomial coefficients.

    For ``coeff_field="real"`` and ``b = u + i w`` the problem
    ``min_{c real} ||p(A; c) b||`` is solved through the real embedding
    ``diag(A, A)`` applied to ``[u; w]``, whose squared residual is
    ``||p(A)u||^2 + ||p(A)w||^2``.
    """
    A, b, k = _validate(A, b, k)
    b = b.astype(complex)
    if coeff_field == "complex":
        return gmres_residual(A.astype(complex), b, k, check=check)
    if coeff_field != "real":
        raise ValueError(f"coeff_field must be 'real' or 'complex', got {coeff_field!r}")
    if np.iscomplexobj(A) and np.any(np.imag(A)):
        raise ValueError("real-coefficient GMRES is only supported for real A")
    A = np.real(A)
    n = A.shape[0]
    B = np.zeros((2 * n, 2 * n))
    B[:n, :n] = A
    B[n:, n:] = A
    res = gmres_residual(B, np.concatenate([b.real, b.imag]), k, check=check)
    r = res.residual[:n] + 1j * res.residual[n:]
    return GmresResult(r, res.residual_norm, res.coeffs, res.ortho_defect, res.degenerate)


def gmres_polynomial(A, v, k, tol=None):
    """The unique minimizer gamma(v) of ||v - K(v) c||.

    Raises :class:`DegenerateVectorError` when K(v) has numerical rank < k.
    """
    A, v, k = _validate(A, v, k)
    K = krylov_matrix(A, v, k).columns
    s = np.linalg.svd(K, compute_uv=False)
    if tol is None:
        tol = max(K.shape) * _EPS * s[0]
    rank = int(np.sum(s > tol))
    if rank < k:
        raise DegenerateVectorError(
            f"Krylov matrix has numerical rank {rank} < k = {k}"
        )
    dtype = np.result_type(A, v, float)
    _, c, _, broke = _gmres_core(A.astype(dtype), v.astype(dtype), k)
    if broke:
        raise DegenerateVectorError("Arnoldi breakdown before step k")
    return c


def gmres_polynomial_normal_equations(A, v, k):
    """gamma(v) = (K^T K)^{-1} K^T v. Oracle only: squares cond(K)."""
    K = krylov_matrix(np.asarray(A), np.asarray(v), k).columns
    KH = K.conj().T
    return np.linalg.solve(KH @ K, KH @ v)


def min_poly_degree_vec(A, b, tol=None):
    """Degree d(A, b) of the minimal polynomial of b with respect to A.

    Columns of [b, Ab, ..., A^j b] are normalized, then the smallest j with
    numerical rank j is located by column-pivoted QR. ``tol`` is relative to
    the largest |R_ii| and defaults to n * machine epsilon.
    """
    A = np.asarray(A)
    b = np.asarray(b)
    if not np.any(b):
        raise ValueError("b must be nonzero")
    n = A.shape[0]
    if tol is None:
        tol = n * _EPS
    cols = [b / np.linalg.norm(b)]
    for j in range(1, n + 1):
        x = A @ cols[-1]
        nx = np.linalg.norm(x)
        if nx == 0:
            return j
        cols.append(x / nx)
        R = scipy.linalg.qr(np.column_stack(cols), mode="r", pivoting=True)[0]
        d = np.abs(np.diag(R))
        if np.sum(d > tol * d[0]) <= j:
            return j
    return n


def min_poly_degree(A, tol=None, n_vectors=3, seed=0):
    """Degree d(A) of the minimal polynomial of A, as the maximum of
    d(A, b) over a few seeded random vectors."""
    A = np.asarray(A)
    rng = np.random.default_rng(seed)
    return max(
        min_poly_degree_vec(A, rng.standard_normal(A.shape[0]), tol)
        for _ in range(n_vectors)
    )
