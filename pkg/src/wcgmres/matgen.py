"""Matrix families used in worst-case / ideal GMRES experiments, plus
Matrix Market text I/O.

All generators return dense ``numpy.ndarray`` objects of dtype float64.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

__all__ = [
    "ParameterError",
    "MatrixFormatError",
    "TohParams",
    "gen_toh",
    "gen_jordan",
    "gen_alternating_bidiagonal",
    "gen_block_coupled",
    "block_diag_double",
    "toh_flip_matrix",
    "read_matrix",
    "write_matrix",
    "format_matrix",
    "read_vector",
    "write_vector",
]


class ParameterError(ValueError):
    """A generator parameter lies outside its admissible range."""


class MatrixFormatError(ValueError):
    """A matrix file could not be parsed, or has the wrong shape."""

    def __init__(self, message, lineno=None):
        self.lineno = lineno
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)


@dataclass(frozen=True)
class TohParams:
    omega: float
    epsilon: float

    def __post_init__(self):
        if not 0.0 < self.omega < 2.0:
            raise ParameterError(f"omega must lie in (0, 2), got {self.omega}")
        if not self.epsilon > 0.0:
            raise ParameterError(f"epsilon must be positive, got {self.epsilon}")


def _bidiagonal(diag, superdiag):
    A = np.diag(np.asarray(diag, dtype=float))
    n = A.shape[0]
    A[np.arange(n - 1), np.arange(1, n)] = superdiag
    return A


def gen_toh(params=None, *, omega=None, epsilon=None):
    """Toh's 4x4 bidiagonal matrix A(omega, epsilon).

    Diagonal (1, -1, 1, -1), superdiagonal (eps, omega/eps, eps).
    Accepts either a :class:`TohParams` or ``omega=``/``epsilon=`` keywords.
    """
    if params is None:
        params = TohParams(omega, epsilon)
    w, e = params.omega, params.epsilon
    return _bidiagonal([1.0, -1.0, 1.0, -1.0], [e, w / e, e])


def gen_jordan(n, lam, epsilon=1.0):
    """n x n upper bidiagonal matrix with diagonal ``lam`` and superdiagonal
    ``epsilon`` (``epsilon=1`` is the usual Jordan block)."""
    if int(n) != n or n < 1:
        raise ParameterError(f"n must be a positive integer, got {n}")
    if epsilon == 0:
        raise ParameterError("epsilon must be nonzero")
    n = int(n)
    return _bidiagonal(np.full(n, float(lam)), np.full(n - 1, float(epsilon)))


def gen_alternating_bidiagonal(n, epsilon):
    """Bidiagonal matrix with diagonal (1, -1, 1, ...) and superdiagonal
    (eps, 1/eps, eps, ...). For n = 4 this is the Toh matrix with omega = 1."""
    if int(n) != n or n < 2:
        raise ParameterError(f"n must be an integer >= 2, got {n}")
    if not epsilon > 0:
        raise ParameterError(f"epsilon must be positive, got {epsilon}")
    n = int(n)
    diag = np.where(np.arange(n) % 2 == 0, 1.0, -1.0)
    sup = np.where(np.arange(n - 1) % 2 == 0, epsilon, 1.0 / epsilon)
    return _bidiagonal(diag, sup)


def gen_block_coupled(n, omega, epsilon):
    """The 2n x 2n matrix [[J(1, eps), omega*E], [0, J(-1, eps)]].

    ``E`` is n x n with the single nonzero entry 1/eps in its bottom-left
    corner, so the coupling sits at global position (n-1, n).
    """
    if int(n) != n or n < 2:
        raise ParameterError(f"block size n must be an integer >= 2, got {n}")
    if not omega > 0 or not epsilon > 0:
        raise ParameterError("omega and epsilon must be positive")
    n = int(n)
    A = np.zeros((2 * n, 2 * n))
    A[:n, :n] = gen_jordan(n, 1.0, epsilon)
    A[n:, n:] = gen_jordan(n, -1.0, epsilon)
    A[n - 1, n] = omega / epsilon
    return A


def block_diag_double(A):
    """Return [[A, 0], [0, A]]."""
    A = np.asarray(A)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ParameterError("block_diag_double expects a square matrix")
    n = A.shape[0]
    B = np.zeros((2 * n, 2 * n), dtype=A.dtype)
    B[:n, :n] = A
    B[n:, n:] = A
    return B


def toh_flip_matrix():
    """The signed anti-diagonal Q with A(w, e) = -Q A(w, e)^T Q^T."""
    Q = np.zeros((4, 4))
    Q[0, 3] = 1.0
    Q[1, 2] = -1.0
    Q[2, 1] = 1.0
    Q[3, 0] = -1.0
    return Q


# ---------------------------------------------------------------------------
# Matrix Market I/O
# ---------------------------------------------------------------------------

_FIELDS = ("real", "complex", "integer", "double")


def _fmt(x):
    return format(float(x), ".17g")


def write_matrix(A, path, *, fmt="array"):
    """Write a dense matrix (real or complex) in Matrix Market text format.

    ``fmt`` is ``"array"`` (column-major dense) or ``"coordinate"``
    (nonzeros only). Values are written with 17 significant digits so that a
    round trip is exact.
    """
    Path(path).write_text(format_matrix(A, fmt=fmt))


def format_matrix(A, *, fmt="array"):
    """Matrix Market text for ``A``, as written by :func:`write_matrix`."""
    A = np.atleast_2d(np.asarray(A))
    if A.ndim != 2:
        raise ValueError("write_matrix expects a 2-D array")
    field = "complex" if np.iscomplexobj(A) else "real"
    m, n = A.shape
    lines = [f"%%MatrixMarket matrix {fmt} {field} general"]

    def entry(z):
        if field == "complex":
            return f"{_fmt(z.real)} {_fmt(z.imag)}"
        return _fmt(z)

    if fmt == "array":
        lines.append(f"{m} {n}")
        for j in range(n):
            for i in range(m):
                lines.append(entry(A[i, j]))
    elif fmt == "coordinate":
        rows, cols = np.nonzero(A)
        order = np.lexsort((rows, cols))
        lines.append(f"{m} {n} {len(rows)}")
        for idx in order:
            i, j = rows[idx], cols[idx]
            lines.append(f"{i + 1} {j + 1} {entry(A[i, j])}")
    else:
        raise ValueError(f"unknown Matrix Market format {fmt!r}")
    return "\n".join(lines) + "\n"


def _parse_numbers(tokens, count, lineno, kind=float):
    if len(tokens) != count:
        raise MatrixFormatError(
            f"expected {count} value(s), found {len(tokens)}", lineno
        )
    try:
        return [kind(t) for t in tokens]
    except ValueError as exc:
        raise MatrixFormatError(str(exc), lineno) from None


def _read_mm(path):
    text = Path(path).read_text().splitlines()
    if not text:
        raise MatrixFormatError("empty file", 1)
    header = text[0].split()
    if len(header) != 5 or header[0].lower() != "%%matrixmarket":
        raise MatrixFormatError("missing %%MatrixMarket header", 1)
    obj, fmt, field, symm = (h.lower() for h in header[1:])
    if obj not in ("matrix", "vector"):
        raise MatrixFormatError(f"unsupported object {obj!r}", 1)
    if fmt not in ("array", "coordinate"):
        raise MatrixFormatError(f"unsupported format {fmt!r}", 1)
    if field not in _FIELDS:
        raise MatrixFormatError(f"unsupported field {field!r}", 1)
    if symm != "general":
        raise MatrixFormatError(f"only 'general' symmetry is supported, got {symm!r}", 1)

    body = [
        (i + 1, line.split())
        for i, line in enumerate(text)
        if i > 0 and line.strip() and not line.lstrip().startswith("%")
    ]
    if not body:
        raise MatrixFormatError("missing size line", len(text))
    size_line, size_tokens = body[0]
    entries = body[1:]
    ncomp = 2 if field == "complex" else 1
    dtype = complex if field == "complex" else float

    if fmt == "array":
        m, n = _parse_numbers(size_tokens, 2, size_line, int)
        if len(entries) != m * n:
            last = entries[-1][0] if entries else size_line
            raise MatrixFormatError(
                f"array of size {m}x{n} needs {m * n} entries, found {len(entries)}",
                last,
            )
        vals = np.empty(m * n, dtype=dtype)
        for idx, (lineno, toks) in enumerate(entries):
            nums = _parse_numbers(toks, ncomp, lineno)
            vals[idx] = complex(nums[0], nums[1]) if ncomp == 2 else nums[0]
        A = vals.reshape((n, m)).T.copy()
    else:
        m, n, nnz = _parse_numbers(size_tokens, 3, size_line, int)
        if len(entries) != nnz:
            last = entries[-1][0] if entries else size_line
            raise MatrixFormatError(
                f"header declares {nnz} entries, found {len(entries)}", last
            )
        A = np.zeros((m, n), dtype=dtype)
        for lineno, toks in entries:
            if len(toks) != 2 + ncomp:
                raise MatrixFormatError(
                    f"expected {2 + ncomp} tokens, found {len(toks)}", lineno
                )
            i, j = _parse_numbers(toks[:2], 2, lineno, int)
            if not (1 <= i <= m and 1 <= j <= n):
                raise MatrixFormatError(f"index ({i}, {j}) out of range", lineno)
            nums = _parse_numbers(toks[2:], ncomp, lineno)
            A[i - 1, j - 1] = complex(nums[0], nums[1]) if ncomp == 2 else nums[0]
    return A


def read_matrix(path):
    """Read a square operator matrix from a Matrix Market file."""
    A = _read_mm(path)
    if A.shape[0] == 0 or A.shape[1] == 0:
        raise MatrixFormatError("operator matrix must not be empty")
    if A.shape[0] != A.shape[1]:
        raise MatrixFormatError(f"operator matrix must be square, got {A.shape}")
    return A


def write_vector(v, path):
    """Write a vector as a single-column Matrix Market array."""
    write_matrix(np.asarray(v).reshape(-1, 1), path)


def read_vector(path):
    A = _read_mm(path)
    if A.shape[1] != 1 and A.shape[0] != 1:
        raise MatrixFormatError(f"expected a single column, got shape {A.shape}")
    return A.ravel()
