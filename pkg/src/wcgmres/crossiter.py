"""Cross iterations: alternating GMRES sweeps with A and A^T.

Starting from a unit vector b, one sweep of the first variant computes
``r = GMRES(A, b, k)`` and ``s = GMRES(A^T, r/||r||, k)`` and continues from
``s/||s||``. The norms interlace, ||r_1|| <= ||s_1|| <= ||r_2|| <= ..., and are
bounded by the worst-case value, so each run ends on a vector satisfying the
cross equality. The second variant applies both A and A^T to the current
vector and keeps the larger residual.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .krylov import DegenerateVectorError, _gmres_core

__all__ = [
    "CrossTrace",
    "CrossEqualityCheck",
    "cross_iterations_1",
    "cross_iterations_2",
    "satisfies_cross_equality",
    "normalize_sign",
    "random_unit_vectors",
]


@dataclass
class CrossTrace:
    k: int
    r_norms: list = field(default_factory=list)
    s_norms: list = field(default_factory=list)
    final_vector: np.ndarray = None
    converged: bool = False
    seed: int = None

    @property
    def iterations(self):
        return len(self.r_norms)

    @property
    def limit(self):
        """Last computed norm of the trace."""
        if self.s_norms:
            return self.s_norms[-1]
        return self.r_norms[-1]

    def interleaved(self):
        """The sequence r_1, s_1, r_2, s_2, ... (just r_j for variant 2)."""
        if not self.s_norms:
            return list(self.r_norms)
        out = []
        for r, s in zip(self.r_norms, self.s_norms):
            out.extend((r, s))
        return out

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["j", "r_norm", "s_norm"])
            for j, r in enumerate(self.r_norms, start=1):
                s = self.s_norms[j - 1] if self.s_norms else ""
                w.writerow([j, format(r, ".17g"), s if s == "" else format(s, ".17g")])


@dataclass
class CrossEqualityCheck:
    holds: bool
    defect: float
    residual_norm: float

    def __bool__(self):
        return self.holds


def normalize_sign(v, threshold=1e-14):
    """Flip ``v`` so that its largest-magnitude component is positive."""
    v = np.asarray(v)
    i = int(np.argmax(np.abs(v)))
    if abs(v[i]) > threshold and np.real(v[i]) < 0:
        return -v
    return v


def random_unit_vectors(n, count, seed):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((count, n))
    return X / np.linalg.norm(X, axis=1, keepdims=True)


def _gmres_step(A, b, k):
    r, _, _, broke = _gmres_core(A, b, k)
    rn = np.linalg.norm(r)
    if broke or rn <= 1e-14 * np.linalg.norm(b):
        raise DegenerateVectorError(
            "GMRES residual vanished: d(A, b) <= k for the current vector"
        )
    return r, rn


def _check_start(b0):
    b0 = np.asarray(b0, dtype=float)
    nb = np.linalg.norm(b0)
    if abs(nb - 1.0) > 1e-10:
        raise ValueError(f"starting vector must have unit norm, got {nb}")
    return b0 / nb


def cross_iterations_1(A, b0, k, tol=1e-12, max_iter=500, step_tol=1e-10, seed=None):
    """Alternating A / A^T GMRES sweeps.

    Converged when ``s_j - r_j < tol * s_j`` and the vector moved by less
    than ``step_tol`` in the last sweep.
    """
    A = np.asarray(A, dtype=float)
    At = A.T.copy()
    b = _check_start(b0)
    trace = CrossTrace(k=k, seed=seed)
    for _ in range(max_iter):
        r, rn = _gmres_step(A, b, k)
        s, sn = _gmres_step(At, r / rn, k)
        b_new = s / sn
        trace.r_norms.append(float(rn))
        trace.s_norms.append(float(sn))
        step = np.linalg.norm(b_new - b)
        b = b_new
        if sn - rn < tol * sn and step <= step_tol:
            trace.converged = True
            break
    trace.final_vector = normalize_sign(b)
    return trace


def cross_iterations_2(A, b0, k, tol=1e-12, max_iter=500, step_tol=1e-10, seed=None):
    """Greedy variant: keep whichever of GMRES(A, b) and GMRES(A^T, b) has
    the larger residual norm (ties keep the A residual).

    The normalized A-side residual is a candidate vector for A^T, so when
    the last kept residual came from A the returned ``final_vector`` is the
    iterate it was computed from.
    """
    A = np.asarray(A, dtype=float)
    At = A.T.copy()
    b = _check_start(b0)
    trace = CrossTrace(k=k, seed=seed)
    # at a cross-equality vector the iterates alternate between b and
    # r/||r||, so movement is measured against the iterate two sweeps back
    history = [b]
    for _ in range(max_iter):
        v, vn = _gmres_step(A, b, k)
        w, wn = _gmres_step(At, b, k)
        from_a = not vn < wn
        t, tn = (v, vn) if from_a else (w, wn)
        trace.r_norms.append(float(tn))
        b = t / tn
        history.append(b)
        if len(trace.r_norms) >= 2 and len(history) >= 3:
            gap = tn - trace.r_norms[-2]
            old = history[-3]
            step = min(np.linalg.norm(b - old), np.linalg.norm(b + old))
            if gap < tol * tn and step <= step_tol:
                trace.converged = True
                break
        history = history[-3:]
    trace.final_vector = normalize_sign(history[-2] if from_a else b)
    return trace


def satisfies_cross_equality(A, b, k, tol=1e-8):
    """Test b in K_{k+1}(A^T, r_k) with r_k = GMRES(A, b, k).

    ``defect`` is ||b - P b|| / ||b|| for the orthogonal projector P onto
    that Krylov space.
    """
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    r, rn = _gmres_step(A, b, k)
    n = A.shape[0]
    X = np.empty((n, k + 1))
    x = r / rn
    for j in range(k + 1):
        X[:, j] = x
        x = A.T @ x
        x = x / np.linalg.norm(x)
    Q, _ = np.linalg.qr(X)
    Q = Q[:, : min(k + 1, n)]
    # reorthogonalized projection of b
    p = Q @ (Q.T @ b)
    defect = float(np.linalg.norm(b - p) / np.linalg.norm(b))
    return CrossEqualityCheck(defect <= tol, defect, float(rn))
