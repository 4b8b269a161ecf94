"""Real and complex variants of the worst-case problem.

``Psi_{k,K,F}(A)`` takes polynomial coefficients over K and initial vectors
over F. For real A and ``b = u + i w`` the real-coefficient residual satisfies

    ||p(A) b||^2 = ||p(A) u||^2 + ||p(A) w||^2 = ||p(B) [u; w]||^2,

with ``B = diag(A, A)``, so the real-coefficient / complex-vector variant is
an ordinary real worst-case problem for B. The complex/complex variant is only
bounded from below by sampling.
"""
from __future__ import annotations

import csv
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np
import scipy.optimize

from .idealsolver import IdealSolution, solve_ideal
from .krylov import gmres_residual, gmres_residual_complex, poly_matrix
from .matgen import block_diag_double
from .wcsolver import WorstCaseConfig, solve_worst_case

__all__ = [
    "PairingAmbiguityError",
    "ThetaSweepRow",
    "Lemma63Report",
    "VariantAudit",
    "psi_real_complex_via_embedding",
    "lemma63_witness_check",
    "theta_sweep",
    "write_theta_csv",
    "psi_variant_inequality_audit",
]


class PairingAmbiguityError(ValueError):
    """The top singular subspace cannot be split into the expected pairs."""


@dataclass
class ThetaSweepRow:
    theta: float
    value: float
    excess: float


def psi_real_complex_via_embedding(A, k, config=None, starts=None):
    """Worst case over complex unit vectors with real coefficients."""
    A = np.asarray(A)
    if np.iscomplexobj(A):
        raise ValueError("the embedding identity needs a real matrix")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        sol = solve_worst_case(block_diag_double(A), k, config, starts=starts)
    return sol.psi


# ---------------------------------------------------------------------------
# witness built from the two top singular pairs of the ideal polynomial
# ---------------------------------------------------------------------------


@dataclass
class Lemma63Report:
    sigma: float
    norm_error: float
    ortho_sums: np.ndarray
    first_terms: tuple
    gmres_value: float
    gmres_error: float
    witness: np.ndarray
    right: np.ndarray
    left: np.ndarray
    tol: float

    @property
    def passed(self):
        return (self.norm_error <= self.tol
                and np.max(np.abs(self.ortho_sums)) <= self.tol
                and self.gmres_error <= self.tol)

    def to_dict(self):
        return {
            "sigma": self.sigma,
            "norm_error": self.norm_error,
            "ortho_sums": [float(x) for x in self.ortho_sums],
            "first_terms": [float(x) for x in self.first_terms],
            "gmres_value": self.gmres_value,
            "gmres_error": self.gmres_error,
            "witness": [float(x) for x in self.witness],
            "passed": self.passed,
        }


def _vector_with_zeros(V, zero_rows, tol):
    """Unit combination of the columns of V vanishing on ``zero_rows``."""
    _, s, Wt = np.linalg.svd(V[zero_rows, :])
    if s[-1] > tol:
        raise PairingAmbiguityError(
            f"no vector in the top singular subspace vanishes on rows {zero_rows} "
            f"(smallest singular value {s[-1]:.2e})"
        )
    v = V @ Wt[-1]
    v /= np.linalg.norm(v)
    i = int(np.argmax(np.abs(v)))
    return -v if v[i] < 0 else v


def lemma63_witness_check(A, tol=1e-8, ideal=None, scale=1.0):
    """Build ``w = [v1; v2] / ||.||`` from the ideal polynomial of a Toh
    matrix and test that it attains phi_3 for ``B = diag(A, A)``.

    The twofold top right singular subspace is rotated so that ``v1`` is
    supported on rows {1, 3} and ``v2`` on rows {0, 2} (0-based). The report
    holds the three checks: ||p*(B) w|| = sigma, the sums
    u1^T A^j v1 + u2^T A^j v2 = 0 for j = 1, 2, 3, and the GMRES value.
    ``scale`` multiplies w, for testing homogeneity.
    """
    A = np.asarray(A, dtype=float)
    if A.shape != (4, 4):
        raise ValueError("the witness check is defined for 4 x 4 Toh matrices")
    if ideal is None:
        ideal = solve_ideal(A, 3)
    P = poly_matrix(A, ideal.coeffs)
    U, s, Vt = np.linalg.svd(P)
    sigma = float(s[0])
    if s[1] < sigma * (1 - 1e-6) or s[2] > sigma * (1 - 1e-6):
        raise PairingAmbiguityError(
            f"top singular value is not twofold: {s[:3]}"
        )
    V = Vt[:2].T
    sub_tol = max(1e-6, 100 * tol)
    v1 = _vector_with_zeros(V, [0, 2], sub_tol)
    v2 = _vector_with_zeros(V, [1, 3], sub_tol)
    u1 = P @ v1 / sigma
    u2 = P @ v2 / sigma

    B = block_diag_double(A)
    w = scale * np.concatenate([v1, v2]) / np.sqrt(2.0)
    PB = poly_matrix(B, ideal.coeffs)
    norm_error = abs(np.linalg.norm(PB @ w) - sigma)

    sums = np.empty(3)
    x1, x2 = v1, v2
    terms = None
    for j in range(3):
        x1, x2 = A @ x1, A @ x2
        t1, t2 = u1 @ x1, u2 @ x2
        if j == 0:
            terms = (float(t1), float(t2))
        sums[j] = t1 + t2
    value = gmres_residual(B, w, 3).residual_norm
    return Lemma63Report(
        sigma=sigma,
        norm_error=float(norm_error),
        ortho_sums=sums,
        first_terms=terms,
        gmres_value=float(value),
        gmres_error=float(abs(value - sigma)),
        witness=w,
        right=np.column_stack([v1, v2]),
        left=np.column_stack([u1, u2]),
        tol=tol,
    )


# ---------------------------------------------------------------------------
# theta sweep
# ---------------------------------------------------------------------------


def theta_sweep(A, b, c_vec, k, n_theta=181, *, reference):
    """GMRES values for ``g = [cos(t) b; sin(t) c]`` with B = diag(A, A).

    ``reference`` is the worst-case value of A used for the ``excess``
    column; it is supplied by the caller.
    """
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    c_vec = np.asarray(c_vec, dtype=float)
    for name, x in (("b", b), ("c_vec", c_vec)):
        if abs(np.linalg.norm(x) - 1) > 1e-10:
            raise ValueError(f"{name} must be a unit vector")
    B = block_diag_double(A)
    rows = []
    for t in np.linspace(0.0, np.pi, n_theta):
        g = np.concatenate([np.cos(t) * b, np.sin(t) * c_vec])
        val = gmres_residual(B, g, k, check=False).residual_norm
        rows.append(ThetaSweepRow(float(t), float(val), float(val - reference)))
    return rows


def write_theta_csv(rows, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["theta", "value", "excess"])
        for r in rows:
            w.writerow([format(r.theta, ".17g"), format(r.value, ".17g"),
                        format(r.excess, ".17g")])


# ---------------------------------------------------------------------------
# inequality chain
# ---------------------------------------------------------------------------


@dataclass
class VariantAudit:
    psi_rr: float
    psi_cr: float
    psi_cc_lower: float
    psi_rc: float
    max_sample_cc: float
    max_sample_rc: float
    violations: list = field(default_factory=list)

    @property
    def margin(self):
        """psi_rc minus the largest sampled complex/complex value."""
        return self.psi_rc - self.psi_cc_lower

    @property
    def passed(self):
        return not self.violations

    def to_dict(self):
        d = asdict(self)
        d["margin"] = self.margin
        d["passed"] = self.passed
        return d


def _cc_value(A, x, k):
    n = A.shape[0]
    b = x[:n] + 1j * x[n:]
    return gmres_residual_complex(A, b / np.linalg.norm(b), k, "complex",
                                  check=False).residual_norm


def psi_variant_inequality_audit(A, k, config=None, n_samples=200, seed=0,
                                 n_refine=5, tol=1e-8):
    """Check Psi_RR = Psi_CR <= Psi_CC <= Psi_RC for real A.

    Psi_RR comes from the worst-case solver and Psi_RC from the embedding.
    Psi_CR is evaluated as the complex-coefficient GMRES value at the real
    witness. Psi_CC is bounded below by the largest complex-coefficient value
    over sampled complex vectors (the real witness included), refined by a
    few local searches.
    """
    A = np.asarray(A, dtype=float)
    n = A.shape[0]
    config = config or WorstCaseConfig(seed=seed)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        wc = solve_worst_case(A, k, config)
    psi_rr = wc.psi
    psi_rc = psi_real_complex_via_embedding(A, k, config)
    if wc.degenerate:
        return VariantAudit(0.0, 0.0, 0.0, psi_rc, 0.0, 0.0)

    psi_cr = gmres_residual_complex(A, wc.witness.astype(complex), k, "complex",
                                    check=False).residual_norm

    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n_samples, 2 * n))
    X = np.vstack([np.concatenate([wc.witness, np.zeros(n)]), X])
    cc = np.empty(len(X))
    rc = np.empty(len(X))
    violations = []
    for i, x in enumerate(X):
        b = x[:n] + 1j * x[n:]
        b /= np.linalg.norm(b)
        cc[i] = gmres_residual_complex(A, b, k, "complex", check=False).residual_norm
        rc[i] = gmres_residual_complex(A, b, k, "real", check=False).residual_norm
        if cc[i] > rc[i] + tol:
            violations.append(f"sample {i}: complex coefficients {cc[i]} > real {rc[i]}")
    max_cc, max_rc = float(cc.max()), float(rc.max())

    best = max_cc
    for i in np.argsort(cc)[::-1][:n_refine]:
        res = scipy.optimize.minimize(lambda x: -_cc_value(A, x, k), X[i],
                                      method="Nelder-Mead",
                                      options=dict(maxiter=2000, xatol=1e-10, fatol=1e-14))
        best = max(best, -res.fun)

    if abs(psi_cr - psi_rr) > tol:
        violations.append(f"Psi_CR {psi_cr} differs from Psi_RR {psi_rr}")
    if best > psi_rc + tol:
        violations.append(f"Psi_CC lower bound {best} exceeds Psi_RC {psi_rc}")
    if max_rc > psi_rc + tol:
        violations.append(f"sampled real-coefficient value {max_rc} exceeds Psi_RC {psi_rc}")
    if psi_rr > psi_rc + tol:
        violations.append(f"Psi_RR {psi_rr} exceeds Psi_RC {psi_rc}")
    return VariantAudit(psi_rr, float(psi_cr), float(best), psi_rc, max_cc, max_rc,
                        violations)
