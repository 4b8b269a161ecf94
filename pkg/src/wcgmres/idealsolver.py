"""Ideal GMRES: minimize ||p(A; c)|| over c, and decide whether it equals the
worst-case value.

``h(c) = sigma_max(p(A; c))`` is convex in c. Its subgradients at c are
``-(u^T A^j v)_j`` for unit top singular pairs (u, v); when the top singular
value is multiple the subdifferential is the set of
``-(tr(S sym(U^T A^j V)))_j`` over density matrices S on the top subspace.

The solver runs subgradient descent with a variable target level, then
polishes with the concave dual

    D(W) = min_c tr(p(A;c)^T p(A;c) W),   W >= 0, tr W = 1,

whose maximum is phi^2. Writing W = Y Y^T turns D into the worst-case GMRES
objective for kron(I, A) at vec(Y), so the same sphere ascent applies.
Every D(W) is a lower bound and every h(c) an upper bound on phi^2 and phi;
the reported ``duality_gap`` brackets the answer.
"""
from __future__ import annotations

import json
import warnings
from dataclasses import asdict, dataclass, replace

import numpy as np
import scipy.optimize

from .krylov import _gmres_core, check_nonsingular, min_poly_degree, poly_matrix
from .wcsolver import WorstCaseConfig, _G_grad, solve_worst_case, sphere_ascent

__all__ = [
    "IdealConfig",
    "IdealSolution",
    "SpectralEval",
    "EqualityCertificate",
    "FieldInvarianceReport",
    "eval_spectral_norm_poly",
    "min_norm_subgradient",
    "solve_ideal",
    "orthogonality_defect",
    "equality_certificate",
    "ideal_field_invariance_check",
]


@dataclass(frozen=True)
class IdealConfig:
    tol: float = 1e-12
    max_iters: int = 300
    seed: int = 0
    polish: bool = True
    polish_iters: int = 3000
    mult_tol: float = 1e-8


@dataclass
class IdealSolution:
    phi: float
    coeffs: np.ndarray
    sigma_gap: float
    subgrad_norm: float
    iterations: int
    k: int
    dual_value: float = 0.0
    dual_factor: np.ndarray = None
    multiplicity: int = 1
    singular_values: np.ndarray = None
    config: IdealConfig = None

    @property
    def duality_gap(self):
        return self.phi - self.dual_value

    def to_dict(self):
        return {
            "phi": float(self.phi),
            "k": int(self.k),
            "coeffs": [float(x) for x in self.coeffs],
            "polynomial_ascending": [1.0] + [-float(x) for x in self.coeffs],
            "sigma_gap": float(self.sigma_gap),
            "subgrad_norm": float(self.subgrad_norm),
            "dual_value": float(self.dual_value),
            "duality_gap": float(self.duality_gap),
            "multiplicity": int(self.multiplicity),
            "singular_values": [float(s) for s in self.singular_values],
            "iterations": int(self.iterations),
            "config": None if self.config is None else asdict(self.config),
        }

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), indent=2, **kw)


@dataclass
class SpectralEval:
    value: float
    right: np.ndarray
    left: np.ndarray
    multiplicity: int
    singular_values: np.ndarray


def eval_spectral_norm_poly(A, c, mult_tol=1e-8):
    """||p(A; c)|| with its top singular vectors.

    ``right``/``left`` hold the singular vectors (as columns) whose singular
    values lie within relative ``mult_tol`` of the largest one.
    """
    P = poly_matrix(np.asarray(A), np.asarray(c))
    U, s, Vt = np.linalg.svd(P)
    m = int(np.sum(s >= s[0] * (1 - mult_tol)))
    return SpectralEval(float(s[0]), Vt[:m].conj().T, U[:, :m], m, s)


def _project_spectraplex(S):
    w, Q = np.linalg.eigh((S + S.T) / 2)
    # Euclidean projection of the eigenvalues onto the probability simplex
    u = np.sort(w)[::-1]
    css = np.cumsum(u)
    rho = np.nonzero(u * np.arange(1, len(u) + 1) > css - 1)[0][-1]
    theta = (css[rho] - 1) / (rho + 1)
    w = np.maximum(w - theta, 0)
    return (Q * w) @ Q.T


def min_norm_subgradient(A, U, V, k, iters=500):
    """Minimal-norm element of the subdifferential of sigma_max.

    ``U``, ``V`` are the paired top left/right singular vectors (columns).
    Returns the subgradient vector and the density matrix S attaining it.
    """
    A = np.asarray(A)
    m = V.shape[1]
    Ms = []
    X = V
    for _ in range(k):
        X = A @ X
        M = U.T @ X
        Ms.append((M + M.T) / 2)
    Ms = np.array(Ms)  # (k, m, m)
    if m == 1:
        return -Ms[:, 0, 0], np.ones((1, 1))
    flat = Ms.reshape(k, -1)
    L = 2 * np.linalg.norm(flat, 2) ** 2 + 1e-300
    S = np.eye(m) / m
    Z, t = S, 1.0
    for _ in range(iters):
        g = -np.einsum("jab,ab->j", Ms, Z)
        grad = 2 * np.einsum("j,jab->ab", -g, Ms)
        S_new = _project_spectraplex(Z - grad / L)
        t_new = (1 + np.sqrt(1 + 4 * t * t)) / 2
        Z = S_new + (t - 1) / t_new * (S_new - S)
        S, t = S_new, t_new
    return -np.einsum("jab,ab->j", Ms, S), S


def _subgradient_phase(A, k, c0, iters, mult_tol, lower=0.0):
    c = c0.copy()
    best_c, best_h = c.copy(), np.inf
    delta = None
    stall = 0
    for it in range(iters):
        ev = eval_spectral_norm_poly(A, c, mult_tol)
        h = ev.value
        if h < best_h - 1e-15:
            best_h, best_c = h, c.copy()
            stall = 0
        else:
            stall += 1
        # worst-case value at the top right singular vector: a lower bound
        try:
            G = _G_grad(A, ev.right[:, 0], k)[0]
            lower = max(lower, float(np.sqrt(G)))
        except ValueError:
            pass
        if delta is None:
            delta = max((best_h - lower) / 2, 1e-3)
        if stall >= 10:
            delta /= 2
            stall = 0
        g, _ = min_norm_subgradient(A, ev.left, ev.right, k, iters=100)
        gn2 = float(g @ g)
        if gn2 < 1e-28 or best_h - lower < 1e-14:
            break
        level = max(lower, best_h - delta)
        c = c - max(h - level, 0.0) / gn2 * g
    return best_c, best_h, lower, it + 1


def _dual_polish(A, k, c, iters, tol):
    """Maximize D(Y Y^T) / ||Y||_F^2 starting from the top singular vectors
    of p(A; c): L-BFGS first, then a short sphere ascent."""
    n = A.shape[0]
    ev = eval_spectral_norm_poly(A, c, 1e-3)
    rng = np.random.default_rng(12345)
    Y = 1e-3 * rng.standard_normal((n, n))
    Y[:, : ev.multiplicity] += ev.right
    B = np.kron(np.eye(n), A)

    def negG(y):
        G, grad = _G_grad(B, y, k)[:2]
        return -G, -grad

    opt = scipy.optimize.minimize(
        negG, Y.T.ravel(), jac=True, method="L-BFGS-B",
        options=dict(maxiter=iters, ftol=1e-16, gtol=1e-14, maxcor=30),
    )
    y = opt.x / np.linalg.norm(opt.x)
    res = sphere_ascent(B, k, y, tol=tol, max_iters=500)
    if res.value >= -opt.fun:
        y = res.vector
    r, c_dual, _, _ = _gmres_core(B, y, k)
    return float(np.linalg.norm(r)), c_dual, y.reshape(n, n).T, opt.nit + res.iterations


def _local_step(A, k, c, sub_tol=1e-3):
    """One step of the dual restricted to the near-top right singular
    subspace V of p(A; c):

        max_Y min_d ||(p(A; c) - sum_j d_j A^j) V Y||_F^2 / ||Y||_F^2.

    Returns the corrected coefficients c + d and the restricted dual value.
    """
    ev = eval_spectral_norm_poly(A, c, sub_tol)
    V, m = ev.right, ev.multiplicity
    base = poly_matrix(A, c) @ V
    AjV = []
    X = V
    for _ in range(k):
        X = A @ X
        AjV.append(X)

    def fun(y, with_d=False):
        Y = y.reshape(m, m)
        K = np.column_stack([(M @ Y).ravel() for M in AjV])
        d = np.linalg.lstsq(K, (base @ Y).ravel(), rcond=None)[0]
        R = base - np.tensordot(d, np.array(AjV), axes=1)
        RY = R @ Y
        nY = np.sum(Y * Y)
        val = np.sum(RY * RY) / nY
        if with_d:
            return d, val
        return -val, -2 * (R.T @ RY - val * Y).ravel() / nY

    opt = scipy.optimize.minimize(
        fun, np.eye(m).ravel() / np.sqrt(m), jac=True, method="L-BFGS-B",
        options=dict(maxiter=500, ftol=1e-18, gtol=1e-15),
    )
    d, val = fun(opt.x, with_d=True)
    return c + d, float(np.sqrt(val))


def solve_ideal(A, k, config=None, **overrides):
    """Minimize sigma_max(p(A; c)) over real c in R^k."""
    A = np.asarray(A, dtype=float)
    config = replace(config or IdealConfig(), **overrides)
    n = A.shape[0]
    if int(k) != k or not 1 <= k <= n:
        raise ValueError(f"k must satisfy 1 <= k <= n = {n}, got {k}")
    check_nonsingular(A)
    if k >= min_poly_degree(A):
        raise ValueError(f"k = {k} >= d(A): the ideal GMRES value is zero")

    rng = np.random.default_rng(config.seed)
    v0 = rng.standard_normal(n)
    _, c0, _, _ = _gmres_core(A, v0, k)
    c, h, lower, iters = _subgradient_phase(A, k, c0, config.max_iters, config.mult_tol)

    dual_value, Y = lower, None
    if config.polish:
        dval, c_dual, Y, pit = _dual_polish(A, k, c, config.polish_iters, 1e-13)
        iters += pit
        dual_value = max(dual_value, dval)
        h_dual = eval_spectral_norm_poly(A, c_dual).value
        if h_dual <= h:
            c, h = c_dual, h_dual
        # Polyak steps towards the dual bound
        c2, h2, _, it2 = _subgradient_phase(A, k, c, 100, config.mult_tol, dual_value)
        iters += it2
        if h2 < h:
            c, h = c2, h2
    # local steps on the top singular subspace, kept only while h decreases
    for _ in range(10):
        try:
            c2, _ = _local_step(A, k, c)
        except np.linalg.LinAlgError:
            break
        h2 = eval_spectral_norm_poly(A, c2).value
        iters += 1
        if not h2 < h:
            break
        c, h = c2, h2

    ev = eval_spectral_norm_poly(A, c, config.mult_tol)
    g, _ = min_norm_subgradient(A, ev.left, ev.right, k)
    s = ev.singular_values
    sol = IdealSolution(
        phi=ev.value,
        coeffs=c,
        sigma_gap=float(s[0] - s[1]) if len(s) > 1 else float(s[0]),
        subgrad_norm=float(np.linalg.norm(g)),
        iterations=iters,
        k=int(k),
        dual_value=float(dual_value),
        dual_factor=Y,
        multiplicity=ev.multiplicity,
        singular_values=s,
        config=config,
    )
    if sol.duality_gap > max(1e-8, 1e3 * config.tol):
        warnings.warn(
            f"ideal solve stopped with duality gap {sol.duality_gap:.2e}",
            RuntimeWarning,
            stacklevel=2,
        )
    return sol


# ---------------------------------------------------------------------------
# equality of worst-case and ideal values
# ---------------------------------------------------------------------------


def orthogonality_defect(A, P, v, k):
    """max_j |<A^j v, P v>| / (||A^j v|| ||P v||) for j = 1..k."""
    r = P @ v
    rn = np.linalg.norm(r)
    x = v
    out = 0.0
    for _ in range(k):
        x = A @ x
        out = max(out, abs(np.vdot(x, r)) / (np.linalg.norm(x) * rn))
    return float(out)


def _defect_terms(A, P, v, k):
    r = P @ v
    rn = np.linalg.norm(r)
    x = v
    out = np.empty(k)
    for j in range(k):
        x = A @ x
        out[j] = (x @ r) / (np.linalg.norm(x) * rn)
    return out


@dataclass
class EqualityCertificate:
    status: str  # "equal", "strict" or "undecided"
    witness: np.ndarray
    min_defect: float
    multiplicity: int
    phi: float
    psi: float

    def to_dict(self):
        return {
            "status": self.status,
            "witness": [float(x) for x in self.witness],
            "min_defect": float(self.min_defect),
            "multiplicity": int(self.multiplicity),
            "phi": float(self.phi),
            "psi": float(self.psi),
        }


def _refine_in_subspace(A, P, V, k, a0):
    def resid(a):
        a = a / np.linalg.norm(a)
        return _defect_terms(A, P, V @ a, k)

    res = scipy.optimize.least_squares(resid, a0, xtol=1e-15, ftol=1e-15, gtol=1e-15)
    a = res.x / np.linalg.norm(res.x)
    return a


def equality_certificate(A, k, ideal, tol=1e-6, *, psi=None, worst_case=None,
                         wc_config=None, n_angles=720, seed=0):
    """Decide whether worst-case and ideal GMRES coincide at step k.

    Equality holds iff some maximal right singular vector v of the ideal
    residual matrix satisfies p(A) v orthogonal to A K_k(A, v). The top
    singular subspace is searched on a grid (an angular grid of ``n_angles``
    points when it is two-dimensional, random samples otherwise), followed by
    local least-squares refinement of the best candidates. ``strict`` also
    requires the worst-case value ``psi`` (solved if not given) to lie below
    ``phi - tol``.
    """
    A = np.asarray(A, dtype=float)
    config = ideal.config or IdealConfig()
    P = poly_matrix(A, ideal.coeffs)
    ev = eval_spectral_norm_poly(A, ideal.coeffs, config.mult_tol)
    V, m = ev.right, ev.multiplicity

    if worst_case is not None:
        psi, wc_witness = worst_case.psi, worst_case.witness
    elif psi is None:
        cfg = wc_config or WorstCaseConfig(seed=seed)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            wc = solve_worst_case(A, k, cfg, starts=list(V.T))
        psi, wc_witness = wc.psi, wc.witness
    else:
        wc_witness = None

    if m == 1:
        coords = [np.ones(1)]
    elif m == 2:
        th = np.linspace(0.0, np.pi, n_angles, endpoint=False)
        coords = list(np.column_stack([np.cos(th), np.sin(th)]))
    else:
        rng = np.random.default_rng(seed)
        X = rng.standard_normal((n_angles, m))
        coords = list(X / np.linalg.norm(X, axis=1, keepdims=True))
    if wc_witness is not None:
        a = V.T @ wc_witness
        if np.linalg.norm(a) > 1e-8:
            coords.append(a / np.linalg.norm(a))

    defects = np.array([orthogonality_defect(A, P, V @ a, k) for a in coords])
    order = np.argsort(defects)
    best_a, best_d = coords[order[0]], defects[order[0]]
    if m > 1:
        for idx in order[: min(5, len(order))]:
            a = _refine_in_subspace(A, P, V, k, coords[idx])
            d = orthogonality_defect(A, P, V @ a, k)
            if d < best_d:
                best_a, best_d = a, d

    witness = V @ best_a
    witness = witness / np.linalg.norm(witness)
    if best_d <= tol:
        status = "equal"
    elif best_d > 10 * tol and psi < ideal.phi - tol:
        status = "strict"
    else:
        status = "undecided"
    return EqualityCertificate(status, witness, float(best_d), m, ideal.phi, float(psi))


# ---------------------------------------------------------------------------
# real / complex invariance of the ideal value
# ---------------------------------------------------------------------------


@dataclass
class FieldInvarianceReport:
    phi: float
    values: dict  # variant -> (lower bound, upper bound)
    max_spread: float
    complex_vector_excess: float
    worst_violation: float
    imag_shift_value: float

    @property
    def passed(self):
        return self.max_spread <= 1e-8 and self.worst_violation <= 1e-8 \
            and self.complex_vector_excess <= 1e-8

    def to_dict(self):
        d = asdict(self)
        d["values"] = {k: list(v) for k, v in self.values.items()}
        d["passed"] = self.passed
        return d


def ideal_field_invariance_check(A, k, ideal=None, seed=0, n_samples=64, delta=0.1):
    """Check that the ideal value does not change with real/complex fields.

    Each of the four variants (coefficients over R or C, vectors over R or C)
    is bracketed between a dual lower bound, evaluated at the real optimal
    density matrix, and the primal value at the real optimal polynomial.
    Complex perturbations of the optimal coefficients must not lower the
    objective, and no complex unit vector may exceed the real spectral norm.
    """
    A = np.asarray(A, dtype=float)
    if ideal is None:
        ideal = solve_ideal(A, k, seed=seed)
    n = A.shape[0]
    c = np.asarray(ideal.coeffs, dtype=float)
    P = poly_matrix(A, c)
    phi = ideal.phi
    upper_real = float(np.linalg.svd(P, compute_uv=False)[0])
    upper_complex = float(np.linalg.svd(P.astype(complex), compute_uv=False)[0])

    Y = ideal.dual_factor
    if Y is None:
        Y = eval_spectral_norm_poly(A, c).right
    y = Y.T.ravel()
    y = y / np.linalg.norm(y)
    B = np.kron(np.eye(Y.shape[1]), A)
    r_real, _, _, _ = _gmres_core(B, y, k)
    r_cplx, _, _, _ = _gmres_core(B.astype(complex), y.astype(complex), k)
    lower_real = float(np.linalg.norm(r_real))
    lower_complex = float(np.linalg.norm(r_cplx))

    values = {
        "RR": (lower_real, upper_real),
        "RC": (lower_real, upper_complex),
        "CR": (lower_complex, upper_real),
        "CC": (lower_complex, upper_complex),
    }
    ends = [v for pair in values.values() for v in pair]
    spread = max(ends) - min(ends)

    rng = np.random.default_rng(seed)
    ev = eval_spectral_norm_poly(A, c, 1e-3)
    excess = 0.0
    for _ in range(n_samples):
        z = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        if rng.random() < 0.5:
            a = rng.standard_normal(ev.multiplicity) + 1j * rng.standard_normal(ev.multiplicity)
            z = ev.right @ a + 1e-3 * z
        z /= np.linalg.norm(z)
        excess = max(excess, np.linalg.norm(P @ z) - upper_real)

    worst = 0.0
    for _ in range(n_samples):
        d = rng.standard_normal(k) + 1j * rng.standard_normal(k)
        d *= delta * rng.random() / np.linalg.norm(d)
        h = np.linalg.svd(poly_matrix(A, c + d), compute_uv=False)[0]
        worst = max(worst, phi - h)
    e1 = np.zeros(k, dtype=complex)
    e1[0] = 1j * delta
    shift = float(np.linalg.svd(poly_matrix(A, c + e1), compute_uv=False)[0])
    worst = max(worst, phi - shift)
    return FieldInvarianceReport(phi, values, float(spread), float(max(excess, 0.0)),
                                 float(max(worst, 0.0)), shift)
