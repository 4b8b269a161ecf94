"""Worst-case GMRES: maximize the k-th GMRES residual norm over unit vectors.

The objective is ``G(v) = g(v)/||v||^2`` with ``g(v) = min_c ||p(A; c) v||^2``.
Because the inner minimizer c = gamma(v) zeroes the c-gradient, the gradient
of G is the Rayleigh-quotient gradient of ``p(A;c)^T p(A;c)``::

    grad G(v) = 2/||v||^2 * (p(A;c)^T p(A;c) v - G(v) v)

which is tangential to the sphere. Stationary points are exactly unit
vectors that are right singular vectors of their own GMRES residual matrix.

The solver is multi-start projected gradient ascent. The returned ``psi`` is
the best local maximum found, a lower bound on the true worst-case value.
"""
from __future__ import annotations

import json
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .crossiter import (
    cross_iterations_1,
    cross_iterations_2,
    normalize_sign,
    satisfies_cross_equality,
)
from .krylov import (
    DegenerateVectorError,
    _gmres_core,
    check_nonsingular,
    krylov_matrix,
    min_poly_degree,
    poly_matrix,
)
from .matgen import toh_flip_matrix

__all__ = [
    "CertificationError",
    "WorstCaseConfig",
    "WorstCaseSolution",
    "AscentResult",
    "CertificateReport",
    "eval_f",
    "eval_G_and_grad",
    "sphere_ascent",
    "solve_worst_case",
    "certify_worst_case",
    "toh_conjugate_solution",
    "psi_transpose_gap",
]

_EPS = np.finfo(float).eps


class CertificationError(RuntimeError):
    pass


@dataclass(frozen=True)
class WorstCaseConfig:
    n_random_starts: int = 16
    n_cross_starts: int = 4
    cross_sweeps: int = 25
    ascent_tol: float = 1e-10
    max_ascent_iters: int = 2000
    seed: int = 0
    cert_tol: float = 1e-8
    threads: int = 1


@dataclass
class WorstCaseSolution:
    psi: float
    witness: np.ndarray
    coeffs: np.ndarray
    grad_c_norm: float
    grad_v_norm: float
    singvec_residual: float
    starts_used: int
    best_start_kind: str
    k: int
    certified: bool = False
    degenerate: bool = False
    config: WorstCaseConfig = None
    # distinct local maxima found at the top value (psi, witness, coeffs)
    top_solutions: list = field(default_factory=list)

    def to_dict(self):
        return {
            "psi": float(self.psi),
            "k": int(self.k),
            "witness": [float(x) for x in self.witness],
            "coeffs": [float(x) for x in self.coeffs],
            "polynomial_ascending": [1.0] + [-float(x) for x in self.coeffs],
            "certificates": {
                "grad_c_norm": float(self.grad_c_norm),
                "grad_v_norm": float(self.grad_v_norm),
                "singvec_residual": float(self.singvec_residual),
                "certified": bool(self.certified),
            },
            "degenerate": bool(self.degenerate),
            "starts_used": int(self.starts_used),
            "best_start_kind": self.best_start_kind,
            "n_top_solutions": len(self.top_solutions),
            "seed": None if self.config is None else self.config.seed,
            "config": None if self.config is None else asdict(self.config),
        }

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), indent=2, **kw)


@dataclass
class AscentResult:
    vector: np.ndarray
    value: float
    grad_norm: float
    iterations: int
    history: list = None


def eval_f(A, c, v):
    """f(c, v) = ||v - K(v) c||^2 = ||p(A; c) v||^2."""
    c = np.atleast_1d(np.asarray(c))
    K = krylov_matrix(A, np.asarray(v), len(c)).columns
    r = v - K @ c
    return float(np.real(np.vdot(r, r)))


def _apply_poly_transpose(A, c, x):
    """p(A; c)^T x without forming p(A; c)."""
    out = x.copy()
    y = x
    At = A.T
    for cj in c:
        y = At @ y
        out = out - cj * y
    return out


def _G_grad(A, v, k):
    r, c, _, broke = _gmres_core(A, v, k)
    nv2 = float(v @ v)
    g = float(r @ r)
    if broke or g <= (1e-14) ** 2 * nv2:
        raise DegenerateVectorError("v lies in the degenerate set (d(A, v) <= k)")
    G = g / nv2
    grad = (2.0 / nv2) * (_apply_poly_transpose(A, c, r) - G * v)
    return G, grad, c, r


def eval_G_and_grad(A, v, k):
    """Value of G(v) = g(v)/||v||^2 and its gradient."""
    A = np.asarray(A, dtype=float)
    v = np.asarray(v, dtype=float)
    G, grad, _, _ = _G_grad(A, v, k)
    return G, grad


def sphere_ascent(A, k, v0, tol=1e-10, max_iters=2000, record=False):
    """Projected gradient ascent of G on the unit sphere.

    Barzilai-Borwein trial steps with Armijo backtracking along the
    normalized path. Near the optimum the Armijo gain drops below the
    rounding level of G, so a step is also accepted when G is unchanged to
    rounding and the gradient norm decreases.
    """
    A = np.asarray(A, dtype=float)
    v = np.asarray(v0, dtype=float)
    v = v / np.linalg.norm(v)
    G, grad, _, _ = _G_grad(A, v, k)
    history = [G] if record else None
    t = 1.0
    prev = None
    it = 0
    gn = np.linalg.norm(grad)
    for it in range(max_iters):
        if gn <= tol:
            break
        if prev is not None:
            s = v - prev[0]
            y = prev[1] - grad
            sy = s @ y
            t = (s @ s) / sy if sy > 0 else 2.0 * t
            t = min(max(t, 1e-8), 1e8)
        while True:
            w = v + t * grad
            w /= np.linalg.norm(w)
            try:
                G2, grad2, _, _ = _G_grad(A, w, k)
            except DegenerateVectorError:
                G2, grad2 = -np.inf, grad
            if G2 >= G + 1e-4 * t * gn * gn:
                break
            if G2 >= G - 8 * _EPS * abs(G) and np.linalg.norm(grad2) < gn:
                break
            if t < 1e-16:
                break
            t *= 0.5
        if not np.isfinite(G2):
            break
        prev = (v, grad)
        v, G, grad = w, G2, grad2
        gn = np.linalg.norm(grad)
        if record:
            history.append(G)
    else:
        it = max_iters
    return AscentResult(v, float(G), float(gn), it, history)


def _solution_at(A, k, v, *, starts_used=1, kind="user", config=None, cert_tol=1e-8):
    v = np.asarray(v, dtype=float)
    v = normalize_sign(v / np.linalg.norm(v))
    G, grad, c, r = _G_grad(A, v, k)
    K = krylov_matrix(A, v, k).columns
    grad_c = -2.0 * K.T @ r
    P = poly_matrix(A, c)
    singvec = np.linalg.norm(P.T @ (P @ v) - G * v)
    psi = float(np.sqrt(G))
    gv = float(np.linalg.norm(grad))
    certified = gv <= cert_tol and singvec <= max(cert_tol, 1e-8 * G)
    return WorstCaseSolution(
        psi=psi,
        witness=v,
        coeffs=c,
        grad_c_norm=float(np.linalg.norm(grad_c)),
        grad_v_norm=gv,
        singvec_residual=float(singvec),
        starts_used=starts_used,
        best_start_kind=kind,
        k=k,
        certified=bool(certified),
        config=config,
    )


def _start_vectors(A, k, config, user_starts):
    n = A.shape[0]
    rng = np.random.default_rng(config.seed)
    starts = [("random", rng.standard_normal(n)) for _ in range(config.n_random_starts)]
    cross_rng = np.random.default_rng([config.seed, 1])
    for _ in range(config.n_cross_starts):
        b = cross_rng.standard_normal(n)
        b /= np.linalg.norm(b)
        try:
            tr = cross_iterations_2(A, b, k, max_iter=config.cross_sweeps)
            starts.append(("cross_iter", tr.final_vector))
        except DegenerateVectorError:
            continue
    for u in user_starts or ():
        starts.append(("user", np.asarray(u, dtype=float)))
    return starts


def _refine(A, k, v, config, noise_seed):
    try:
        return sphere_ascent(A, k, v, config.ascent_tol, config.max_ascent_iters)
    except DegenerateVectorError:
        rng = np.random.default_rng(noise_seed)
        w = v / np.linalg.norm(v) + 1e-8 * rng.standard_normal(v.shape[0])
        try:
            return sphere_ascent(A, k, w, config.ascent_tol, config.max_ascent_iters)
        except DegenerateVectorError:
            return None


def solve_worst_case(A, k, config=None, starts=None, **overrides):
    """Multi-start maximization of the k-th GMRES residual norm over unit vectors.

    ``starts`` are extra user-supplied start vectors, tried after the seeded
    random and cross-iteration starts. Keyword overrides update ``config``.
    """
    A = np.asarray(A, dtype=float)
    config = replace(config or WorstCaseConfig(), **overrides)
    n = A.shape[0]
    if int(k) != k or not 1 <= k <= n:
        raise ValueError(f"k must satisfy 1 <= k <= n = {n}, got {k}")
    check_nonsingular(A)
    d = min_poly_degree(A)
    if k >= d:
        v = np.zeros(n)
        v[0] = 1.0
        r, c, _, _ = _gmres_core(A, v, k)
        return WorstCaseSolution(
            0.0, v, c, 0.0, 0.0, 0.0, 0, "user", k,
            certified=True, degenerate=True, config=config,
        )

    start_list = _start_vectors(A, k, config, starts)

    def work(item):
        idx, (_, v) = item
        return _refine(A, k, v, config, noise_seed=[config.seed, 2, idx])

    items = list(enumerate(start_list))
    if config.threads > 1:
        with ThreadPoolExecutor(config.threads) as pool:
            results = list(pool.map(work, items))
    else:
        results = [work(it) for it in items]

    best_idx = None
    for idx, res in enumerate(results):
        if res is None:
            continue
        if best_idx is None or res.value > results[best_idx].value * (1 + 1e-12):
            best_idx = idx
    if best_idx is None:
        raise DegenerateVectorError("every start was degenerate")

    best = results[best_idx]
    used = sum(r is not None for r in results)
    sol = _solution_at(
        A, k, best.vector, starts_used=used, kind=start_list[best_idx][0],
        config=config, cert_tol=config.cert_tol,
    )

    top = []
    for res in results:
        if res is None or res.value < best.value * (1 - 1e-9):
            continue
        cand = _solution_at(A, k, res.vector, cert_tol=config.cert_tol)
        if all(np.linalg.norm(cand.coeffs - t.coeffs) > 1e-6 for t in top):
            top.append(cand)
    sol.top_solutions = top

    if not sol.certified:
        warnings.warn(
            f"worst-case solve not certified: tangential gradient {sol.grad_v_norm:.2e}",
            RuntimeWarning,
            stacklevel=2,
        )
    return sol


@dataclass
class CertificateReport:
    singvec_residual: float
    singvec_ok: bool
    inner_min_gap: float
    cross_defect: float
    cross_ok: bool
    r_norm: float
    s_norm: float
    chain_gap: float
    chain_ok: bool
    transpose_gap: float
    transpose_ok: bool
    singular_index: int
    singular_values: np.ndarray

    @property
    def passed(self):
        return self.singvec_ok and self.cross_ok and self.chain_ok and self.transpose_ok

    def to_dict(self):
        d = asdict(self)
        d["singular_values"] = [float(s) for s in self.singular_values]
        d["passed"] = self.passed
        return d


def certify_worst_case(A, sol, k=None, *, tol=1e-8, transpose_tol=1e-6,
                       check_transpose=True, transpose_config=None):
    """Recheck a worst-case solution against the characterizations.

    Reports the singular-vector identity p^T p b = psi^2 b, the cross
    equality of the witness, the norms of one A / A^T sweep (both equal to
    psi), the transpose gap from a fresh solve on A^T, and the 1-based index
    of psi among the singular values of p(A; c) in descending order.
    """
    A = np.asarray(A, dtype=float)
    k = sol.k if k is None else k
    b = np.asarray(sol.witness, dtype=float)
    b = b / np.linalg.norm(b)
    c = np.asarray(sol.coeffs)
    P = poly_matrix(A, c)
    psi2 = sol.psi ** 2
    singvec = float(np.linalg.norm(P.T @ (P @ b) - psi2 * b))
    _, gamma, _, _ = _gmres_core(A, b, k)
    inner_gap = float(np.linalg.norm(gamma - c))

    chk = satisfies_cross_equality(A, b, k, tol=tol)
    tr = cross_iterations_1(A, b, k, max_iter=1)
    r_norm, s_norm = tr.r_norms[0], tr.s_norms[0]
    chain_gap = max(abs(s_norm - r_norm), abs(r_norm - sol.psi))

    if check_transpose:
        cfg = transpose_config or sol.config or WorstCaseConfig()
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            psi_t = solve_worst_case(A.T, k, cfg).psi
        tgap = abs(psi_t - sol.psi)
    else:
        tgap = 0.0

    s = np.linalg.svd(P, compute_uv=False)
    idx = int(np.argmin(np.abs(s - sol.psi))) + 1
    return CertificateReport(
        singvec_residual=singvec,
        singvec_ok=singvec <= max(tol, 1e-8 * psi2),
        inner_min_gap=inner_gap,
        cross_defect=chk.defect,
        cross_ok=chk.holds,
        r_norm=r_norm,
        s_norm=s_norm,
        chain_gap=chain_gap,
        chain_ok=chain_gap <= max(tol, 1e-10),
        transpose_gap=float(tgap),
        transpose_ok=tgap <= transpose_tol,
        singular_index=idx,
        singular_values=s,
    )


def toh_conjugate_solution(A, sol, tol=1e-8):
    """Partner solution with polynomial p(-z) for a Toh matrix.

    With A = -Q A^T Q^T and p(A) = U S V^T, the matrix p(-A) equals
    (Q^T V) S (Q^T U)^T, so Q^T u (u the left singular vector paired with
    the witness) is a worst-case vector for p(-z).
    """
    A = np.asarray(A, dtype=float)
    Q = toh_flip_matrix()
    if A.shape != (4, 4) or not np.allclose(-Q @ A.T @ Q.T, A, rtol=0, atol=1e-12):
        raise ValueError("toh_conjugate_solution expects a Toh matrix A(omega, eps)")
    if sol.degenerate or sol.singvec_residual > max(tol, 1e-8 * sol.psi ** 2):
        raise CertificationError("input solution is not a certified worst-case point")
    P = poly_matrix(A, sol.coeffs)
    U, s, Vt = np.linalg.svd(P)
    j = int(np.argmax(np.abs(Vt @ sol.witness)))
    u = U[:, j]
    w = Q.T @ u
    new = _solution_at(A, sol.k, w, starts_used=sol.starts_used,
                       kind=sol.best_start_kind, config=sol.config)
    signs = np.array([(-1.0) ** (j + 1) for j in range(len(sol.coeffs))])
    expected = signs * sol.coeffs
    if abs(new.psi - sol.psi) > 1e-8 or np.linalg.norm(new.coeffs - expected) > 1e-6:
        raise CertificationError(
            "conjugate vector does not reproduce the worst-case value; "
            "the input solution is probably not at the worst-case value"
        )
    return new


def psi_transpose_gap(A, k, config=None):
    """|psi(A) - psi(A^T)| from two independent solves."""
    A = np.asarray(A, dtype=float)
    if np.array_equal(A, A.T):
        return 0.0
    return abs(solve_worst_case(A, k, config).psi - solve_worst_case(A.T, k, config).psi)
