"""Named experiments with CSV / JSON artifacts.

Each experiment writes into ``<output_dir>/<name>/``:

* ``manifest.json`` with inputs, seed, tolerances and library versions,
* its CSV / JSON artifacts (byte-identical for identical configurations),
* ``run.log`` with wall-clock timestamps (the only non-deterministic file),
* ``FAILED`` listing the failed checks, when any check fails.
"""
from __future__ import annotations

import json
import platform
import time
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .crossiter import (cross_iterations_1, cross_iterations_2, random_unit_vectors,
                        satisfies_cross_equality)
from .fieldvariants import (psi_variant_inequality_audit, theta_sweep,
                            write_theta_csv)
from .idealsolver import (equality_certificate, eval_spectral_norm_poly,
                          ideal_field_invariance_check, solve_ideal)
from .matgen import gen_block_coupled, gen_jordan, gen_toh, read_matrix
from .wcsolver import (CertificationError, WorstCaseConfig, certify_worst_case,
                       solve_worst_case, toh_conjugate_solution)

__all__ = [
    "EXPERIMENTS",
    "DEFAULT_TOLERANCES",
    "ExperimentConfig",
    "ExperimentResult",
    "run_experiment",
]

EXPERIMENTS = (
    "fig1-cross",
    "fig2-gap",
    "fig3-theta",
    "toh-nonunique",
    "transpose-audit",
    "field-audit",
)

DEFAULT_TOLERANCES = {
    "cert": 1e-8,
    "equality": 1e-6,
    "transpose": 1e-6,
    "interlace": 1e-12,
    "bound": 1e-8,
    "cross": 1e-8,
    "field": 1e-8,
}


@dataclass
class ExperimentConfig:
    name: str
    seed: int = 0
    tolerances: dict = field(default_factory=dict)
    output_dir: Path = Path("wcgmres-out")
    matrix_path: Path = None
    k: int = None
    threads: int = 1
    n_starts: int = None

    def __post_init__(self):
        if self.name not in EXPERIMENTS:
            raise ValueError(
                f"unknown experiment {self.name!r}; choose from {', '.join(EXPERIMENTS)}"
            )
        unknown = set(self.tolerances) - set(DEFAULT_TOLERANCES)
        if unknown:
            raise ValueError(f"unknown tolerance name(s): {sorted(unknown)}")
        self.tolerances = {**DEFAULT_TOLERANCES, **self.tolerances}
        self.output_dir = Path(self.output_dir)
        if self.name in ("transpose-audit", "field-audit"):
            if self.matrix_path is None or self.k is None:
                raise ValueError(f"{self.name} needs a matrix file and k")

    @property
    def directory(self):
        return self.output_dir / self.name

    def wc_config(self, default_starts=16):
        return WorstCaseConfig(
            n_random_starts=self.n_starts or default_starts,
            seed=self.seed,
            threads=self.threads,
            cert_tol=self.tolerances["cert"],
        )


@dataclass
class ExperimentResult:
    name: str
    directory: Path
    artifacts: list
    summary: dict
    failures: list

    @property
    def ok(self):
        return not self.failures


def _dump_json(obj, path):
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _floats(x):
    return [float(v) for v in np.asarray(x).ravel()]


class _Run:
    def __init__(self, config):
        self.config = config
        self.dir = config.directory
        self.dir.mkdir(parents=True, exist_ok=True)
        self.artifacts = []
        self.failures = []
        self.log_lines = []

    def path(self, name):
        p = self.dir / name
        self.artifacts.append(p)
        return p

    def check(self, ok, message):
        if not ok:
            self.failures.append(message)
        return ok

    def log(self, message):
        self.log_lines.append(f"{time.strftime('%Y-%m-%dT%H:%M:%S')} {message}")


def _solve_quiet(A, k, config, starts=None):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        return solve_worst_case(A, k, config, starts=starts)


# ---------------------------------------------------------------------------


def _fig1_cross(run):
    cfg, tol = run.config, run.config.tolerances
    n, k = 11, 5
    A = gen_jordan(n, 1.0)
    ideal = solve_ideal(A, k, seed=cfg.seed)
    sol = _solve_quiet(A, k, cfg.wc_config(), starts=list(ideal.dual_factor.T[:1]))
    run.check(sol.certified, "reference worst-case solve not certified")
    psi = sol.psi
    starts = random_unit_vectors(n, 20, cfg.seed)
    runs = []
    for alg, fn in (("alg1", cross_iterations_1), ("alg2", cross_iterations_2)):
        for i, b in enumerate(starts):
            tr = fn(A, b, k, seed=cfg.seed)
            tr.to_csv(run.path(f"{alg}_run{i:02d}.csv"))
            seq = np.array(tr.interleaved())
            drop = float(max(0.0, -np.min(np.diff(seq)))) if len(seq) > 1 else 0.0
            excess = float(seq.max() - psi)
            defect = satisfies_cross_equality(A, tr.final_vector, k).defect
            runs.append({
                "algorithm": alg, "run": i, "iterations": tr.iterations,
                "limit": tr.limit, "converged": tr.converged,
                "max_drop": drop, "max_excess": excess, "cross_defect": defect,
            })
            run.check(drop <= tol["interlace"], f"{alg} run {i}: sequence drops by {drop:.2e}")
            run.check(excess <= tol["bound"], f"{alg} run {i}: exceeds psi by {excess:.2e}")
            run.check(defect <= tol["cross"], f"{alg} run {i}: cross defect {defect:.2e}")
    summary = {"n": n, "k": k, "psi_reference": psi, "phi": ideal.phi, "runs": runs}
    _dump_json(summary, run.path("summary.json"))
    return summary


def _fig2_gap(run):
    cfg, tol = run.config, run.config.tolerances
    A = gen_block_coupled(4, 4.0, 0.1)
    rows = []
    for k in range(1, 8):
        ideal = solve_ideal(A, k, seed=cfg.seed)
        # top singular vectors of the ideal residual matrix as extra starts
        ev = eval_spectral_norm_poly(A, ideal.coeffs, 1e-6)
        sol = _solve_quiet(A, k, cfg.wc_config(), starts=list(ev.right.T))
        cert = equality_certificate(A, k, ideal, tol["equality"], worst_case=sol)
        run.check(sol.certified, f"k={k}: worst-case solve not certified")
        run.check(sol.psi <= ideal.phi + tol["bound"],
                  f"k={k}: psi {sol.psi} exceeds phi {ideal.phi}")
        rows.append({
            "k": k, "psi": sol.psi, "phi": ideal.phi, "gap": ideal.phi - sol.psi,
            "status": cert.status, "multiplicity": cert.multiplicity,
            "min_defect": cert.min_defect,
        })
        run.log(f"k={k} done")
    with open(run.path("gap.csv"), "w") as fh:
        fh.write("k,psi,phi,gap,status,multiplicity,min_defect\n")
        for r in rows:
            fh.write(",".join([str(r["k"]), format(r["psi"], ".17g"),
                               format(r["phi"], ".17g"), format(r["gap"], ".17g"),
                               r["status"], str(r["multiplicity"]),
                               format(r["min_defect"], ".17g")]) + "\n")
    return {"rows": rows}


def _toh_pair(cfg):
    A = gen_toh(omega=1.0, epsilon=0.1)
    sol = _solve_quiet(A, 3, cfg.wc_config(default_starts=32))
    partner = toh_conjugate_solution(A, sol)
    return A, sol, partner


def _fig3_theta(run):
    A, sol, partner = _toh_pair(run.config)
    run.check(sol.certified, "worst-case solve not certified")
    rows = theta_sweep(A, sol.witness, partner.witness, 3, reference=sol.psi)
    write_theta_csv(rows, run.path("theta.csv"))
    values = np.array([r.value for r in rows])
    i = int(np.argmax(values))
    summary = {
        "psi": sol.psi,
        "witness_b": _floats(sol.witness),
        "witness_c": _floats(partner.witness),
        "n_theta": len(rows),
        "max_value": float(values[i]),
        "max_excess": float(values[i] - sol.psi),
        "argmax_theta": rows[i].theta,
    }
    _dump_json(summary, run.path("summary.json"))
    return summary


def _toh_nonunique(run):
    cfg = run.config
    A, sol, partner = _toh_pair(cfg)
    ideal = solve_ideal(A, 3, seed=cfg.seed)
    reports = [certify_worst_case(A, s, check_transpose=(i == 0), transpose_config=sol.config)
               for i, s in enumerate((sol, partner))]
    for name, rep in zip(("first", "conjugate"), reports):
        run.check(rep.passed, f"{name} solution failed certification")
    sols = []
    for s, rep in zip((sol, partner), reports):
        d = s.to_dict()
        d["singular_index"] = rep.singular_index
        d["singular_values"] = _floats(rep.singular_values)
        sols.append(d)
    summary = {
        "omega": 1.0, "epsilon": 0.1, "k": 3,
        "psi": sol.psi, "phi": ideal.phi, "gap": ideal.phi - sol.psi,
        "ideal_coeffs": _floats(ideal.coeffs),
        "solutions": sols,
        "distinct_top_solutions": len(sol.top_solutions),
    }
    _dump_json(summary, run.path("toh_nonunique.json"))
    return summary


def _transpose_audit(run):
    cfg = run.config
    A = read_matrix(cfg.matrix_path)
    if np.iscomplexobj(A):
        raise ValueError("transpose-audit needs a real matrix")
    psi = _solve_quiet(A, cfg.k, cfg.wc_config()).psi
    psi_t = _solve_quiet(A.T, cfg.k, cfg.wc_config()).psi
    gap = abs(psi - psi_t)
    run.check(gap <= cfg.tolerances["transpose"], f"transpose gap {gap:.2e}")
    summary = {"matrix": str(cfg.matrix_path), "k": cfg.k, "psi": psi,
               "psi_transpose": psi_t, "gap": gap}
    _dump_json(summary, run.path("transpose_audit.json"))
    return summary


def _field_audit(run):
    cfg = run.config
    A = read_matrix(cfg.matrix_path)
    if np.iscomplexobj(A):
        raise ValueError("field-audit needs a real matrix")
    audit = psi_variant_inequality_audit(A, cfg.k, cfg.wc_config(), seed=cfg.seed,
                                         tol=cfg.tolerances["field"])
    for v in audit.violations:
        run.check(False, v)
    summary = {"matrix": str(cfg.matrix_path), "k": cfg.k, "psi": audit.to_dict()}
    try:
        inv = ideal_field_invariance_check(A, cfg.k, seed=cfg.seed)
        summary["phi"] = inv.to_dict()
        run.check(inv.passed, "ideal value changes with the field")
    except ValueError as exc:  # k >= d(A): phi is zero
        summary["phi"] = {"skipped": str(exc)}
    _dump_json(summary, run.path("field_audit.json"))
    return summary


_RUNNERS = {
    "fig1-cross": _fig1_cross,
    "fig2-gap": _fig2_gap,
    "fig3-theta": _fig3_theta,
    "toh-nonunique": _toh_nonunique,
    "transpose-audit": _transpose_audit,
    "field-audit": _field_audit,
}


def run_experiment(config):
    """Run one named experiment and write its artifacts.

    Failed checks are collected in ``ExperimentResult.failures`` and listed
    in a ``FAILED`` file. A :class:`CertificationError` raised by a solver is
    treated the same way; other exceptions propagate after the marker is
    written.
    """
    run = _Run(config)
    stale = run.dir / "FAILED"
    if stale.exists():
        stale.unlink()
    manifest = {
        "experiment": config.name,
        "seed": config.seed,
        "tolerances": config.tolerances,
        "matrix_path": None if config.matrix_path is None else str(config.matrix_path),
        "k": config.k,
        "n_starts": config.n_starts,
        "threads": config.threads,
        "versions": {
            "wcgmres": __version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "python": platform.python_version(),
        },
    }
    _dump_json(manifest, run.path("manifest.json"))
    run.log(f"start {config.name}")
    summary = {}
    try:
        summary = _RUNNERS[config.name](run)
    except CertificationError as exc:
        run.failures.append(f"certification error: {exc}")
    except Exception as exc:
        run.failures.append(f"{type(exc).__name__}: {exc}")
        raise
    finally:
        run.log("failed" if run.failures else "done")
        (run.dir / "run.log").write_text("\n".join(run.log_lines) + "\n")
        if run.failures:
            stale.write_text("\n".join(run.failures) + "\n")
    return ExperimentResult(config.name, run.dir, run.artifacts, summary, run.failures)
