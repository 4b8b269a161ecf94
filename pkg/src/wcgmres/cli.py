"""Command-line interface: ``wcgmres gen | solve | run``.

Exit codes: 0 success, 2 invalid arguments, 3 I/O or file-format error,
4 failed certification.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
import warnings
from pathlib import Path

import numpy as np

from .crossiter import cross_iterations_1, cross_iterations_2, random_unit_vectors
from .experiments import DEFAULT_TOLERANCES, EXPERIMENTS, ExperimentConfig, run_experiment
from .idealsolver import equality_certificate, solve_ideal
from .krylov import gmres_residual
from .matgen import (MatrixFormatError, ParameterError, block_diag_double, format_matrix,
                     gen_alternating_bidiagonal, gen_block_coupled, gen_jordan, gen_toh,
                     read_matrix, read_vector)
from .wcsolver import CertificationError, WorstCaseConfig, certify_worst_case, solve_worst_case

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_IO = 3
EXIT_CERT = 4

OUTPUT_ENV = "WCGMRES_OUTPUT_DIR"
FAMILIES = ("toh", "jordan", "alt-bidiag", "block-coupled", "block-double")
SOLVE_KINDS = ("gmres", "worst-case", "ideal", "cross-iter", "certify")


class UsageError(Exception):
    pass


def _need(args, *names):
    missing = [n for n in names if getattr(args, n) is None]
    if missing:
        flags = ", ".join("--" + n.replace("_", "-") for n in missing)
        raise UsageError(f"family {args.family!r} needs {flags}")


def _generate(args):
    fam = args.family
    if fam == "toh":
        _need(args, "omega", "eps")
        return gen_toh(omega=args.omega, epsilon=args.eps)
    if fam == "jordan":
        _need(args, "n")
        return gen_jordan(args.n, 1.0 if args.lam is None else args.lam,
                          1.0 if args.eps is None else args.eps)
    if fam == "alt-bidiag":
        _need(args, "n", "eps")
        return gen_alternating_bidiagonal(args.n, args.eps)
    if fam == "block-coupled":
        _need(args, "n", "omega", "eps")
        return gen_block_coupled(args.n, args.omega, args.eps)
    _need(args, "input")
    return block_diag_double(read_matrix(args.input))


def cmd_gen(args):
    A = _generate(args)
    s = np.linalg.svd(A, compute_uv=False)
    text = format_matrix(A)
    info = f"{A.shape[0]}x{A.shape[1]} {args.family} matrix, min singular value {s[-1]:.6e}"
    if args.out is None:
        sys.stdout.write(text)
        print(info, file=sys.stderr)
    else:
        Path(args.out).write_text(text)
        print(f"wrote {args.out}: {info}")
    return EXIT_OK


def _wc_config(args):
    return WorstCaseConfig(n_random_starts=args.starts, seed=args.seed,
                           threads=args.threads, ascent_tol=args.tol)


def _emit(args, payload, summary):
    """Write JSON to --out (and print the summary) or JSON to stdout."""
    text = json.dumps(payload, indent=2) + "\n"
    if args.out is None:
        sys.stdout.write(text)
    else:
        Path(args.out).write_text(text)
        print(summary)


def _rhs(args, n):
    if args.rhs is not None:
        b = read_vector(args.rhs)
        if b.shape[0] != n:
            raise UsageError(f"right-hand side has length {b.shape[0]}, matrix is {n}x{n}")
        return b
    return random_unit_vectors(n, 1, args.seed)[0]


def cmd_solve(args):
    A = read_matrix(args.matrix)
    k = args.k
    if not 1 <= k <= A.shape[0]:
        raise UsageError(f"k must satisfy 1 <= k <= {A.shape[0]}")
    kind = args.kind
    if kind == "gmres":
        b = _rhs(args, A.shape[0])
        res = gmres_residual(A, b, k)
        payload = {
            "k": k,
            "residual_norm": res.residual_norm,
            "relative_residual": res.residual_norm / float(np.linalg.norm(b)),
            "coeffs": [float(x) for x in np.real(res.coeffs)],
            "ortho_defect": res.ortho_defect,
            "degenerate": res.degenerate,
        }
        _emit(args, payload, f"||r_{k}|| = {res.residual_norm:.12g}")
        return EXIT_OK
    if np.iscomplexobj(A):
        raise UsageError(f"{kind} needs a real matrix")
    if kind == "worst-case":
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            sol = solve_worst_case(A, k, _wc_config(args))
        _emit(args, sol.to_dict(), f"psi_{k} = {sol.psi:.12g} (certified: {sol.certified})")
        return EXIT_OK
    if kind == "ideal":
        sol = solve_ideal(A, k, seed=args.seed)
        _emit(args, sol.to_dict(), f"phi_{k} = {sol.phi:.12g}")
        return EXIT_OK
    if kind == "cross-iter":
        b = _rhs(args, A.shape[0])
        b = b / np.linalg.norm(b)
        fn = cross_iterations_1 if args.algorithm == 1 else cross_iterations_2
        tr = fn(A, b, k, seed=args.seed)
        if args.out is None:
            print("j,r_norm,s_norm")
            for j, r in enumerate(tr.r_norms, start=1):
                s = format(tr.s_norms[j - 1], ".17g") if tr.s_norms else ""
                print(f"{j},{format(r, '.17g')},{s}")
        else:
            tr.to_csv(args.out)
            print(f"{tr.iterations} sweeps, limit {tr.limit:.12g}, converged {tr.converged}")
        return EXIT_OK
    # certify: worst case with all certificates, plus the ideal comparison
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        sol = solve_worst_case(A, k, _wc_config(args))
    if sol.degenerate:
        raise CertificationError(f"k = {k} is at or beyond the minimal polynomial degree")
    report = certify_worst_case(A, sol, transpose_config=sol.config)
    ideal = solve_ideal(A, k, seed=args.seed)
    eq = equality_certificate(A, k, ideal, worst_case=sol)
    payload = {"worst_case": sol.to_dict(), "certificate": report.to_dict(),
               "ideal": ideal.to_dict(), "equality": eq.to_dict()}
    ok = sol.certified and report.passed and sol.psi <= ideal.phi + 1e-8
    _emit(args, payload,
          f"psi_{k} = {sol.psi:.12g}, phi_{k} = {ideal.phi:.12g}, {eq.status}; "
          f"certificate {'passed' if ok else 'FAILED'}")
    return EXIT_OK if ok else EXIT_CERT


def _parse_tol(items):
    tols = {}
    for item in items or []:
        name, sep, value = item.partition("=")
        if not sep or name not in DEFAULT_TOLERANCES:
            raise UsageError(f"--tol expects NAME=VALUE with NAME in {sorted(DEFAULT_TOLERANCES)}")
        try:
            tols[name] = float(value)
        except ValueError:
            raise UsageError(f"invalid tolerance value {value!r}") from None
    return tols


def cmd_run(args):
    out_dir = args.out_dir or os.environ.get(OUTPUT_ENV) or "wcgmres-out"
    try:
        config = ExperimentConfig(
            name=args.experiment, seed=args.seed, tolerances=_parse_tol(args.tol),
            output_dir=out_dir, matrix_path=args.matrix, k=args.k,
            threads=args.threads, n_starts=args.starts,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    result = run_experiment(config)
    for p in result.artifacts:
        print(p)
    if not result.ok:
        for f in result.failures:
            print(f"FAILED: {f}", file=sys.stderr)
        return EXIT_CERT
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(
        prog="wcgmres", description="Worst-case and ideal GMRES for small dense matrices."
    )
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate a test matrix")
    g.add_argument("--family", required=True, choices=FAMILIES)
    g.add_argument("--omega", type=float)
    g.add_argument("--eps", type=float)
    g.add_argument("--n", type=int)
    g.add_argument("--lam", type=float)
    g.add_argument("--input", help="source matrix for block-double")
    g.add_argument("--out", help="output file (default: standard output)")
    g.set_defaults(func=cmd_gen)

    s = sub.add_parser("solve", help="run one computation on a matrix file")
    s.add_argument("kind", choices=SOLVE_KINDS)
    s.add_argument("matrix")
    s.add_argument("-k", type=int, required=True)
    s.add_argument("--rhs", help="vector file for gmres / cross-iter")
    s.add_argument("--starts", type=int, default=16, help="random starts (worst case)")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--threads", type=int, default=1)
    s.add_argument("--tol", type=float, default=1e-10, help="ascent tolerance")
    s.add_argument("--algorithm", type=int, choices=(1, 2), default=1)
    s.add_argument("--out", help="output file (default: standard output)")
    s.set_defaults(func=cmd_solve)

    r = sub.add_parser("run", help="run a named experiment")
    r.add_argument("experiment", choices=EXPERIMENTS)
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--out-dir", help=f"artifact directory (default: ${OUTPUT_ENV} or ./wcgmres-out)")
    r.add_argument("--matrix", help="matrix file for the audit experiments")
    r.add_argument("-k", type=int)
    r.add_argument("--starts", type=int)
    r.add_argument("--threads", type=int, default=1)
    r.add_argument("--tol", action="append", metavar="NAME=VALUE")
    r.set_defaults(func=cmd_run)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "threads", 1) < 1:
        parser.error("--threads must be >= 1")
    try:
        return args.func(args)
    except (UsageError, ParameterError) as exc:
        print(f"wcgmres: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, MatrixFormatError) as exc:
        print(f"wcgmres: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except CertificationError as exc:
        print(f"wcgmres: certification failed: {exc}", file=sys.stderr)
        return EXIT_CERT
    except ValueError as exc:
        print(f"wcgmres: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
