"""Command-line interface: ``robsub fit|simulate|diagnose|equivariance``.

Exit codes: 0 success, 2 input or usage error, 3 numerical degeneracy.
"""

from __future__ import annotations

import argparse
import csv
import logging
import os
import sys
import time

from . import __version__
from .diagnostics import diagnose
from .errors import DesignError, RobsubError
from .estimator import AlgorithmParams
from .evaluation import (
    DESIGNS,
    SimulationDesign,
    eigenvalue_profile,
    generate_sample,
    optimal_basis,
    relative_prediction_error,
    rep_rng,
)
from .io import (
    InputError,
    document_to_fit,
    fit_to_document,
    read_fit,
    read_matrix,
    write_fit,
)
from .kernels import random_orthogonal, standardized_last_angle
from .methods import METHODS, make_method
from .scales import ScaleSpec

logger = logging.getLogger("robsub")

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_DEGENERATE = 3

RESULT_COLUMNS = ["design", "method", "eps", "k", "rep", "e_pred", "angle", "seconds"]


class UsageError(Exception):
    pass


def parse_k_grid(text):
    """``"0:20:0.5"`` (inclusive range) or a comma-separated list."""
    text = text.strip()
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise UsageError(f"bad k grid {text!r}; use start:stop:step")
        start, stop, step = (float(v) for v in parts)
        if step <= 0 or stop < start:
            raise UsageError(f"bad k grid {text!r}")
        count = int(round((stop - start) / step)) + 1
        return [round(start + i * step, 10) for i in range(count)]
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"bad k grid {text!r}") from None


def parse_methods(text):
    names = [m.strip().lower() for m in text.split(",") if m.strip()]
    bad = [m for m in names if m not in METHODS]
    if bad or not names:
        raise UsageError(f"unknown method(s) {bad}; choose from {','.join(METHODS)}")
    return names


def _params(args):
    return AlgorithmParams(N1=args.N1, N2=args.N2, N3=args.N3,
                           N2_refine=args.N2_refine, tol=args.tol)


def _fmt(x):
    return repr(float(x))


def _threads(args):
    return args.threads if args.threads is not None else (os.cpu_count() or 1)


def cmd_fit(args):
    X = read_matrix(args.input)
    if args.q < 1:
        raise UsageError("--q must be >= 1")
    params = _params(args)
    if args.method in ("pca", "spc"):
        name = args.method
    else:
        name = ("d" if args.starts == "deterministic" else "r") + \
               ("subs" if args.method == "s" else "sublts")
    spec = None
    if args.method == "s" and args.b is not None:
        spec = ScaleSpec.mscale(args.b)
    elif args.method == "lts" and args.alpha is not None:
        spec = ScaleSpec.lts(args.alpha)
    method = make_method(name, args.q, bdp=args.bdp, params=params, seed=args.seed,
                         n_starts=args.n_starts, threads=_threads(args), spec=spec)
    t0 = time.perf_counter()
    fit = method(X)
    seconds = time.perf_counter() - t0 if args.timing else None
    doc = fit_to_document(
        fit, method=name, params=params if args.method in ("s", "lts") else None,
        seed=args.seed if name.startswith("r") else None, seconds=seconds,
    )
    write_fit(args.out, doc)
    logger.info("%s: scale %.6g after %d iterations (converged=%s)",
                name, fit.scale, fit.iterations, fit.converged)
    return EXIT_OK


def _design(args, k=0.0):
    design = SimulationDesign(kind=args.design, n=args.n, p=args.p, q=args.q,
                              eps=args.eps, k=k, seed=args.seed, explained=args.explained)
    eigenvalue_profile(design)  # raises DesignError for an unattainable profile
    return design


def _writer(out):
    fh = sys.stdout if out == "-" else open(out, "w", newline="", encoding="utf-8")
    return fh, csv.writer(fh, lineterminator="\n")


def cmd_simulate(args):
    methods = parse_methods(args.methods)
    ks = parse_k_grid(args.k_grid)
    _design(args)
    params = _params(args)
    fh, writer = _writer(args.out)
    try:
        writer.writerow(RESULT_COLUMNS)
        for k in ks:
            design = _design(args, k)
            for rep in range(args.reps):
                sample = generate_sample(design, rep_rng(args.seed, rep))
                for name in methods:
                    method = make_method(name, args.q, bdp=args.bdp, params=params,
                                         seed=[args.seed, rep], n_starts=args.n_starts,
                                         threads=_threads(args))
                    t0 = time.perf_counter()
                    try:
                        B = method(sample.X).B
                    except RobsubError as exc:
                        logger.warning("%s k=%s rep=%d failed: %s", name, k, rep, exc)
                        writer.writerow([args.design, name, args.eps, k, rep, "", "", ""])
                        continue
                    seconds = _fmt(time.perf_counter() - t0) if args.timing else ""
                    e = relative_prediction_error(B, sample.Sigma_diag)
                    angle = standardized_last_angle(B, optimal_basis(args.p, args.q))
                    writer.writerow([args.design, name, args.eps, k, rep,
                                     _fmt(e), _fmt(angle), seconds])
    finally:
        if fh is not sys.stdout:
            fh.close()
    return EXIT_OK


def cmd_equivariance(args):
    methods = parse_methods(args.methods)
    ks = parse_k_grid(args.k_grid)
    _design(args)
    params = _params(args)
    fh, writer = _writer(args.out)
    try:
        writer.writerow(RESULT_COLUMNS)
        for k in ks:
            design = _design(args, k)
            for rep in range(args.reps):
                rng = rep_rng(args.seed, rep)
                sample = generate_sample(design, rng)
                P = random_orthogonal(args.p, args.p, rng)
                for name in methods:
                    method = make_method(name, args.q, bdp=args.bdp, params=params,
                                         seed=[args.seed, rep], n_starts=args.n_starts,
                                         threads=_threads(args))
                    t0 = time.perf_counter()
                    try:
                        B = method(sample.X).B
                        B_rot = P.T @ method(sample.X @ P.T).B
                    except RobsubError as exc:
                        logger.warning("%s k=%s rep=%d failed: %s", name, k, rep, exc)
                        writer.writerow([args.design, name, args.eps, k, rep, "", "", ""])
                        continue
                    seconds = _fmt(time.perf_counter() - t0) if args.timing else ""
                    writer.writerow([
                        args.design, name, args.eps, k, rep,
                        _fmt(relative_prediction_error(B, sample.Sigma_diag)),
                        _fmt(standardized_last_angle(B, B_rot)), seconds,
                    ])
    finally:
        if fh is not sys.stdout:
            fh.close()
    return EXIT_OK


def cmd_diagnose(args):
    doc = read_fit(args.fit)
    X = read_matrix(args.input)
    if X.shape[1] != doc["p"]:
        raise UsageError(f"data has {X.shape[1]} columns but the fit has p={doc['p']}")
    fit = document_to_fit(doc, X)
    table = diagnose(X, fit)
    fh = sys.stdout if args.out == "-" else open(args.out, "w", newline="", encoding="utf-8")
    try:
        table.write_csv(fh)
    finally:
        if fh is not sys.stdout:
            fh.close()
    logger.info("flag counts: %s", table.counts())
    return EXIT_OK


def _add_algorithm_args(p):
    g = p.add_argument_group("algorithm")
    g.add_argument("--bdp", type=float, default=0.5, choices=[0.5, 0.25],
                   help="breakdown point: b=0.5/0.2426 (S), alpha=0.5/0.25 (LTS)")
    g.add_argument("--n-starts", type=int, default=50, help="random starts")
    g.add_argument("--N1", type=int, default=3)
    g.add_argument("--N2", type=int, default=2)
    g.add_argument("--N3", type=int, default=3)
    g.add_argument("--N2-refine", dest="N2_refine", type=int, default=10)
    g.add_argument("--tol", type=float, default=1e-6)
    g.add_argument("--threads", type=int, default=None,
                   help="worker threads for evaluating starts (output does not depend on it)")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--timing", action="store_true",
                   help="record wall-clock seconds (makes output run-dependent)")


def _add_design_args(p):
    g = p.add_argument_group("design")
    g.add_argument("--design", choices=DESIGNS, default="a")
    g.add_argument("--n", type=int, default=100)
    g.add_argument("--p", type=int, default=10)
    g.add_argument("--q", type=int, default=2)
    g.add_argument("--eps", type=float, default=0.0)
    g.add_argument("--k-grid", default="0", help="start:stop:step or comma list")
    g.add_argument("--reps", type=int, default=100)
    g.add_argument("--explained", type=float, default=0.8,
                   help="top-q variance share for --design hd")
    g.add_argument("--methods", default="dsubs,dsublts,spc")
    g.add_argument("--out", default="-")


def build_parser():
    parser = argparse.ArgumentParser(prog="robsub", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-v", "--verbose", action="store_true", help="log progress")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", parents=[common], help="fit a robust subspace to a CSV matrix")
    p.add_argument("--input", required=True)
    p.add_argument("--q", type=int, required=True)
    p.add_argument("--method", choices=["s", "lts", "pca", "spc"], default="s")
    p.add_argument("--starts", choices=["deterministic", "random"], default="deterministic")
    p.add_argument("--alpha", type=float, default=None,
                   help="LTS trimming fraction, overrides --bdp")
    p.add_argument("--b", type=float, default=None,
                   help="M-scale target b in (0, 1), overrides --bdp")
    p.add_argument("--out", required=True)
    _add_algorithm_args(p)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("simulate", parents=[common], help="prediction errors on synthetic designs")
    _add_design_args(p)
    _add_algorithm_args(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("equivariance", parents=[common], help="orthogonal equivariance experiment")
    _add_design_args(p)
    _add_algorithm_args(p)
    p.set_defaults(func=cmd_equivariance, eps=0.2, reps=50)

    p = sub.add_parser("diagnose", parents=[common], help="orthogonal/score distance diagnostics")
    p.add_argument("--fit", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_diagnose)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (InputError, UsageError, DesignError, ValueError) as exc:
        print(f"robsub: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except RobsubError as exc:
        print(f"robsub: degenerate: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE


if __name__ == "__main__":
    sys.exit(main())
