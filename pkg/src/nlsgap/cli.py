"""Command line front end: ``nlsgap {soliton,eigs,scan,betastar}``.

Exit status: 0 success (or ``--assert-gap`` satisfied), 1 computational
failure or failed assertion, 2 usage / input-format error.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import grid as gridmod
from .gap import (BracketError, EigParams, beta_scan, cubic_root, find_beta_star, gap_check,
                  lambda5_plus)
from .io import FieldFormatError, read_csv, read_field, write_csv, write_field
from .soliton import (SolitonParams, SolitonResult, compute_M, compute_R,
                      euler_lagrange_residual, solve_soliton)

DEFAULT_L, DEFAULT_N = 15.0, 60


class UsageError(Exception):
    pass


def _common(p: argparse.ArgumentParser, beta_required: bool = False) -> None:
    p.add_argument("--L", type=float, default=None, help=f"box side (default {DEFAULT_L:g})")
    p.add_argument("--N", type=int, default=None, help=f"points per axis (default {DEFAULT_N})")
    if beta_required:
        p.add_argument("--beta", type=float, required=True)
    p.add_argument("--tol", type=float, default=1e-11, help="soliton residual tolerance")
    p.add_argument("--max-iter", type=int, default=500)
    p.add_argument("--delta", type=float, default=-0.5, help="translation damping constant")
    p.add_argument("--no-aitken", action="store_true")
    p.add_argument("--amplitude", type=float, default=3.0, help="Gaussian start amplitude")
    p.add_argument("--threads", type=int, default=None, help="FFT worker threads")
    p.add_argument("-v", "--verbose", action="store_true")


def _eig_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--k", type=int, default=6)
    p.add_argument("--eig-tol", type=float, default=1e-12)
    p.add_argument("--max-restarts", type=int, default=300)
    p.add_argument("--seed", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="nlsgap", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    s = sub.add_parser("soliton", help="compute the ground state")
    _common(s, beta_required=True)
    s.add_argument("--out", type=Path, default=Path("phi.nlsf"))
    s.add_argument("--history", type=Path, default=None,
                   help="convergence CSV (default: <out>.csv)")

    e = sub.add_parser("eigs", help="gap check at one beta")
    _common(e, beta_required=True)
    _eig_flags(e)
    e.add_argument("--load", type=Path, default=None, help="soliton field file")
    e.add_argument("--out", type=Path, default=None, help="report CSV")
    e.add_argument("--assert-gap", action="store_true")
    e.add_argument("--cross-check", action="store_true", help="also solve K+ directly")

    sc = sub.add_parser("scan", help="gap check over a beta range")
    _common(sc)
    _eig_flags(sc)
    sc.add_argument("--beta-min", type=float, default=2 / 3)
    sc.add_argument("--beta-max", type=float, default=1.0)
    sc.add_argument("--steps", type=int, default=11)
    sc.add_argument("--cold", action="store_true", help="independent rows, no warm start")
    sc.add_argument("--workers", type=int, default=1, help="threads for --cold rows")
    sc.add_argument("--out", type=Path, default=Path("scan.csv"))

    b = sub.add_parser("betastar", help="locate lambda_5(K+) = 1")
    _common(b)
    _eig_flags(b)
    b.add_argument("--bracket", type=float, nargs=2, default=(0.89, 0.93),
                   metavar=("LO", "HI"))
    b.add_argument("--beta-tol", type=float, default=1e-4)
    b.add_argument("--bisect-width", type=float, default=1e-4)
    b.add_argument("--table-only", action="store_true",
                   help="only interpolate a 4-row (beta, lambda5) table from --input")
    b.add_argument("--input", type=Path, default=None)
    b.add_argument("--out", type=Path, default=None, help="report CSV")
    return ap


def _grid(args):
    L = DEFAULT_L if args.L is None else args.L
    N = DEFAULT_N if args.N is None else args.N
    try:
        return gridmod.make_grid(L, N)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _soliton_params(args, beta):
    try:
        return SolitonParams(beta=beta, tau=args.tol, max_iter=args.max_iter,
                             delta=args.delta, use_aitken=not args.no_aitken,
                             amplitude=args.amplitude)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _eig_params(args, cross=False):
    if args.k < 6:
        raise UsageError("--k must be at least 6 (lambda_5 and lambda_6 of K+ are needed)")
    return EigParams(k=args.k, tol=args.eig_tol, max_restarts=args.max_restarts,
                     seed=args.seed, cross_check=cross)


def cmd_soliton(args) -> int:
    grid = _grid(args)
    res = solve_soliton(grid, _soliton_params(args, args.beta))
    write_field(args.out, grid, res.phi)
    hist = args.history or args.out.with_suffix(".csv")
    write_csv(hist, ["iter", "residual", "M", "R1", "R2", "R3"],
              ([i, r, m, *rr] for i, (r, m, rr) in
               enumerate(zip(res.residual_history, res.M_history, res.R_history))))
    print(f"iterations  {res.iterations}")
    print(f"residual    {res.residual:.3e}")
    print(f"1 - M       {1 - res.M:.3e}")
    print(f"max |R_j|   {max(abs(r) for r in res.R):.3e}")
    print(f"phi(0)      {res.phi[(grid.N // 2,) * 3]:.12f}")
    if not res.converged:
        print(f"error: {res.message}", file=sys.stderr)
        return 1
    return 0


REPORT_HEADER = ["beta", "L", "N", "index", "lambda_minus", "lambda_plus"]


def cmd_eigs(args) -> int:
    sp = _soliton_params(args, args.beta)
    ep = _eig_params(args, args.cross_check)
    soliton = None
    if args.load is not None:
        try:
            expect = None
            if args.L is not None or args.N is not None:
                expect = _grid(args)
            grid, phi = read_field(args.load, expect)
        except (FieldFormatError, OSError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 2
        r = euler_lagrange_residual(grid, phi, args.beta)
        soliton = SolitonResult(phi=phi, params=sp, grid=grid, iterations=0,
                                residual_history=[r],
                                M_history=[compute_M(grid, phi, args.beta)],
                                R_history=[tuple(compute_R(grid, phi, args.beta, a)
                                                 for a in range(3))],
                                converged=r <= 10 * sp.tau and phi.min() > 0,
                                message="loaded from file")
    else:
        grid = _grid(args)
    rep = gap_check(args.beta, grid, sp, ep, soliton=soliton)
    if rep.gap_property is None:
        print(f"error: {rep.message}", file=sys.stderr)
        return 1
    print(f"beta = {rep.beta:g}   L = {rep.L:g}   N = {rep.N}")
    print(f"soliton residual {rep.soliton_residual:.3e}   1-M {1 - rep.soliton_M:.3e}   "
          f"max|R| {max(abs(x) for x in rep.soliton_R):.3e}")
    print(f"{'i':>3}  {'lambda_i(K-)':>20}  {'lambda_i(K+)':>20}")
    for i, (lm, lp) in enumerate(zip(rep.lambdas_minus, rep.lambdas_plus), 1):
        print(f"{i:>3}  {lm:20.15f}  {lp:20.15f}")
    print(f"clusters (K+): {[tuple(j + 1 for j in c) for c in rep.clusters]}   "
          f"triplet spread {rep.triplet_spread:.2e}   max eig residual {rep.eig_residual:.2e}")
    if rep.cross_check_error is not None:
        print(f"direct K+ vs scaled K- max rel. difference {rep.cross_check_error:.2e}")
    print(f"lambda_2(K-) < 1: {rep.gap_minus_ok}   lambda_5(K+) < 1: {rep.gap_plus_ok}   "
          f"gap property: {rep.gap_property}")
    if args.out:
        write_csv(args.out, REPORT_HEADER,
                  ([rep.beta, rep.L, rep.N, i, lm, lp] for i, (lm, lp) in
                   enumerate(zip(rep.lambdas_minus, rep.lambdas_plus), 1)))
    if args.assert_gap and not rep.gap_property:
        return 1
    return 0


SCAN_HEADER = ["beta", "lambda5_plus", "lambda2_minus", "lambda1_plus", "triplet_spread",
               "soliton_residual"]


def cmd_scan(args) -> int:
    grid = _grid(args)
    if args.steps < 2 or not args.beta_min < args.beta_max:
        raise UsageError("need --steps >= 2 and --beta-min < --beta-max")
    betas = np.linspace(args.beta_min, args.beta_max, args.steps)
    scan = beta_scan(betas, grid, _soliton_params(args, float(betas[0])), _eig_params(args),
                     warm_start=not args.cold, workers=args.workers)
    cols = [scan.betas] + [scan.column(c) for c in SCAN_HEADER[1:]]
    write_csv(args.out, SCAN_HEADER, zip(*cols))
    print(f"{'beta':>10} {'lambda5(K+)':>18} {'lambda2(K-)':>18} {'lambda1(K+)':>18} "
          f"{'spread':>9}")
    for row in zip(*cols):
        print(f"{row[0]:10.6f} {row[1]:18.12f} {row[2]:18.12f} {row[3]:18.12f} {row[4]:9.1e}")
    changes = scan.sign_changes()
    print(f"sign changes of lambda5 - 1: {len(changes)}"
          + "".join(f"  [{scan.betas[i]:.6f}, {scan.betas[i + 1]:.6f}]" for i in changes))
    failed = [r for r in scan.reports if r.gap_property is None]
    for r in failed:
        print(f"error: beta={r.beta:g}: {r.message}", file=sys.stderr)
    return 1 if failed else 0


def _print_table(table, root, unc):
    print(f"{'beta':>14}  {'lambda5(K+)':>16}")
    for b, lam in table:
        print(f"{b:14.8f}  {lam:16.11f}")
    print(f"cubic interpolation: beta* = {root:.9f} +/- {unc:.1e}")


def cmd_betastar(args) -> int:
    if args.table_only:
        if args.input is None:
            raise UsageError("--table-only requires --input")
        rows = read_csv(args.input)
        key = "lambda5" if rows and "lambda5" in rows[0] else "lambda5_plus"
        try:
            betas = [float(r["beta"]) for r in rows]
            lams = [float(r[key]) for r in rows]
        except (KeyError, ValueError) as exc:
            print(f"error: {args.input}: bad table ({exc})", file=sys.stderr)
            return 2
        roots, fit = cubic_root(betas, lams)
        if len(roots) != 1:
            print(f"error: cubic has {len(roots)} roots in the table range", file=sys.stderr)
            return 1
        # last tabulated digit bounds the eigenvalue error
        unc = 5e-12 / abs(fit.slope(roots[0]))
        _print_table(list(zip(betas, lams)), roots[0], unc)
        if args.out:
            _write_betastar(args.out, list(zip(betas, lams)), (min(betas), max(betas)),
                            fit, roots[0], unc)
        return 0
    grid = _grid(args)
    ev = lambda5_plus(grid, _soliton_params(args, args.bracket[0]), _eig_params(args))
    try:
        res = find_beta_star(tuple(args.bracket), ev, args.beta_tol, args.bisect_width)
    except BracketError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except RuntimeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    _print_table(res.table, res.beta_star, res.uncertainty)
    print(f"final bracket [{res.bracket[0]:.8f}, {res.bracket[1]:.8f}], "
          f"{len(res.evaluations)} evaluations")
    if args.out:
        _write_betastar(args.out, res.table, res.bracket, res.fit, res.beta_star,
                        res.uncertainty)
    return 0


BETASTAR_HEADER = ["key", "beta", "value"]


def _write_betastar(path, table, bracket, fit, root, unc):
    rows = [("table", b, lam) for b, lam in table]
    rows += [("bracket_lo", bracket[0], ""), ("bracket_hi", bracket[1], ""),
             ("cubic_center", fit.center, ""), ("cubic_halfwidth", fit.halfwidth, "")]
    rows += [(f"cubic_c{3 - i}", "", float(c)) for i, c in enumerate(fit.coefficients)]
    rows += [("beta_star", root, ""), ("uncertainty", "", unc)]
    write_csv(path, BETASTAR_HEADER, rows)


COMMANDS = {"soliton": cmd_soliton, "eigs": cmd_eigs, "scan": cmd_scan,
            "betastar": cmd_betastar}


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    threads = args.threads if args.threads is not None else os.cpu_count()
    gridmod.set_threads(threads)
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        ap.error(str(exc))  # exits with status 2


if __name__ == "__main__":
    sys.exit(main())
