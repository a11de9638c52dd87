"""Command line front end.

Exit codes: 0 success, 2 invalid configuration, 3 solver non-convergence,
4 I/O error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace

from .discretization import write_field
from .errors import ConvergenceError
from .experiments import (
    DEFAULT_B_VALUES,
    SweepConfig,
    emit_report,
    run_b_sweep,
    run_config,
    run_energy_doubling,
)
from .functional import Problem
from .model import ModelParams, NonlinearitySpec, PotentialSpec, load_config, validate_params
from .solver import SolverConfig, minimize_ground, minimize_nodal, verify_critical

EXIT_OK, EXIT_INVALID, EXIT_NONCONVERGED, EXIT_IO = 0, 2, 3, 4

log = logging.getLogger("fracnodal")


class InvalidConfig(ValueError):
    pass


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON configuration file (defaults if omitted)")
    p.add_argument("--out", help="output path (field dump or CSV report)")
    p.add_argument("--trace", help="stream 'iter energy residual' lines to this file")
    p.add_argument("--tol", type=float, help="residual and pair tolerance")
    p.add_argument("--max-iters", type=int, help="iteration budget per solve")
    p.add_argument("--seed", type=int, default=0, help="rng seed for seed jitter")
    p.add_argument("--jitter", type=float, default=0.0, help="random perturbation of the seed family")
    p.add_argument("--b", type=float, help="override the Kirchhoff coefficient")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fracnodal", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_ in [
        ("solve-nodal", "least-energy sign-changing solution"),
        ("solve-ground", "ground state on the Nehari manifold"),
        ("doubling", "nodal level against twice the ground level"),
        ("sweep", "continuation b -> 0 with distances to the limit"),
        ("validate", "check a configuration against the model hypotheses"),
    ]:
        p = sub.add_parser(name, help=help_)
        _common(p)
        if name == "sweep":
            p.add_argument("--cold-start", action="store_true", help="seed every b from the default seed")
            p.add_argument("--no-restarts", action="store_true",
                           help="follow the warm-started branch only, without default-seed restarts")
            p.add_argument("--b-values", type=float, nargs="+", default=list(DEFAULT_B_VALUES))
    return parser


def _load(args):
    try:
        mp, pot, nl = load_config(args.config) if args.config else (ModelParams(), PotentialSpec(), None)
    except OSError:
        raise
    except (ValueError, TypeError, KeyError) as exc:
        raise InvalidConfig(f"{args.config}: {exc}") from exc
    if args.b is not None:
        mp = mp.replace(b=args.b)
    nl = NonlinearitySpec(nl.kind if nl else "pure-power", mp.p)
    report = validate_params(mp, pot, nl)
    return mp, pot, nl, report


def _solver_config(args) -> SolverConfig:
    kw = {"rng_seed": args.seed, "seed_jitter": args.jitter, "trace_path": args.trace}
    if args.tol is not None:
        kw.update(residual_tol=args.tol, pair_tol=args.tol)
    if args.max_iters is not None:
        kw["max_iters"] = args.max_iters
    return SolverConfig(**kw)


def _solve(args, mp, pot, nl, cfg) -> int:
    pr = Problem.build(mp, pot, nl)
    fn = minimize_nodal if args.command == "solve-nodal" else minimize_ground
    res = fn(pr, cfg)
    rep = verify_critical(pr, res.field, tol=cfg.residual_tol)
    print(f"level {res.level:.17g}")
    print(f"iterations {res.iters}")
    print(f"residual_inf {res.residual_inf:.3e}")
    print(f"sign_changes {rep.sign_changes}")
    if args.out:
        write_field(args.out, res.field)
    return EXIT_OK


def _doubling(args, mp, pot, nl, cfg) -> int:
    rec = run_energy_doubling(mp, cfg, pot, nl)
    print(f"b {rec.b:g}: c_nod {rec.c_nod:.12g}  c_ground {rec.c_ground:.12g}  margin {rec.margin:.12g}")
    print(f"chain {'holds' if rec.chain.holds else 'VIOLATED'}")
    if args.out:
        emit_report([rec], args.out, run_config(mp, pot, nl, cfg))
    return EXIT_OK


def _sweep(args, mp, pot, nl, cfg) -> int:
    sweep = SweepConfig(b_values=args.b_values, base=mp, warm_start=not args.cold_start,
                        restarts=not args.no_restarts)
    entries = run_b_sweep(sweep, cfg, pot, nl)
    for b, rec, d in entries:
        flag = "  anomaly" if rec.anomaly else ""
        print(f"b {b:<8g} c_nod {rec.c_nod:.10g}  d {d:.6g}  pair ({rec.pair_alpha:.6g}, {rec.pair_beta:.6g}){flag}")
    if args.out:
        conf = run_config(mp, pot, nl, cfg)
        conf["sweep"] = {"b_values": list(sweep.b_values), "warm_start": sweep.warm_start,
                         "restarts": sweep.restarts}
        emit_report(entries, args.out, conf)
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(message)s")
    try:
        mp, pot, nl, report = _load(args)
        if args.command == "validate":
            print(report)
            return EXIT_OK if report.ok else EXIT_INVALID
        if not report.ok:
            print(report, file=sys.stderr)
            return EXIT_INVALID
        cfg = _solver_config(args)
        if args.command in ("solve-nodal", "solve-ground"):
            return _solve(args, mp, pot, nl, cfg)
        if args.command == "doubling":
            return _doubling(args, mp, pot, nl, cfg)
        return _sweep(args, mp, pot, nl, replace(cfg, trace_path=None))
    except ConvergenceError as exc:
        print(f"solver did not converge: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGED
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
