"""Command-line interface: ``muentropy <command> ...``."""
from __future__ import annotations

import argparse
import json
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import blowup, estimates, functionals as fn, io, thermo
from .convexfn import PiecewiseAffineConvex, linear_from_vector
from .exceptions import GeometryError, NoConvergence, OutOfRange
from .optimizer import SolverConfig, canonical_distribution, optimize_vector
from .polytope import is_simple, load_system, system_hash, system_to_dict

EXIT_PARSE, EXIT_GEOMETRY, EXIT_SOLVER = 2, 3, 4


class ParseError(Exception):
    pass


def parse_grid(text):
    """``a:b:step`` (inclusive) or a comma list."""
    if ":" in text:
        a, b, step = (float(t) for t in text.split(":"))
        if step <= 0:
            raise ParseError("grid step must be positive")
        return np.round(np.arange(a, b + step / 2, step), 12)
    return np.array([float(t) for t in text.split(",") if t.strip()])


def parse_vector(text):
    return np.array([float(t) for t in text.split(",")])


def load(path):
    try:
        return load_system(path)
    except GeometryError:
        raise
    except (OSError, json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"cannot read system {path}: {exc}") from exc


def load_q(args, S):
    if getattr(args, "q", None):
        try:
            with open(args.q) as fh:
                q = PiecewiseAffineConvex.from_dict(json.load(fh))
        except (OSError, json.JSONDecodeError, KeyError, ValueError) as exc:
            raise ParseError(f"cannot read function {args.q}: {exc}") from exc
        if q.dim != S.dim:
            raise ParseError("function dimension does not match the system")
        return q
    xi = parse_vector(args.xi) if getattr(args, "xi", None) else np.zeros(S.dim)
    if len(xi) != S.dim:
        raise ParseError("vector length does not match the system")
    return linear_from_vector(xi)


def solver_config(args):
    kw = {}
    if getattr(args, "pieces", None):
        kw["pieces"] = args.pieces
    if getattr(args, "starts", None):
        kw["starts"] = args.starts
    if getattr(args, "seed", None) is not None:
        kw["seed"] = args.seed
    return SolverConfig(**kw)


def config_dict(cfg: SolverConfig):
    from dataclasses import asdict

    return {k: list(v) if isinstance(v, tuple) else v for k, v in asdict(cfg).items()}


def temperature_arg(args):
    if args.T is not None:
        T = args.T
    else:
        T = fn.temperature(args.lam)
    if T < 0:
        raise ParseError("the solver needs T >= 0 (lambda <= 0)")
    return T


def emit_csv(args, header, rows, m):
    if getattr(args, "out", None):
        path = io.write_csv(args.out, header, rows)
        io.write_manifest(path, m)
    else:
        w = sys.stdout
        w.write(",".join(header) + "\n")
        for r in rows:
            w.write(",".join(io._fmt(v) for v in r) + "\n")


# -- commands ----------------------------------------------------------------


def cmd_validate(args):
    S = load(args.system)
    vol, bdry = S.volume, S.boundary_measure
    print(f"dim={S.dim}")
    print("vertices=" + json.dumps((S.polytope.vertices + 0.0).tolist()))
    print(f"simple={str(is_simple(S.polytope)).lower()}, vol={vol:.12g}, bdry={bdry:.12g}")
    if args.emit:
        io.write_json(args.emit, system_to_dict(S))
    return 0


def cmd_report(args):
    started = time.time()
    S = load(args.system)
    q = load_q(args, S)
    if args.T is not None:
        rows = [fn.report(S, q, T=t).row() for t in parse_grid(args.T)]
    elif args.lam is not None:
        rows = [fn.report(S, q, lam=l).row() for l in parse_grid(args.lam)]
    else:
        rows = [fn.report(S, q, T=0.0).row()]
    m = io.manifest("report", system_hash(S), {"q": q.to_dict()}, None, started)
    emit_csv(args, list(fn.REPORT_COLUMNS), rows, m)
    return 0


def cmd_optimize(args):
    started = time.time()
    S = load(args.system)
    if args.linear:
        lam = args.lam if args.lam is not None else fn.lam_from_temperature(args.T)
        xi, value = optimize_vector(S, lam)
        q = linear_from_vector(xi)
        T = fn.temperature(lam)
        out = {"xi": xi.tolist(), "value": value, "q_star": q.to_dict(),
               "report": fn.report(S, q, lam=lam).to_dict(),
               "diagnostics": {"residual": float(np.linalg.norm(
                   [fn.futaki(S, lam, xi, linear_from_vector(e)) for e in np.eye(S.dim)]))}}
        cfg = None
    else:
        T = temperature_arg(args)
        cfg = solver_config(args)
        res = canonical_distribution(S, T, cfg)
        out = {"q_star": res.q_star.to_dict(), "report": res.report.to_dict(),
               "diagnostics": {"converged": res.converged,
                               "starts_agreement": res.starts_agreement,
                               "history": res.history}}
    m = io.manifest("optimize", system_hash(S), config_dict(cfg) if cfg else {"linear": True},
                    getattr(args, "seed", None), started)
    if args.out:
        path = io.write_json(args.out, out)
        io.write_manifest(path, m)
    else:
        print(json.dumps(out, indent=2, sort_keys=True))
    return 0


def cmd_sweep(args):
    started = time.time()
    S = load(args.system)
    cfg = solver_config(args)
    curve = thermo.CanonicalCurve(S, cfg)
    rows = [curve(t).report.row() for t in parse_grid(args.T_grid)]
    emit_csv(args, list(fn.REPORT_COLUMNS), rows,
             io.manifest("sweep", system_hash(S), config_dict(cfg), cfg.seed, started))
    return 0


def cmd_thermo(args):
    started = time.time()
    S = load(args.system)
    cfg = solver_config(args)
    if args.thermo_cmd == "family":
        fam = thermo.canonical_family(S, parse_grid(args.T_grid), cfg)
        m = io.manifest("thermo family", system_hash(S), config_dict(cfg), cfg.seed, started)
        m["checks"] = fam.checks
        emit_csv(args, ["T", "U", "S", "F"], fam.rows(), m)
        for k, v in fam.checks.items():
            print(f"{k}={v}", file=sys.stderr)
        return 0
    if args.thermo_cmd == "equilibrium":
        eq = thermo.equilibrium_of_energy(S, args.U, cfg)
        out = {"U_target": eq.U_target, "T_interval": list(eq.T_interval),
               "U_achieved": eq.U_achieved}
        if hasattr(eq.u_eq, "q"):
            out["q"] = eq.u_eq.q.to_dict()
        m = io.manifest("thermo equilibrium", system_hash(S), config_dict(cfg), cfg.seed, started)
        if args.out:
            io.write_manifest(io.write_json(args.out, out), m)
        else:
            print(json.dumps(out, indent=2, sort_keys=True))
        return 0
    # heat-bath
    S_R = load(args.reservoir) if args.reservoir else S
    curve = thermo.CanonicalCurve(S, cfg)
    curve_R = curve if args.reservoir is None else thermo.CanonicalCurve(S_R, cfg)
    probe = curve(args.T_probe)
    U = probe.report.U
    hb = thermo.heat_bath_experiment(S, S_R, U, args.T_R, [int(n) for n in parse_grid(args.N)],
                                     probe.u_star, cfg, curve=curve, curve_R=curve_R)
    m = io.manifest("thermo heat-bath", system_hash(S), config_dict(cfg), cfg.seed, started)
    m["limit"] = hb.limit
    m["U"] = U
    emit_csv(args, ["N", "T_N", "dS_N"], hb.rows(), m)
    print(f"limit={hb.limit:.17g}", file=sys.stderr)
    return 0


def cmd_estimates(args):
    started = time.time()
    S = load(args.system)
    m = io.manifest(f"estimates {args.est_cmd}", system_hash(S), {"trials": args.trials},
                    args.seed, started)
    if args.est_cmd == "poincare":
        exponent = args.exponent if args.exponent else estimates.critical_exponent(S.dim)
        pr = estimates.poincare_probe(S, exponent, args.trials, args.seed)
        rows = [[i, r] for i, r in enumerate(pr.ratios)]
        emit_csv(args, ["trial", "ratio"], rows, m)
        if args.out:
            io.write_json(str(args.out) + ".witness.json", pr.to_dict())
        return 0
    if args.est_cmd == "rellich":
        if args.points:
            pts = np.array([parse_vector(p) for p in args.points.split(";")])
        else:
            c = S.polytope.centroid
            v = S.polytope.vertices[0]
            pts = np.array([c + t * (v - c) for t in (0.0, 0.5, 0.9, 0.99, 0.999)])
        maj = estimates.rellich_majorant_probe(S, pts, args.trials, args.seed)
        rows = [list(p) + [u] for p, u in zip(pts, maj)]
        emit_csv(args, [f"x{i}" for i in range(S.dim)] + ["majorant"], rows, m)
        return 0
    # meanvalue
    rows = []
    for i, rng in enumerate(estimates._streams(args.seed, args.trials)):
        u = estimates.random_pa(S, rng)
        x = _interior_point(S, rng)
        lhs, rhs = estimates.mean_value_check(S, u, x)
        rows.append([i, lhs, rhs])
    emit_csv(args, ["trial", "lhs", "rhs"], rows, m)
    return 0


def _interior_point(S, rng):
    V = S.polytope.vertices
    w = rng.dirichlet(np.ones(len(V)))
    x = w @ V
    return 0.999 * x + 0.001 * S.polytope.centroid


def cmd_example(args):
    started = time.time()
    out = Path(args.out)
    rows = blowup.curve_table()
    io.write_csv(out / "curve.csv", list(blowup.CURVE_COLUMNS), rows)
    xs = [x for x in np.round(np.linspace(-3.0, 3.0, 601), 12) if x != 0.0]
    lam_rows = []
    for x in xs:
        lam = blowup.lambda_of_x(x)
        lam_rows.append([x, lam, lam / (2 * math.pi)])
    io.write_csv(out / "lambda_curve.csv", ["x", "lambda", "lambda_over_2pi"], lam_rows)
    tab = []
    for r in blowup.X_LAMBDA_TABLE:
        lam = 2 * math.pi * r
        tab.append([r, lam, blowup.x_lambda(lam)])
    io.write_csv(out / "x_lambda.csv", ["lambda_over_2pi", "lambda", "x_lambda"], tab)
    m = io.manifest("example blowup-cp2", None, {}, None, started)
    io.write_json(out / "manifest.json", m)
    print(f"max_rel_err={max(r[-1] for r in rows):.3e}")
    return 0


# -- parser -------------------------------------------------------------------


def build_parser():
    p = argparse.ArgumentParser(prog="muentropy", description=__doc__)
    sub = p.add_subparsers(dest="cmd", required=True)

    v = sub.add_parser("validate", help="check a system file")
    v.add_argument("system")
    v.add_argument("--emit", help="write the normalized system JSON here")
    v.set_defaults(func=cmd_validate)

    def temps(sp, required=False, multi=False):
        g = sp.add_mutually_exclusive_group(required=required)
        kind = str if multi else float
        g.add_argument("--T", type=kind, default=None)
        g.add_argument("--lambda", dest="lam", type=kind, default=None)

    def solver(sp):
        sp.add_argument("--pieces", type=int)
        sp.add_argument("--starts", type=int)
        sp.add_argument("--seed", type=int, default=0)

    r = sub.add_parser("report", help="functionals of u(q)")
    r.add_argument("system")
    r.add_argument("--q", help="PA function JSON")
    r.add_argument("--xi", help="linear function as comma-separated vector")
    temps(r, multi=True)
    r.add_argument("--out")
    r.set_defaults(func=cmd_report)

    o = sub.add_parser("optimize", help="minimize the free mu-energy")
    o.add_argument("system")
    temps(o, required=True)
    solver(o)
    o.add_argument("--linear", action="store_true", help="restrict to linear functions")
    o.add_argument("--out")
    o.set_defaults(func=cmd_optimize)

    s = sub.add_parser("sweep", help="canonical reports over a temperature grid")
    s.add_argument("system")
    s.add_argument("--T-grid", dest="T_grid", required=True)
    solver(s)
    s.add_argument("--out")
    s.set_defaults(func=cmd_sweep)

    t = sub.add_parser("thermo", help="thermodynamic experiments")
    tsub = t.add_subparsers(dest="thermo_cmd", required=True)
    tf = tsub.add_parser("family")
    tf.add_argument("system")
    tf.add_argument("--T-grid", dest="T_grid", required=True)
    solver(tf)
    tf.add_argument("--out")
    te = tsub.add_parser("equilibrium")
    te.add_argument("system")
    te.add_argument("--U", type=float, required=True)
    solver(te)
    te.add_argument("--out")
    th = tsub.add_parser("heat-bath")
    th.add_argument("system")
    th.add_argument("--reservoir")
    th.add_argument("--T-R", dest="T_R", type=float, default=1.0)
    th.add_argument("--T-probe", dest="T_probe", type=float, default=0.5)
    th.add_argument("--N", default="1,2,4,8,16,32")
    solver(th)
    th.add_argument("--out")
    t.set_defaults(func=cmd_thermo)

    e = sub.add_parser("estimates", help="empirical estimate probes")
    esub = e.add_subparsers(dest="est_cmd", required=True)
    for name in ("poincare", "rellich", "meanvalue"):
        ep = esub.add_parser(name)
        ep.add_argument("system")
        ep.add_argument("--trials", type=int, default=200)
        ep.add_argument("--seed", type=int, default=0)
        ep.add_argument("--out")
        if name == "poincare":
            ep.add_argument("--exponent", type=float)
        if name == "rellich":
            ep.add_argument("--points", help="semicolon-separated points, e.g. '0,0;0.5,0.1'")
    e.set_defaults(func=cmd_estimates)

    x = sub.add_parser("example", help="built-in worked examples")
    xsub = x.add_subparsers(dest="example", required=True)
    xb = xsub.add_parser("blowup-cp2")
    xb.add_argument("--out", default="blowup-cp2")
    x.set_defaults(func=cmd_example)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except GeometryError as exc:
        print(f"geometry error: {exc}", file=sys.stderr)
        return EXIT_GEOMETRY
    except NoConvergence as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except OutOfRange as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE


if __name__ == "__main__":
    sys.exit(main())
