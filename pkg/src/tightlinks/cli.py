"""Command-line front end.

Every verb is a thin wrapper over library calls.  Exit status is 0 on
success, 1 when a computation or I/O step fails and 2 on usage errors.
"""

from __future__ import annotations

import argparse
import math
import sys

import numpy as np

from . import balance, borromean, catalog, clasp, geometry, linkio
from .errors import TightLinkError
from .numerics import NewtonConfig, Quadrature

DEFAULT_SAMPLES = 512


def _summary(obj, as_json):
    if as_json:
        print(linkio.json_text(obj, indent=None))
    else:
        for k, v in obj.items():
            print(f"{k}: {v}")


def _q(args):
    """Quadrature keyword for library calls; empty when the module default applies."""
    return {} if args.tol is None else {"q": Quadrature(abs_tol=args.tol)}


def cmd_clasp(args):
    q = _q(args)
    sc = clasp.clasp_scalars(args.tau, **q)
    out = sc._asdict()
    out.update(savings=sc.savings, savings_fraction=sc.savings_fraction)
    if args.out:
        if args.tau == 0.0:
            raise TightLinkError("no profile for tau = 0")
        phi = np.linspace(-math.asin(args.tau), math.asin(args.tau), args.samples + 1)
        u = np.clip(np.sin(phi), -args.tau, args.tau)
        x, z, kappa, s = clasp.clasp_profiles(args.tau, u, **q)
        linkio.write_table(args.out, ["u", "phi", "x", "z", "kappa", "s"],
                           zip(u, phi, x, z, kappa, s))
    if args.struts:
        loop = clasp.clasp_strut_loop(args.tau, args.samples, **q)
        linkio.write_table(args.struts, ["s1", "s2", "x1", "y1", "z1", "x2", "y2", "z2"],
                           ((st.s1, st.s2, *st.a, *st.b) for st in loop))
    if args.link:
        linkio.save(clasp.clasp_sample(args.tau, args.samples, args.leg, **q), args.link)
    if args.scalars:
        linkio.write_json(args.scalars, out)
    _summary(out, args.json)


def cmd_clasp_scan(args):
    rows = clasp.clasp_savings_scan(args.lo, args.hi, args.steps, **_q(args))
    if args.out:
        linkio.write_table(args.out, list(clasp.ScanRow._fields), rows)
    best = max(rows, key=lambda r: r.savings_fraction)
    _summary({"rows": len(rows), "best_tau": best.tau,
              "best_savings_fraction": best.savings_fraction}, args.json)


def cmd_borromean_solve(args):
    cfg = NewtonConfig(tol=args.newton_tol)
    p = borromean.solve(cfg=cfg, **_q(args))
    res = borromean.residuals(p, **_q(args))
    _summary({"rho": p.rho, "sigma": p.sigma, "tau": p.tau,
              "residual_sup": float(np.max(np.abs(res)))}, args.json)


def cmd_borromean_build(args):
    if args.variant == "b2":
        L = borromean.b2_build(args.samples)
        prof = None
    else:
        p = borromean.solve(**_q(args))
        L = borromean.build(p, args.samples)
        prof = borromean.curvature_profile(p, args.samples) if args.profile else None
    if args.out:
        linkio.save(L, args.out)
    if args.profile:
        if prof is None:
            raise TightLinkError("curvature profile is only available for b0")
        s, kappa, labels = prof
        linkio.write_table(args.profile, ["s", "kappa", "piece"], zip(s, kappa, labels))
    _summary({"variant": args.variant, "length": geometry.link_length(L),
              "thickness": geometry.link_thickness(L),
              "vertices_per_component": L.components[0].n_vertices}, args.json)


_CATALOG_BUILDERS = {
    "simple_chain": lambda a: catalog.simple_chain(a.samples),
    "wrapped": lambda a: catalog.wrapped(
        catalog.regular_polygon_angles(a.sides) if a.angles is None else a.angles, a.samples),
    "covered_hopf": lambda a: catalog.covered_hopf(a.m, a.k, a.samples),
    "naive_clasp": lambda a: catalog.naive_clasp(a.tau, a.samples, a.leg),
    "pressed_clasp": lambda a: catalog.pressed_clasp(a.samples),
}


def cmd_catalog(args):
    L = _CATALOG_BUILDERS[args.name](args)
    if args.out:
        linkio.save(L, args.out)
    _summary({"name": args.name, "components": L.n_components,
              "vertices": int(L.vertex_offsets()[-1]), "length": geometry.link_length(L)},
             args.json)


def cmd_thickness(args):
    L = linkio.load(args.link)
    T = geometry.link_thickness(L)
    length = geometry.link_length(L)
    _summary({"thickness": T, "length": length,
              "ropelength": length / T if T > 0 else math.inf,
              "obstacle_clearance": geometry.obstacle_clearance(L)}, args.json)


def cmd_verify(args):
    L = linkio.load(args.link)
    R = balance.solve_balance(L, strut_tol=args.strut_tol, verdict_threshold=args.threshold,
                              wall_tol=args.wall_tol, use_walls=not args.no_walls)
    d = R.to_dict()
    if args.out:
        linkio.write_json(args.out, d)
    if args.struts:
        starts = [c.segment_starts() for c in L.components]
        ends = [c.segment_ends() for c in L.components]

        def point(e):
            c, s, t = e
            return starts[c][s] + t * (ends[c][s] - starts[c][s])

        linkio.write_table(
            args.struts, ["comp_a", "seg_a", "t_a", "comp_b", "seg_b", "t_b", "length", "mu",
                          "x1", "y1", "z1", "x2", "y2", "z2"],
            ((*st.a, *st.b, st.length, m, *point(st.a), *point(st.b))
             for st, m in zip(R.system.struts, R.strut_mu)))
    _summary({k: d[k] for k in ("thickness", "strut_count", "wall_count", "residual_norm",
                                "normalized_residual", "verdict")}, args.json)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="tightlinks", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="verb", required=True)

    def verb(name, fn, help_):
        p = sub.add_parser(name, help=help_)
        p.set_defaults(fn=fn)
        p.add_argument("--json", action="store_true", help="print the summary as JSON")
        return p

    def quad(p):
        p.add_argument("--tol", type=float, default=None,
                       help="absolute quadrature tolerance (default: the module's own)")

    def samples(p, default=DEFAULT_SAMPLES):
        p.add_argument("--samples", "--n", dest="samples", type=int, default=default,
                       help="samples per component or curve")

    p = verb("clasp", cmd_clasp, "critical clasp scalars, profile and strut loop")
    p.add_argument("--tau", type=float, default=1.0)
    p.add_argument("--leg", type=float, default=1.0)
    p.add_argument("--out", help="profile CSV (u, phi, x, z, kappa, s)")
    p.add_argument("--scalars", help="scalars JSON")
    p.add_argument("--struts", help="strut loop CSV")
    p.add_argument("--link", help="sampled clasp link JSON")
    samples(p)
    quad(p)

    p = verb("clasp-scan", cmd_clasp_scan, "excess savings over a range of tau")
    p.add_argument("--lo", type=float, default=0.9)
    p.add_argument("--hi", type=float, default=1.0)
    p.add_argument("--steps", type=int, default=200)
    p.add_argument("--out", help="scan CSV")
    quad(p)

    p = verb("borromean-solve", cmd_borromean_solve, "solve for (rho, sigma, tau)")
    p.add_argument("--newton-tol", type=float, default=NewtonConfig().tol)
    quad(p)

    p = verb("borromean-build", cmd_borromean_build, "sample the critical or comparison rings")
    p.add_argument("--variant", choices=("b0", "b2"), default="b0")
    p.add_argument("--out", help="link JSON or CSV")
    p.add_argument("--profile", help="curvature profile CSV (s, kappa, piece)")
    samples(p, 4096)
    quad(p)

    p = verb("catalog", cmd_catalog, "reference configurations")
    p.add_argument("name", choices=sorted(_CATALOG_BUILDERS))
    p.add_argument("--out", help="link JSON or CSV")
    p.add_argument("--sides", type=int, default=6, help="regular polygon for wrapped")
    p.add_argument("--angles", type=float, nargs="+", help="turning angles for wrapped")
    p.add_argument("--m", type=int, default=1, help="first winding for covered_hopf")
    p.add_argument("--k", type=int, default=1, help="second winding for covered_hopf")
    p.add_argument("--tau", type=float, default=1.0)
    p.add_argument("--leg", type=float, default=1.0)
    samples(p)

    p = verb("thickness", cmd_thickness, "thickness, length and clearance of a link JSON")
    p.add_argument("link")

    p = verb("verify", cmd_verify, "balance verdict for a link JSON")
    p.add_argument("link")
    p.add_argument("--strut-tol", type=float, default=balance.DEFAULT_STRUT_TOL)
    p.add_argument("--wall-tol", type=float, default=balance.DEFAULT_WALL_TOL)
    p.add_argument("--threshold", type=float, default=balance.DEFAULT_THRESHOLD)
    p.add_argument("--no-walls", action="store_true", help="ignore obstacles when balancing")
    p.add_argument("--out", help="balance report JSON")
    p.add_argument("--struts", help="strut CSV with weights")
    return ap


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as e:  # usage errors and --help
        return e.code if isinstance(e.code, int) else 2
    try:
        args.fn(args)
    except (TightLinkError, ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
