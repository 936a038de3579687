"""Command-line front end: run one experiment, emit a CSV or JSON table.

Exit status is 0 on success, 2 on invalid input and 3 when a resource guard
aborts the run.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from fractions import Fraction

import numpy as np

from . import lattice, sums, tauberian
from .geometry import DEFAULT_POINT_BUDGET, GeometryPair, ResourceLimitError
from .mollifier import Mollifier

EXIT_OK, EXIT_INVALID, EXIT_RESOURCE = 0, 2, 3


class CliError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise CliError(message)


def parse_lambdas(text: str) -> list[float]:
    """``100,200,400`` or an inclusive range ``lo:hi:step``."""
    text = text.strip()
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise CliError(f"range must be lo:hi:step, got {text!r}")
        lo, hi, step = (float(p) for p in parts)
        if not step > 0 or hi < lo:
            raise CliError(f"bad range {text!r}")
        k = int(math.floor((hi - lo) / step + 1e-9))
        vals = [lo + i * step for i in range(k + 1)]
    else:
        vals = [float(v) for v in text.split(",") if v.strip()]
    if not vals or any(not (math.isfinite(v) and v > 0) for v in vals):
        raise CliError(f"lambda values must be positive, got {text!r}")
    return vals


def parse_floats(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v.strip()]


def _table_text(header, rows, fmt: str, extra=None) -> str:
    if fmt == "json":
        payload = [dict(zip(header, r)) for r in rows]
        if extra is not None:
            payload = dict(extra, rows=payload)
        return json.dumps(payload, indent=2, allow_nan=True) + "\n"
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for r in rows:
        writer.writerow([sums.format_number(v) for v in r])
    return buf.getvalue()


def _reports_text(reports, fmt: str) -> str:
    rows = [[rep.to_dict()[k] for k in sums.CSV_COLUMNS] for rep in reports]
    return _table_text(sums.CSV_COLUMNS, rows, fmt)


def _need(args, *names):
    missing = [n for n in names if getattr(args, n) is None]
    if missing:
        raise CliError(f"{args.command} needs --{', --'.join(m.replace('_', '-') for m in missing)}")


def cmd_cone_sum(args):
    _need(args, "a", "b")
    pair = GeometryPair.from_spec(args.geometry)
    reps = [sums.cone_sum(pair, sums.ConeRegion(args.a, args.b, lam), args.point_budget)
            for lam in args.lambdas]
    return _reports_text(reps, args.format or "csv")


def cmd_ladder_sum(args):
    _need(args, "c", "w0")
    pair = GeometryPair.from_spec(args.geometry)
    p = 0.5 if args.p is None else args.p
    reps = [sums.ladder_sum(pair, sums.StripRegion(args.c, args.w0, p, lam), args.point_budget)
            for lam in args.lambdas]
    return _reports_text(reps, args.format or "csv")


def cmd_density(args):
    pair = GeometryPair.from_spec(args.geometry)
    reps = []
    for lam in args.lambdas:
        em = sums.empirical_measure(pair, lam, args.bins, args.point_budget)
        limit = em.limit_masses(pair)
        for i in range(args.bins):
            reps.append(sums.SumReport(pair.describe(), pair.n, pair.d, "bin", lam,
                                       float(em.masses[i]), float(limit[i]), em.point_count,
                                       a=float(em.edges[i]), b=float(em.edges[i + 1])))
    return _reports_text(reps, args.format or "csv")


def cmd_smoothed(args):
    pair = GeometryPair.from_spec(args.geometry)
    rho = Mollifier.from_spec(args.mollifier)
    slope = 0.5 if args.a is None else args.a
    reps = [sums.smoothed_report(pair, rho, slope * lam, lam, args.point_budget)
            for lam in args.lambdas]
    return _reports_text(reps, args.format or "csv")


def cmd_weyl(args):
    pair = GeometryPair.from_spec(args.geometry)
    reps = [sums.local_weyl_sum(pair, lam, args.point_budget) for lam in args.lambdas]
    return _reports_text(reps, args.format or "csv")


def _window(args) -> tuple[float, float]:
    return (max(args.a - args.window, 0.0), min(args.b + args.window, 1.0))


def cmd_tauberian_check(args):
    a = 0.3 if args.a is None else args.a
    b = 0.7 if args.b is None else args.b
    args.a, args.b = a, b
    pair = GeometryPair.from_spec(args.geometry)
    rho = Mollifier.from_spec(args.mollifier)
    lam_top = max(args.lambdas)
    N = tauberian.PointMeasure.from_spectrum(pair, lam_top + rho.tail_radius + 2.0, _window(args))
    m = _calibrated_order(N, rho, pair, a, b, lam_top)
    rows = []
    for lam in args.lambdas:
        rep = tauberian.tauberian_gap(N, rho, tauberian.Region.cone(a, b, lam, args.grid_h), m)
        rows.append([lam, rep.mass, rep.smoothed, rep.gap, rep.bound, rep.ratio])
    extra = {"geometry": pair.describe(), "a": a, "b": b, "mollifier": rho.describe(),
             "order_K": float(m(np.zeros(2))), "order_power": float(pair.n - 2)}
    return _table_text(["lambda_max", "mass", "smoothed", "gap", "bound", "ratio"], rows,
                       args.format or "json", extra)


def _calibrated_order(N, rho, pair, a, b, lam_top, side=40):
    """K (1+|x|)^(n-2) with K fitted on a grid of points inside the largest cone."""
    mu, lam = np.meshgrid(np.linspace(0.0, b * lam_top, side), np.linspace(0.0, lam_top, side))
    pts = np.column_stack((mu.ravel(), lam.ravel()))
    ok = pts[:, 1] > 0
    r = np.where(ok, pts[:, 0] / np.where(ok, pts[:, 1], 1.0), -1.0)
    pts = pts[ok & (r >= a) & (r < b)]
    return tauberian.calibrate_order_function(N, rho, pts, float(pair.n - 2))


def cmd_lemma_check(args):
    fmt = args.format or "json"
    power = args.m_power
    m = tauberian.OrderFunction.constant() if power == 0 else tauberian.OrderFunction.power(1.0, power)
    nu = args.nu
    if args.lemma == "thickening":
        a, b = args.thickening
        radii = parse_floats(args.radius)
        rows = []
        for R in radii:
            omega = tauberian.Region.disk(R, h=args.grid_h)
            lhs, rhs, implied = tauberian.check_lemma_thickening(omega, m, a, b, nu)
            rows.append([R, a, b, lhs, rhs, implied])
        header = ["radius", "a", "b", "lhs", "rhs_base", "implied_C"]
        lo, hi = -max(radii) - abs(b) - 1, max(radii) + abs(b) + 1
    else:
        a = 0.3 if args.a is None else args.a
        b = 0.7 if args.b is None else args.b
        args.a, args.b = a, b
        pair = GeometryPair.from_spec(args.geometry)
        rho = Mollifier.from_spec(args.mollifier)
        rs = parse_floats(args.r_values)
        rows = []
        for lam in args.lambdas:
            N = tauberian.PointMeasure.from_spectrum(pair, lam + max(rs) + 2.0, _window(args))
            omega = tauberian.Region.cone(a, b, lam, args.grid_h)
            for r in rs:
                mass, bound, implied = tauberian.check_annulus_mass(N, rho, omega, m, r, nu)
                rows.append([lam, r, mass, bound, implied])
        header = ["lambda_max", "r", "mass", "bound", "implied_C"]
        top = max(args.lambdas) + max(rs) + 1
        lo, hi = -top, top
    cert = m.certificate([lo, lo], [hi, hi], seed=args.seed)
    extra = {"lemma": args.lemma, "m_power": power, "nu": m.nu + 1 if nu is None else nu,
             "order_certificate": cert, "seed": args.seed}
    return _table_text(header, rows, fmt, extra)


def cmd_counterexample(args):
    try:
        slope = Fraction(args.c_slope)
    except (ValueError, ZeroDivisionError):
        raise CliError(f"--c-slope must be a rational p/q, got {args.c_slope!r}") from None
    if args.w_steps < 1:
        raise CliError("--w-steps must be >= 1")
    fmt = args.format or "csv"
    out = []
    for lam in args.lambdas:
        w_grid = np.linspace(0.0, args.w_max, args.w_steps + 1)
        scan = lattice.jump_scan(lam, w_grid, slope=slope, point_budget=args.point_budget)
        flagged_lo = {f[0] for f in scan.flagged}
        for row in scan.rows():
            out.append([lam, scan.c, row["w"], row["count"], row["count_half_open"],
                        row["main_term"], row["w"] in flagged_lo])
    header = ["lambda", "c", "w", "count", "count_half_open", "main_term", "jump_starts_here"]
    return _table_text(header, out, fmt)


def cmd_count(args):
    if args.n is None or args.d is None:
        raise CliError("count needs --n and --d")
    results = []
    for lam in args.lambdas:
        q = lattice.LatticeQuery(args.n, args.d, lam, args.shape, a=args.a, b=args.b,
                                 c=args.c, w=args.w)
        results.append(lattice.count(q, args.point_budget))
    fmt = args.format or "json"
    if fmt == "json":
        if len(results) == 1:
            return json.dumps({"count": results[0]}) + "\n"
        return json.dumps([{"lambda": lam, "count": c} for lam, c in zip(args.lambdas, results)]) + "\n"
    return _table_text(["lambda", "count"], list(zip(args.lambdas, results)), "csv")


COMMANDS = {
    "cone-sum": cmd_cone_sum,
    "ladder-sum": cmd_ladder_sum,
    "density": cmd_density,
    "smoothed": cmd_smoothed,
    "weyl": cmd_weyl,
    "tauberian-check": cmd_tauberian_check,
    "lemma-check": cmd_lemma_check,
    "counterexample": cmd_counterexample,
    "count": cmd_count,
}


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--geometry", default="torus:n=2,d=1",
                        help="torus:n=N,d=D | sphere-latitude:phi0=X | sphere-meridian")
    common.add_argument("--lambda", dest="lambda_text", required=True,
                        help="comma list (100,200) or inclusive range lo:hi:step")
    common.add_argument("--a", type=float)
    common.add_argument("--b", type=float)
    common.add_argument("--c", type=float)
    common.add_argument("--w0", type=float)
    common.add_argument("--p", type=float)
    common.add_argument("--mollifier", default="gaussian:s=1")
    common.add_argument("--output", help="write here instead of stdout")
    common.add_argument("--format", choices=("csv", "json"))
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--point-budget", type=int, default=DEFAULT_POINT_BUDGET)

    parser = _Parser(prog="eigenrestrict", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in ("cone-sum", "ladder-sum", "smoothed", "weyl"):
        sub.add_parser(name, parents=[common])
    sp = sub.add_parser("density", parents=[common])
    sp.add_argument("--bins", type=int, default=50)

    sp = sub.add_parser("tauberian-check", parents=[common])
    sp.add_argument("--window", type=float, default=0.1,
                    help="keep atoms with mu/lambda in [a - window, b + window]")
    sp.add_argument("--grid-h", type=float, default=0.5)

    sp = sub.add_parser("lemma-check", parents=[common])
    sp.add_argument("--lemma", choices=("thickening", "annulus"), default="thickening")
    sp.add_argument("--radius", default="20,40,80", help="disk radii for the thickening lemma")
    sp.add_argument("--thickening", type=float, nargs=2, default=(0.0, 5.0), metavar=("A", "B"))
    sp.add_argument("--r-values", default="1,2,4,8", help="outer band widths for the annulus lemma")
    sp.add_argument("--m-power", type=float, default=0.0, help="m(x) = (1+|x|)^power")
    sp.add_argument("--nu", type=float)
    sp.add_argument("--window", type=float, default=0.1)
    sp.add_argument("--grid-h", type=float, default=0.25)

    sp = sub.add_parser("counterexample", parents=[common])
    sp.add_argument("--c-slope", default="1/1", help="c/sqrt(1-c^2) as a rational p/q")
    sp.add_argument("--w-steps", type=int, default=200)
    sp.add_argument("--w-max", type=float, default=1.0)

    sp = sub.add_parser("count", parents=[common])
    sp.add_argument("--shape", choices=("ball", "cone", "strip"), default="ball")
    sp.add_argument("--n", type=int)
    sp.add_argument("--d", type=int)
    sp.add_argument("--w", type=float)
    return parser


def run(argv=None, stdout=None) -> int:
    stdout = sys.stdout if stdout is None else stdout
    try:
        args = build_parser().parse_args(argv)
        args.lambdas = parse_lambdas(args.lambda_text)
        text = COMMANDS[args.command](args)
        if args.output:
            with open(args.output, "w", newline="") as fh:
                fh.write(text)
        else:
            stdout.write(text)
    except ResourceLimitError as exc:
        print(f"eigenrestrict: resource limit: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except (ValueError, OSError) as exc:
        print(f"eigenrestrict: error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    return EXIT_OK


def main(argv=None) -> None:
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
