"""Command-line interface: ``roughdisk <subcommand> ...``.

Exit status is 0 on success, 1 on a domain error (bad measure file,
infeasible level, numerical failure) and 2 on a usage error.
"""

from __future__ import annotations

import argparse
import io
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import billiard, dynamics, transport
from .errors import RoughDiskError
from .measures import format_float, histogram_csv, measure_from_spec
from .resistance import alpha_from, g_from, physical_load, resistance_coeffs


def _json(obj) -> str:
    """JSON with every float written at 17 significant digits."""

    def enc(o):
        if isinstance(o, (bool, type(None), str)):
            return json.dumps(o)
        if isinstance(o, (int, np.integer)):
            return str(int(o))
        if isinstance(o, (float, np.floating)):
            return format_float(o) if math.isfinite(o) else "null"
        if isinstance(o, dict):
            return "{" + ", ".join(f"{json.dumps(str(k))}: {enc(v)}" for k, v in o.items()) + "}"
        if isinstance(o, (list, tuple)):
            return "[" + ", ".join(enc(v) for v in o) + "]"
        raise TypeError(f"cannot encode {type(o).__name__}")

    return enc(obj) + "\n"


def _csv(header: list[str], rows) -> str:
    buf = io.StringIO()
    buf.write(",".join(header) + "\n")
    for row in rows:
        buf.write(",".join(format_float(v) for v in row) + "\n")
    return buf.getvalue()


def _emit(text: str, path: str | None) -> None:
    if path is None:
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def _shape(spec: str, convex_fraction: float) -> billiard.CavityShape:
    kind, _, arg = spec.partition(":")
    if kind == "file":
        return billiard.CavityShape.from_json(arg)
    if kind == "triangle":
        return billiard.isosceles_triangle(float(arg), convex_fraction)
    if kind == "rectangle":
        return billiard.rectangle(float(arg), convex_fraction)
    if kind == "flat":
        return billiard.flat_cavity(convex_fraction)
    raise argparse.ArgumentTypeError(f"unknown shape {spec!r}")


def _physical(text: str) -> tuple[float, float, float]:
    parts = text.split(",")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError("expected r,rho,v")
    return tuple(float(p) for p in parts)


def _positive_int(text: str) -> int:
    n = int(text)
    if n <= 0:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return n


def _nonneg_float(text: str) -> float:
    x = float(text)
    if not x >= 0:
        raise argparse.ArgumentTypeError(f"expected a nonnegative number, got {text}")
    return x


def _float_list(text: str) -> list[float]:
    return [float(p) for p in text.split(",") if p.strip()]


# ---------------------------------------------------------------------------
# subcommands


def cmd_scatter(args) -> None:
    shape = _shape(args.shape, args.convex_fraction)
    hist = billiard.empirical_measure(shape, args.n_xi, args.n_phi, args.bins, args.max_bounces)
    _emit(histogram_csv(hist), args.output)


def cmd_resistance(args) -> None:
    measure = measure_from_spec(args.measure)
    co = resistance_coeffs(measure, args.lam)
    doc = {"lambda": co.lam, "r_t": co.r_t, "r_l": co.r_l, "r_i": co.r_i,
           "alpha": alpha_from(co) if co.lam > 0 else None,
           "g": g_from(co) if co.lam > 0 and abs(co.r_i) >= 1e-12 else None}
    if args.physical is not None:
        r, rho, v = args.physical
        load = physical_load(co, r, rho, v)
        doc["force"] = list(load.force)
        doc["torque"] = load.torque
    _emit(_json(doc), args.output)


def cmd_reachable_set(args) -> None:
    if args.level is None:
        poly = transport.reachable_set(args.lam, args.directions, args.bins)
    else:
        poly = transport.level_set(args.lam, args.level, args.directions, args.bins)
    left, right = transport.polygon_area_split(poly)
    area = poly.area
    side = {"lambda": args.lam, "level": args.level, "area": area,
            "area_right_fraction": right / area if area > 0 else None,
            "vertices": len(poly.vertices)}
    _emit(_csv(["r_t", "r_l"], poly.vertices), args.output)
    sidecar = args.sidecar
    if sidecar is None and args.output is not None:
        sidecar = str(Path(args.output).with_suffix(".json"))
    if sidecar is not None:
        Path(sidecar).write_text(_json(side))


def cmd_dynamics(args) -> None:
    measure = measure_from_spec(args.measure)
    params = dynamics.DiskParams(args.mass, args.radius, args.rho, args.beta, measure)
    table = dynamics.CoeffTable.from_measure(measure)
    start = dynamics.DiskState(args.lambda0, args.v0, args.theta0)
    traj = dynamics.integrate(params, start, args.tau_end, table)
    rows = [(st.tau, st.t, st.s, st.lam, st.v, st.theta, st.pos[0], st.pos[1]) for st in traj]
    _emit(_csv(["tau", "t", "s", "lambda", "v", "theta", "x", "y"], rows), args.output)


def cmd_classify(args) -> None:
    measure = measure_from_spec(args.measure)
    params = dynamics.DiskParams(beta=args.beta, measure=measure)
    table = dynamics.CoeffTable.from_measure(measure)
    lams = args.lambdas if args.lambdas else list(np.geomspace(0.01, 8.0, 25))
    result = dynamics.classify_asymptotics(params, table, lams)
    _emit(_json([[lam, regime.value] for lam, regime in result]), args.output)


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="roughdisk", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="subcommand", required=True, metavar="SUBCOMMAND")
    measure_help = "circle, retro, rect, triangle, product or file:<histogram.csv>"

    s = sub.add_parser("scatter", help="histogram of the cavity scattering law")
    s.add_argument("--shape", required=True,
                   help="triangle:<base angle deg>, rectangle:<width/depth>, flat or file:<shape.json>")
    s.add_argument("--convex-fraction", type=_nonneg_float, default=0.0,
                   help="share of the boundary without cavities (ignored for file shapes)")
    s.add_argument("--n-xi", type=_positive_int, default=1000, help="entry positions")
    s.add_argument("--n-phi", type=_positive_int, default=1000, help="entry angles")
    s.add_argument("--bins", type=_positive_int, default=200, help="histogram bins per axis")
    s.add_argument("--max-bounces", type=_positive_int, default=billiard.MAX_BOUNCES)
    s.add_argument("--output", help="CSV path (default stdout)")
    s.set_defaults(func=cmd_scatter)

    s = sub.add_parser("resistance", help="resistance coefficients as JSON")
    s.add_argument("--measure", required=True, help=measure_help)
    s.add_argument("--lambda", dest="lam", type=_nonneg_float, required=True,
                   help="relative angular velocity omega r / v")
    s.add_argument("--physical", type=_physical, metavar="R,RHO,V",
                   help="also report dimensional force and torque")
    s.add_argument("--output", help="JSON path (default stdout)")
    s.set_defaults(func=cmd_resistance)

    s = sub.add_parser("reachable-set", help="polygon of attainable forces as CSV")
    s.add_argument("--lambda", dest="lam", type=_nonneg_float, required=True)
    s.add_argument("--level", type=float, help="restrict to torque coefficient R_I = LEVEL")
    s.add_argument("--bins", type=_positive_int, default=transport.DEFAULT_BINS)
    s.add_argument("--directions", type=_positive_int, default=transport.DEFAULT_DIRECTIONS)
    s.add_argument("--output", help="CSV path (default stdout)")
    s.add_argument("--sidecar", help="JSON summary path (default: output with .json suffix)")
    s.set_defaults(func=cmd_reachable_set)

    s = sub.add_parser("dynamics", help="integrate a trajectory; CSV rows")
    s.add_argument("--measure", required=True, help=measure_help)
    s.add_argument("--beta", type=float, required=True, help="M r^2 / I, at least 1")
    s.add_argument("--lambda0", type=_nonneg_float, required=True)
    s.add_argument("--v0", type=float, required=True)
    s.add_argument("--theta0", type=float, default=0.0)
    s.add_argument("--M", dest="mass", type=float, default=1.0)
    s.add_argument("--r", dest="radius", type=float, default=1.0)
    s.add_argument("--rho", type=float, default=1.0)
    s.add_argument("--tau-end", type=float, required=True)
    s.add_argument("--output", help="CSV path (default stdout)")
    s.set_defaults(func=cmd_dynamics)

    s = sub.add_parser("classify", help="asymptotic regime per initial lambda; JSON")
    s.add_argument("--measure", required=True, help=measure_help)
    s.add_argument("--beta", type=float, required=True)
    s.add_argument("--lambdas", type=_float_list, help="comma-separated initial lambdas")
    s.add_argument("--output", help="JSON path (default stdout)")
    s.set_defaults(func=cmd_classify)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.func(args)
    except argparse.ArgumentTypeError as exc:
        parser.error(str(exc))
    except (RoughDiskError, ValueError, OSError) as exc:
        print(f"roughdisk: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
