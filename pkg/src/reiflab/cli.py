"""Command line interface.

Exit codes: 0 all checks passed, 1 a bound or certification failed,
2 usage or input error, 3 a hypothesis was not met (check inapplicable).
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from pathlib import Path

import numpy as np

from ._util import CheckResult, jsonable
from .domains import Domain, DomainError, DomainSpec, rasterize
from .geometry import GeometryError, Hyperplane
from .raster import GridTooLarge

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_INAPPLICABLE = 0, 1, 2, 3

GEN_KINDS = {
    "halfspace": "halfspace",
    "ball": "ball",
    "rectangle": "rectangle",
    "annulus": "annulus",
    "lipschitz": "lipschitz_graph",
    "koch": "koch_flat",
    "tentacle": "disk_with_tentacle",
    "slit": "disk_with_slit",
    "disks": "disks",
}


class UsageError(Exception):
    pass


def _floats(text: str, n: int | None = None):
    try:
        vals = [float(v) for v in text.replace(";", ",").split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected numbers, got {text!r}") from None
    if n is not None and len(vals) != n:
        raise argparse.ArgumentTypeError(f"expected {n} numbers, got {text!r}")
    return vals


def _pair(text):
    return tuple(_floats(text, 2))


def _box(text):
    return tuple(_floats(text, 4))


def _centers(text):
    vals = _floats(text)
    if not vals or len(vals) % 2:
        raise argparse.ArgumentTypeError("centers need an even count of numbers: x1,y1;x2,y2")
    return [tuple(vals[i:i + 2]) for i in range(0, len(vals), 2)]


def _jobs(args) -> int:
    env = os.environ.get("REIFLAB_JOBS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise UsageError(f"REIFLAB_JOBS must be an integer, got {env!r}") from None
    return max(1, int(getattr(args, "jobs", 1) or 1))


def _load(path) -> Domain:
    try:
        return Domain.load(path)
    except FileNotFoundError:
        raise UsageError(f"no such file: {path}") from None


# ---------------------------------------------------------------------------
# output


def _flatten(obj, prefix=""):
    out = {}
    if isinstance(obj, dict):
        for k, v in obj.items():
            out.update(_flatten(v, f"{prefix}{k}."))
        return out
    if isinstance(obj, list) and obj and all(isinstance(v, (int, float)) for v in obj) and len(obj) <= 4:
        for i, v in enumerate(obj):
            out[f"{prefix}{i}"] = v
        return out
    key = prefix[:-1]
    out[key] = json.dumps(obj) if isinstance(obj, (list, dict)) else obj
    return out


def _to_csv(payload, rows=None) -> str:
    rows = rows if rows is not None else [payload]
    flat = [_flatten(jsonable(r)) for r in rows]
    cols = []
    for r in flat:
        for k in r:
            if k not in cols:
                cols.append(k)
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=cols, lineterminator="\n")
    w.writeheader()
    for r in flat:
        w.writerow(r)
    return buf.getvalue()


def _emit(args, payload, rows=None):
    data = jsonable(payload)
    text = json.dumps(data, indent=2) + "\n"
    out = getattr(args, "output", None)
    if out:
        Path(out).write_text(text)
    if getattr(args, "csv", False):
        sys.stdout.write(_to_csv(data, rows))
    elif not out:
        sys.stdout.write(text)
    else:
        sys.stdout.write(f"wrote {out}\n")


def _status_code(status: str) -> int:
    return {"pass": EXIT_OK, "vacuous": EXIT_OK, "clipped": EXIT_OK, "fail": EXIT_FAIL, "inapplicable": EXIT_INAPPLICABLE}[status]


# ---------------------------------------------------------------------------
# subcommands


def cmd_gen(args):
    kind = GEN_KINDS[args.kind]
    c = args.center
    if kind == "halfspace":
        spec = DomainSpec.halfspace(args.normal, args.offset)
    elif kind == "ball":
        spec = DomainSpec.ball(args.R, c)
    elif kind == "rectangle":
        spec = DomainSpec.rectangle(args.a, args.b, c)
    elif kind == "annulus":
        spec = DomainSpec.annulus(args.R, args.t, c)
    elif kind == "lipschitz_graph":
        spec = DomainSpec.lipschitz_graph(args.L, args.seed, args.offset, args.modes)
    elif kind == "koch_flat":
        spec = DomainSpec.koch_flat(args.theta, args.depth, args.sides, args.R, c)
    elif kind == "disk_with_tentacle":
        spec = DomainSpec.disk_with_tentacle(args.w, args.length, args.R, c)
    elif kind == "disk_with_slit":
        spec = DomainSpec.disk_with_slit(args.w, args.length, args.R, c)
    else:
        if not args.centers:
            raise UsageError("disks needs --centers")
        spec = DomainSpec.disks(args.centers, args.R)
    d = rasterize(spec, args.res, args.bbox)
    if not args.output:
        raise UsageError("gen needs -o/--output")
    d.save(args.output)
    summary = {"label": d.label, "bbox": d.bbox, "resolution": d.resolution, "shape": [d.height, d.width], "area": d.area()}
    if args.csv:
        sys.stdout.write(_to_csv(summary))
    else:
        sys.stdout.write(json.dumps(jsonable(summary)) + "\n")
    return EXIT_OK


def cmd_flatness(args):
    from .flatness import flatness_profile

    d = _load(args.domain)
    rep = flatness_profile(d, args.r0, args.scales, max_points=args.max_points, jobs=_jobs(args))
    payload = rep.to_dict(with_samples=args.samples)
    rows = [
        {"x": s.x[0], "y": s.x[1], "r": s.r, "epsilon": s.epsilon, "theta": s.theta, "separation": ok}
        for s, ok in zip(rep.samples, rep.separation)
    ]
    _emit(args, payload, rows)
    return EXIT_OK


def cmd_certify(args):
    from .flatness import certify

    d = _load(args.domain)
    res = certify(d, args.eps, args.r0, args.scales, max_points=args.max_points, jobs=_jobs(args))
    _emit(args, res)
    return EXIT_OK if res.certified else EXIT_FAIL


def cmd_jones(args):
    from .jones import empirical_jones_constant

    d = _load(args.domain)
    est = empirical_jones_constant(d, args.r0 / 7, args.pairs, args.seed, mode=args.mode, jobs=_jobs(args))
    rows = []
    for (i, r), v, case in zip(enumerate(est.reports), est.values, est.cases):
        row = {"pair": i, "value": v, "case": case}
        if r is not None:
            row.update(length_ratio=r.length_ratio, worst_delta=r.worst_delta, margin=r.margin, passed_with_margin=r.passed_with_margin)
        rows.append(row)
    _emit(args, est, rows)
    return EXIT_OK if est.all_passed_with_margin else EXIT_FAIL


def cmd_dist(args):
    from .metrics import domain_distance

    rep = domain_distance(_load(args.X), _load(args.Y), args.mode)
    _emit(args, rep)
    return EXIT_OK


def cmd_symdiff(args):
    from .metrics import symmetric_difference_measure

    X, Y = _load(args.X), _load(args.Y)
    _emit(args, {"symmetric_difference": symmetric_difference_measure(X, Y), "resolution": X.resolution})
    return EXIT_OK


def cmd_radii(args):
    from .metrics import radii

    rep = radii(_load(args.domain))
    _emit(args, rep)
    return EXIT_OK if rep.ordered else EXIT_FAIL


def cmd_components(args):
    from .components import check_count_bound, check_separation_bound, components

    d = _load(args.domain)
    rep = components(d, args.r0)
    payload = rep.to_dict()
    code = EXIT_OK
    if args.r0 is not None:
        cc = check_count_bound(d, args.r0, rep)
        cs = check_separation_bound(d, args.r0, rep)
        payload["checks"] = [cc, cs]
        code = max(_status_code(cc.status), _status_code(cs.status))
    rows = [{"component": i, "label": c.label, "area": a} for i, (c, a) in enumerate(zip(rep.components, rep.areas))]
    _emit(args, payload, rows)
    if args.export:
        out = Path(args.export)
        out.mkdir(parents=True, exist_ok=True)
        for i, c in enumerate(rep.components):
            c.save(out / f"component_{i}.json")
    return code


def _certify_first(d, args) -> CheckResult | None:
    """An inapplicable result when --eps is given and d is not certified."""
    if getattr(args, "eps", None) is None or getattr(args, "assume_certified", False):
        return None
    from .flatness import certify

    res = certify(d, args.eps, args.r0, args.scales, max_points=args.max_points, jobs=_jobs(args))
    if not res.certified:
        return CheckResult("certification", "inapplicable", reason=f"not certified ({res.reason})", violation=res)
    return None


def cmd_check(args):
    from . import flatness, metrics
    from .components import check_count_bound, check_separation_bound

    which = {"boundary-vs-sets": "lemma51", "measure-bounds": "lemma52"}.get(args.which, args.which)
    if which in ("lemma51", "lemma52"):
        X, Y = _load(args.X), _load(args.Y)
        fn = metrics.check_boundary_vs_sets if which == "lemma51" else metrics.check_measure_bounds
        kw = {} if args.assume_certified else {"n_scales": args.scales, "max_points": args.max_points, "jobs": _jobs(args)}
        res = fn(X, Y, args.eps, args.r0, certified=True if args.assume_certified else None, **kw)
    elif which == "angle":
        d = _load(args.domain)
        a = flatness.normal_angle_check(d, args.x, args.r, args.M, args.eps)
        res = CheckResult("angle", "pass" if a.passed else "fail", a.cos, a.bound, a.margin, x=a.x, r=a.r, M=a.M)
    else:
        d = _load(args.domain)
        pre = _certify_first(d, args)
        if pre is not None:
            res = pre
        elif which == "radius":
            res = metrics.check_inner_radius_bound(d, args.r0)
        elif which == "count":
            res = check_count_bound(d, args.r0)
        else:
            res = check_separation_bound(d, args.r0)
    _emit(args, res)
    return _status_code(res.status)


def _overlay_from_json(data):
    if isinstance(data, dict):
        if "vertices" in data:
            from .jones import Polyline

            return [Polyline(np.asarray(data["vertices"], dtype=float))]
        if "base" in data and "normal" in data:
            return [Hyperplane(data["base"], data["normal"])]
        out = []
        for key in ("curve", "worst", "plane"):
            if key in data and data[key] is not None:
                out += _overlay_from_json(data[key])
        return out
    if isinstance(data, list):
        return [o for item in data for o in _overlay_from_json(item)]
    return []


def cmd_render(args):
    from .render import render

    d = _load(args.domain)
    overlays = []
    for p in args.overlays:
        try:
            data = json.loads(Path(p).read_text())
        except FileNotFoundError:
            raise UsageError(f"no such file: {p}") from None
        found = _overlay_from_json(data)
        if not found:
            raise UsageError(f"{p}: no curve or plane found")
        overlays += found
    svg = render(d, overlays, size=args.size)
    if args.output:
        Path(args.output).write_text(svg)
        sys.stdout.write(f"wrote {args.output}\n")
    else:
        sys.stdout.write(svg)
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-o", "--output", help="write the JSON report here")
    common.add_argument("--csv", action="store_true", help="print a flat CSV table instead of JSON")
    common.add_argument("--jobs", type=int, default=1, help="worker processes (REIFLAB_JOBS overrides)")

    prof = argparse.ArgumentParser(add_help=False)
    prof.add_argument("--scales", type=int, default=2, help="dyadic scales below r0")
    prof.add_argument("--max-points", type=int, default=1000, help="boundary points profiled")

    p = argparse.ArgumentParser(prog="reiflab", description="Flatness, Jones curves and distances on raster domains.")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", parents=[common], help="rasterize a domain")
    g.add_argument("kind", choices=sorted(GEN_KINDS))
    g.add_argument("--res", type=float, required=True, help="cell size")
    g.add_argument("--bbox", type=_box, default=None, help="x0,y0,x1,y1")
    g.add_argument("--R", type=float, default=1.0)
    g.add_argument("--center", type=_pair, default=(0.0, 0.0))
    g.add_argument("--a", type=float, default=1.0)
    g.add_argument("--b", type=float, default=1.0)
    g.add_argument("--t", type=float, default=0.1)
    g.add_argument("--L", type=float, default=0.1)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--offset", type=float, default=0.0)
    g.add_argument("--modes", type=int, default=4)
    g.add_argument("--normal", type=_pair, default=(0.0, 1.0))
    g.add_argument("--theta", type=float, default=5.0)
    g.add_argument("--depth", type=int, default=3)
    g.add_argument("--sides", type=int, default=None)
    g.add_argument("--w", type=float, default=0.05)
    g.add_argument("--length", type=float, default=1.0)
    g.add_argument("--centers", type=_centers, default=None, help="x1,y1;x2,y2;...")
    g.set_defaults(func=cmd_gen)

    f = sub.add_parser("flatness", parents=[common, prof], help="flatness profile")
    f.add_argument("domain")
    f.add_argument("--r0", type=float, required=True)
    f.add_argument("--samples", action="store_true", help="include every sample in the JSON")
    f.set_defaults(func=cmd_flatness)

    c = sub.add_parser("certify", parents=[common, prof], help="certify (eps, r0)-flatness")
    c.add_argument("domain")
    c.add_argument("--eps", type=float, required=True)
    c.add_argument("--r0", type=float, required=True)
    c.set_defaults(func=cmd_certify)

    j = sub.add_parser("jones", parents=[common], help="curves between sampled pairs")
    j.add_argument("domain")
    j.add_argument("--pairs", type=int, default=100)
    j.add_argument("--r0", type=float, required=True, help="flatness radius; pairs are within r0/7")
    j.add_argument("--seed", type=int, default=0)
    j.add_argument("--mode", choices=["uniform", "boundary"], default="uniform")
    j.set_defaults(func=cmd_jones)

    dd = sub.add_parser("dist", parents=[common], help="Hausdorff distance between two domains")
    dd.add_argument("X")
    dd.add_argument("Y")
    dd.add_argument("--mode", choices=["sets", "complements", "boundaries"], default="sets")
    dd.set_defaults(func=cmd_dist)

    s = sub.add_parser("symdiff", parents=[common], help="measure of the symmetric difference")
    s.add_argument("X")
    s.add_argument("Y")
    s.set_defaults(func=cmd_symdiff)

    r = sub.add_parser("radii", parents=[common], help="inner radius, outer radius, diameter")
    r.add_argument("domain")
    r.set_defaults(func=cmd_radii)

    cp = sub.add_parser("components", parents=[common], help="connected components")
    cp.add_argument("domain")
    cp.add_argument("--r0", type=float, default=None)
    cp.add_argument("--export", default=None, help="directory for one domain file per component")
    cp.set_defaults(func=cmd_components)

    ck = sub.add_parser("check", help="inequality checks")
    cks = ck.add_subparsers(dest="which", required=True)
    for name, alias in (("lemma51", "boundary-vs-sets"), ("lemma52", "measure-bounds")):
        q = cks.add_parser(name, aliases=[alias], parents=[common, prof])
        q.add_argument("X")
        q.add_argument("Y")
        q.add_argument("--eps", type=float, required=True)
        q.add_argument("--r0", type=float, required=True)
        q.add_argument("--assume-certified", action="store_true", help="skip certification")
        q.set_defaults(func=cmd_check)
    q = cks.add_parser("angle", parents=[common])
    q.add_argument("domain")
    q.add_argument("--x", type=_pair, required=True)
    q.add_argument("--r", type=float, required=True)
    q.add_argument("--M", type=float, required=True)
    q.add_argument("--eps", type=float, required=True)
    q.set_defaults(func=cmd_check)
    for name in ("radius", "count", "separation"):
        q = cks.add_parser(name, parents=[common, prof])
        q.add_argument("domain")
        q.add_argument("--r0", type=float, required=True)
        q.add_argument("--eps", type=float, default=None, help="certify at (eps, r0) first")
        q.set_defaults(func=cmd_check)

    rd = sub.add_parser("render", help="SVG picture of a domain with overlays")
    rd.add_argument("domain")
    rd.add_argument("overlays", nargs="*", help="JSON files holding curves or planes")
    rd.add_argument("-o", "--output")
    rd.add_argument("--size", type=int, default=600)
    rd.set_defaults(func=cmd_render)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse exits on --help and on usage errors
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    try:
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"reiflab: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DomainError, GeometryError, GridTooLarge, ValueError) as exc:
        print(f"reiflab: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


run = main

if __name__ == "__main__":
    sys.exit(main())
