"""Command-line entry point: ``nodal-lab {gen,eig,nodal,check,suite,fit}``.

Exit codes: 0 when every inequality holds, 1 on a violation beyond tolerance,
2 on usage, IO or numerical errors.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__, analytic, concentration as conc, experiments as ex, mesh as meshmod, nodal, spectral
from .errors import NodalLabError

EXIT_PASS, EXIT_VIOLATION, EXIT_ERROR = 0, 1, 2

log = logging.getLogger("nodal_lab")


def dump_json(data, path=None) -> None:
    text = json.dumps(data, indent=2, allow_nan=False) + "\n"
    if path is None or str(path) == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8")


# -- gen / eig / nodal ---------------------------------------------------------------


def cmd_gen(args) -> int:
    shape = args.shape
    if shape == "icosphere":
        mesh = meshmod.generate_icosphere(args.depth if args.depth is not None else 4)
    elif shape == "torus":
        n = args.n if args.n is not None else 64
        mesh = meshmod.generate_flat_torus(n, args.ny or n, args.Lx, args.Ly)
    elif shape == "square":
        mesh = meshmod.generate_square(args.n if args.n is not None else 64, args.size)
    elif shape == "disk":
        mesh = meshmod.generate_disk(args.depth if args.depth is not None else 5, args.radius)
    else:
        n = args.n if args.n is not None else 32
        mesh = meshmod.generate_strip(args.size, n, args.ny or n)
    meshmod.write_off(mesh, args.out)
    print(f"wrote {args.out}: {mesh.n_vertices} vertices, {mesh.n_faces} faces, "
          f"chi={mesh.euler_characteristic()}", file=sys.stderr)
    return EXIT_PASS


def cmd_eig(args) -> int:
    mesh = meshmod.read_off(args.mesh)
    if args.dirichlet:
        pairs = spectral.dirichlet_eigenpairs(mesh, args.k)
    else:
        pairs = spectral.smallest_eigenpairs(spectral.assemble(mesh), args.k)
    data = spectral.eigenpairs_to_json(pairs)
    dump_json(data, args.out)
    print("lambda: " + " ".join(f"{p.lam:.6g}" for p in pairs), file=sys.stderr)
    return EXIT_PASS


def cmd_nodal(args) -> int:
    cfg = ex.ExperimentConfig(mode=args.mode, mesh=args.mesh, eig=args.eig, index=args.index,
                              depth=args.depth, n=args.n)
    if args.mesh and args.mode:
        mesh = meshmod.read_off(args.mesh)
        model = ex.Model(mesh, analytic.sample(analytic.parse_mode(args.mode), mesh),
                         analytic.parse_mode(args.mode).lam)
    else:
        model = ex.field_model(cfg)
    ns = nodal.extract_nodal_set(model.mesh, model.field)
    labels = nodal.nodal_domains(model.mesh, model.field)
    data = nodal.nodal_set_to_json(model.mesh, ns)
    data["lambda"] = model.lam
    data["n_domains"] = labels.count
    dump_json(data, args.out)
    if args.profile:
        dist = nodal.distance_to_set(model.mesh, ns, method=args.method)
        prof = nodal.tube_profile(dist, meshmod.normalized_measure(model.mesh),
                                  nodal.default_r_grid(model.lam))
        nodal.write_profile_csv(prof, args.profile)
    print(f"{ns.n_points} nodal points, {labels.count} nodal domains", file=sys.stderr)
    return EXIT_PASS


# -- check / suite / fit -------------------------------------------------------------

_CFG_FLAGS = ("mode", "shape", "mesh", "eig", "index", "depth", "n", "size", "tier", "method", "xi",
              "eta", "k", "p", "r_grid", "n_r", "c_ball", "c_thresh", "kappa", "C", "ricci_lower")


def config_from_args(args) -> ex.ExperimentConfig:
    data = {}
    if args.config:
        try:
            data = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise NodalLabError(f"malformed config {args.config}: {exc}") from exc
        if not isinstance(data, dict):
            raise NodalLabError("config file must hold a JSON object")
    for name in _CFG_FLAGS:
        value = getattr(args, name, None)
        if value is not None:
            data[name] = value
    data["check"] = args.check
    try:
        return ex.ExperimentConfig.from_dict(data)
    except TypeError as exc:
        raise NodalLabError(f"bad config: {exc}") from exc


def cmd_check(args) -> int:
    cfg = config_from_args(args)
    rep = ex.run_check(cfg)
    dump_json(rep.to_dict(), args.out)
    if args.csv:
        Path(args.csv).write_text(rep.to_csv(), encoding="utf-8")
    status = "pass" if rep.pass_all else "VIOLATION"
    print(f"{cfg.check}: {status} ({len(rep.records)} records, max violation {rep.max_violation:.3g}, "
          f"tol_h {rep.tol_h:.3g})", file=sys.stderr)
    return EXIT_PASS if rep.pass_all else EXIT_VIOLATION


def cmd_suite(args) -> int:
    result = ex.run_suite(args.name, args.jobs)
    dump_json(result, args.out)
    if args.csv and args.name == "convergence":
        Path(args.csv).write_text(ex.convergence_csv(result), encoding="utf-8")
    print(f"suite {args.name}: {'pass' if result['pass_all'] else 'VIOLATION'}", file=sys.stderr)
    return EXIT_PASS if result["pass_all"] else EXIT_VIOLATION


def _report_from_dict(d: dict) -> conc.CheckReport:
    recs = [conc.CheckRecord(r["x"], r["lhs"], r["rhs"], d.get("tol_h") or 0.0) for r in d["records"]]
    return conc.CheckReport(d["check"], d.get("lambda"), recs, d.get("tol_h") or 0.0,
                            d.get("fitted_constant"), d.get("mesh", {}), d.get("params", {}))


def cmd_fit(args) -> int:
    if args.target == "lemma31-c":
        if not args.mode:
            raise NodalLabError("lemma31-c fit needs at least one --mode")
        cfg = ex.ExperimentConfig(depth=args.depth, n=args.n)
        value, per = ex.lemma31_fit(args.mode, args.tier, cfg)
        dump_json({"target": args.target, "tier": args.tier, "value": value, "inputs": per}, args.out)
        return EXIT_PASS
    if not args.reports:
        raise NodalLabError(f"{args.target} fit needs report files")
    reps = []
    for path in args.reports:
        d = json.loads(Path(path).read_text(encoding="utf-8"))
        reps.append(_report_from_dict(d))
    value = conc.fit_empirical_constant(reps, args.target)
    dump_json({"target": args.target, "value": value, "inputs": [str(p) for p in args.reports]}, args.out)
    return EXIT_PASS


# -- parser ----------------------------------------------------------------------------


def _floats(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="nodal-lab", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate a model mesh as OFF")
    g.add_argument("--shape", required=True, choices=["icosphere", "torus", "square", "disk", "strip"])
    g.add_argument("--depth", type=int)
    g.add_argument("--n", type=int, help="grid resolution (torus, square, strip)")
    g.add_argument("--ny", type=int)
    g.add_argument("--Lx", type=float, default=1.0)
    g.add_argument("--Ly", type=float, default=1.0)
    g.add_argument("--size", type=float, default=1.0, help="square side or strip width")
    g.add_argument("--radius", type=float, default=1.0)
    g.add_argument("--out", default="mesh.off")
    g.set_defaults(func=cmd_gen)

    e = sub.add_parser("eig", help="smallest eigenpairs of a mesh")
    e.add_argument("--mesh", required=True)
    e.add_argument("--k", type=int, default=6)
    e.add_argument("--dirichlet", action="store_true")
    e.add_argument("--out")
    e.set_defaults(func=cmd_eig)

    n = sub.add_parser("nodal", help="nodal set and domain count of a field")
    n.add_argument("--mode")
    n.add_argument("--mesh")
    n.add_argument("--eig")
    n.add_argument("--index", type=int, default=1, help="0-based eigenpair index")
    n.add_argument("--depth", type=int)
    n.add_argument("--n", type=int)
    n.add_argument("--method", default="fmm", choices=["fmm", "graph"])
    n.add_argument("--profile", help="also write the tube profile CSV here")
    n.add_argument("--out")
    n.set_defaults(func=cmd_nodal)

    c = sub.add_parser("check", help="run one inequality check")
    c.add_argument("check", choices=list(ex.CHECKS))
    c.add_argument("--config", help="JSON config; flags override its values")
    c.add_argument("--mode")
    c.add_argument("--shape", choices=list(ex.SHAPES))
    c.add_argument("--mesh")
    c.add_argument("--eig")
    c.add_argument("--index", type=int)
    c.add_argument("--depth", type=int)
    c.add_argument("--n", type=int)
    c.add_argument("--size", type=float)
    c.add_argument("--radius", type=float, dest="size")
    c.add_argument("--tier", choices=list(ex.TIERS))
    c.add_argument("--method", choices=["fmm", "graph"])
    c.add_argument("--xi", type=float)
    c.add_argument("--eta", type=_floats)
    c.add_argument("--k", type=int)
    c.add_argument("--p", type=_floats)
    c.add_argument("--r-grid", dest="r_grid", type=_floats)
    c.add_argument("--n-r", dest="n_r", type=int)
    c.add_argument("--c-ball", dest="c_ball", type=float)
    c.add_argument("--c-thresh", dest="c_thresh", type=float)
    c.add_argument("--kappa", type=float)
    c.add_argument("--C", type=float, help="tail constant (default: fitted)")
    c.add_argument("--ricci-lower", dest="ricci_lower", type=float)
    c.add_argument("--out", help="report JSON (default stdout)")
    c.add_argument("--csv", help="also write the x,lhs,rhs,slack,pass CSV")
    c.set_defaults(func=cmd_check)

    s = sub.add_parser("suite", help="run a named suite")
    s.add_argument("name")
    s.add_argument("--jobs", type=int, help="parallel entries (default NODAL_LAB_JOBS or 1)")
    s.add_argument("--out")
    s.add_argument("--csv", help="per-level sup-gap CSV (convergence suite)")
    s.set_defaults(func=cmd_suite)

    f = sub.add_parser("fit", help="fit an empirical constant")
    f.add_argument("--target", required=True, choices=["tail-C", "inclusion-C", "lemma31-c"])
    f.add_argument("--mode", action="append", help="mode spec (lemma31-c); repeatable")
    f.add_argument("--tier", default="oracle", choices=list(ex.TIERS))
    f.add_argument("--depth", type=int)
    f.add_argument("--n", type=int)
    f.add_argument("reports", nargs="*", help="check report JSON files (tail-C, inclusion-C)")
    f.add_argument("--out")
    f.set_defaults(func=cmd_fit)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except (NodalLabError, OSError, json.JSONDecodeError, KeyError) as exc:
        print(f"nodal-lab: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
