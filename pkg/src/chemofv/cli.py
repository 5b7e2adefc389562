"""Command-line interface.

Subcommands: run, converge, sweep-eps, eigen, check-mesh.
"""

from __future__ import annotations

import argparse
import os
import sys

from . import experiments as xp
from .gmsh_io import load_gmsh
from .linsolve import smallest_nonzero_eigenvalue
from .mesh import build_from_triangulation, build_uniform_1d, check_admissibility, dump_mesh
from .geometry import disk_mesh, square_mesh


def _load_config(target: str, args) -> xp.RunConfig:
    overrides = {}
    if args.out:
        overrides.setdefault("run", {})["out"] = args.out
    if args.seed is not None:
        overrides.setdefault("run", {})["seed"] = str(args.seed)
    if args.dt is not None or args.tfinal is not None:
        sched = overrides.setdefault("schedule", {})
        if args.dt is not None:
            sched["dt"] = repr(args.dt)
        if args.tfinal is not None:
            sched["t_final"] = repr(args.tfinal)
    if target in xp.PRESETS:
        return xp.preset_config(target, overrides=overrides, paper_scale=args.paper_scale)
    if os.path.exists(target):
        cfg = xp.parse_config(target)
        if args.paper_scale:
            cfg = xp.apply_paper_scale(cfg)
        for sec, kv in overrides.items():
            for key, value in kv.items():
                cfg.set(sec, key, value)
        return cfg
    raise xp.ConfigError(
        f"{target!r} is neither a preset ({', '.join(sorted(xp.PRESETS))}) nor a config file"
    )


def _mesh_from_spec(spec: str, zeta: float):
    """`uniform1d:n=64[,a=..,b=..]`, `disk:radius=..,boundary_points=..`,
    `square:edge=..,spacing=..`, or a path to an MSH file."""
    if os.path.exists(spec):
        verts, tris = load_gmsh(spec)
        return build_from_triangulation(verts, tris)
    kind, _, rest = spec.partition(":")
    kv = {}
    for tok in rest.split(","):
        if tok.strip():
            key, _, val = tok.partition("=")
            kv[key.strip()] = val.strip()
    if kind == "uniform1d":
        return build_uniform_1d(float(kv.get("a", 0)), float(kv.get("b", 1)), int(kv["n"]))
    if kind == "disk":
        return disk_mesh(float(kv.get("radius", 1)), int(kv.get("boundary_points", 256)), zeta)
    if kind == "square":
        return square_mesh(float(kv.get("edge", 10)), float(kv.get("spacing", 0.3)), zeta)
    raise xp.ConfigError(f"unknown mesh spec {spec!r}")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="chemofv", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_run_flags(p):
        p.add_argument("--out", help="output directory")
        p.add_argument("--seed", type=int, help="RNG seed for random initial data")
        p.add_argument("--paper-scale", action="store_true", dest="paper_scale",
                       help="use the published mesh sizes and horizons")
        p.add_argument("--dt", type=float, help="override the time step")
        p.add_argument("--tfinal", type=float, help="override the final time")

    p_run = sub.add_parser("run", help="run a preset or config file")
    p_run.add_argument("target", help="preset name or config path")
    add_run_flags(p_run)

    p_conv = sub.add_parser("converge", help="grid-convergence study (testcase 1)")
    p_conv.add_argument("target", nargs="?", default="testcase1")
    add_run_flags(p_conv)

    p_sweep = sub.add_parser("sweep-eps", help="quasi-stationary eps sweep (testcase 2)")
    p_sweep.add_argument("target", nargs="?", default="testcase2")
    add_run_flags(p_sweep)

    p_eig = sub.add_parser("eigen", help="smallest nonzero eigenvalue of the FV Laplacian")
    p_eig.add_argument("mesh", help="mesh spec or MSH path")
    p_eig.add_argument("--zeta", type=float, default=0.02)
    p_eig.add_argument("--tol", type=float, default=1e-10)
    p_eig.add_argument("--beta", type=float, help="also print the stability threshold")
    p_eig.add_argument("--delta", type=float, default=1.0)

    p_chk = sub.add_parser("check-mesh", help="admissibility report for a mesh")
    p_chk.add_argument("mesh", help="mesh spec or MSH path")
    p_chk.add_argument("--zeta", type=float, default=0.02)
    p_chk.add_argument("--dump", help="write a plain-text mesh dump here")

    args = parser.parse_args(argv)
    try:
        if args.command in ("run", "converge", "sweep-eps"):
            cfg = _load_config(args.target, args)
            result = xp.execute(cfg)
            out = cfg.str("run", "out", "out")
            print(f"done; outputs in {out}")
            if args.command == "converge" and hasattr(result, "levels"):
                print("k,n_cells,l2_error,l2_order,linf_error,linf_order")
                for lv in result.levels:
                    print(f"{lv.k},{lv.n_cells},{lv.l2_error:.3e},{lv.l2_order:.2f},"
                          f"{lv.linf_error:.3e},{lv.linf_order:.2f}")
            return 0
        if args.command == "eigen":
            mesh = _mesh_from_spec(args.mesh, args.zeta)
            lam = smallest_nonzero_eigenvalue(mesh, args.tol)
            print(f"lambda_1 = {lam!r}  ({mesh.n_cells} cells)")
            if args.beta is not None:
                print(f"stability threshold mu_c = {args.beta + args.delta * lam!r}")
            return 0
        if args.command == "check-mesh":
            mesh = _mesh_from_spec(args.mesh, args.zeta)
            report = check_admissibility(mesh, args.zeta)
            print(f"cells: {mesh.n_cells}, edges: {mesh.n_edges}, size: {mesh.size:.4g}")
            print(f"admissible (zeta={args.zeta}): {report.ok}; worst ratio {report.worst_ratio:.4f}")
            for e, k, r in report.offending_edges[:10]:
                print(f"  edge {e} of cell {k}: ratio {r:.4f}")
            if args.dump:
                dump_mesh(mesh, args.dump)
                print(f"dump written to {args.dump}")
            return 0
    except (xp.ConfigError, ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
