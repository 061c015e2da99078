"""Command-line interface: mesh generation and experiment runs.

    oseen-vem mesh gen --family quad --n 8 --out mesh.json
    oseen-vem run --experiment table1 --mesh quad --n 8,16,32,64 --out results/
"""

from __future__ import annotations

import argparse
import json
import sys

from .harness import ExperimentConfig, run_experiment
from .mesh import (export_mesh, generate_hexagonal, generate_lshape,
                   generate_square_grid, generate_trapezoidal, generate_voronoi)

MESH_FAMILIES = ("quad", "trap", "hex", "voronoi", "lshape")
EXPERIMENTS = ("table1", "table2", "spurious", "mass-stab", "source")
RUN_MESHES = ("quad", "trap", "hex", "voronoi", "lshape5", "lshape6")


def _parse_domain(text: str):
    parts = [float(p) for p in text.split(",")]
    if len(parts) != 4:
        raise argparse.ArgumentTypeError("domain must be xmin,ymin,xmax,ymax")
    return tuple(parts)


def _parse_int_list(text: str):
    return tuple(int(p) for p in text.split(","))


def _parse_float_list(text: str):
    out = []
    for p in text.split(","):
        if "/" in p:
            num, den = p.split("/")
            out.append(float(num) / float(den))
        else:
            out.append(float(p))
    return tuple(out)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="oseen-vem")
    sub = parser.add_subparsers(dest="command", required=True)

    mesh_p = sub.add_parser("mesh", help="mesh utilities")
    mesh_sub = mesh_p.add_subparsers(dest="mesh_command", required=True)
    gen = mesh_sub.add_parser("gen", help="generate a mesh file")
    gen.add_argument("--family", choices=MESH_FAMILIES, required=True)
    gen.add_argument("--n", type=int, required=True)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--domain", type=_parse_domain, default=(-1.0, -1.0, 1.0, 1.0))
    gen.add_argument("--lloyd", type=int, default=3)
    gen.add_argument("--lshape-family", choices=("structured", "voronoi"),
                     default="structured")
    gen.add_argument("--format", choices=("json", "off"), default="json")
    gen.add_argument("--out", required=True)

    run = sub.add_parser("run", help="run an experiment")
    run.add_argument("--config", help="JSON config file; flags override it")
    run.add_argument("--experiment", choices=EXPERIMENTS)
    run.add_argument("--mesh", choices=RUN_MESHES, dest="mesh_family")
    run.add_argument("--n", type=_parse_int_list, dest="n_list")
    run.add_argument("--nu", type=float)
    run.add_argument("--beta", type=_parse_float_list)
    run.add_argument("--alpha", type=float)
    run.add_argument("--alpha-list", type=_parse_float_list, dest="alpha_list")
    run.add_argument("--beta-k", type=float, dest="beta_k")
    run.add_argument("--beta-k-list", type=_parse_float_list, dest="beta_k_list")
    run.add_argument("--nev", type=int)
    run.add_argument("--seed", type=int)
    run.add_argument("--shift", type=float)
    run.add_argument("--no-adjoint-check", action="store_true")
    run.add_argument("--out", dest="out_dir")
    return parser


def _mesh_gen(args) -> int:
    if args.family == "quad":
        mesh = generate_square_grid(args.n, args.domain)
    elif args.family == "trap":
        mesh = generate_trapezoidal(args.n, args.domain)
    elif args.family == "hex":
        mesh = generate_hexagonal(args.n, args.domain)
    elif args.family == "voronoi":
        mesh = generate_voronoi(args.n, args.domain, seed=args.seed,
                                lloyd_iters=args.lloyd)
    else:
        mesh = generate_lshape(args.n, args.lshape_family, seed=args.seed)
    export_mesh(mesh, args.out, fmt=args.format)
    print(f"wrote {args.out}: {mesh.n_cells} cells, {len(mesh.vertices)} vertices, "
          f"{mesh.n_edges} edges")
    return 0


def _run(args) -> int:
    overrides = {}
    if args.config:
        with open(args.config) as fh:
            overrides.update(json.load(fh))
    for key in ("experiment", "mesh_family", "n_list", "nu", "beta", "alpha",
                "alpha_list", "beta_k", "beta_k_list", "nev", "seed", "shift",
                "out_dir"):
        val = getattr(args, key, None)
        if val is not None:
            overrides[key] = val
    if args.no_adjoint_check:
        overrides["adjoint_check"] = False
    experiment = overrides.pop("experiment", None)
    if experiment is None:
        print("error: --experiment (or config key) is required", file=sys.stderr)
        return 2
    for key in ("n_list", "alpha_list", "beta_k_list", "beta", "dirichlet_sides",
                "domain"):
        if key in overrides and isinstance(overrides[key], list):
            overrides[key] = tuple(overrides[key])
    config = ExperimentConfig.for_experiment(experiment, **overrides)
    report = run_experiment(config)
    if config.out_dir:
        print(f"report written to {config.out_dir}")
    else:
        print(json.dumps(report.to_dict(), indent=1, sort_keys=True))
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "mesh":
        return _mesh_gen(args)
    return _run(args)


if __name__ == "__main__":
    sys.exit(main())
