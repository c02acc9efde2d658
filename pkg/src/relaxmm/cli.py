"""Command line entry point: ``relaxmm identify|run|export-mesh``.

Exit status is 0 on success, 2 for usage and configuration errors (bad or
missing config file, unknown field values) and 1 when a computation fails.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from dataclasses import asdict
from pathlib import Path

from .experiments import BC_SCENARIOS, CELL_NAMES, SCENARIOS, ScenarioConfig, rmm_beam_mesh, run_scenario
from .identify import CANDIDATES, CELL_D, CELL_L, IdentifiedParams, default_parameters, identify
from .mesh import UnitCellSpec, build_beam_mesh, build_cell_cluster, build_unit_cell_mesh, write_vtk
from .solve import SolverError

log = logging.getLogger("relaxmm")

REPORT_NAME = "identification.json"


class ConfigError(Exception):
    pass


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _ints(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _common(p: argparse.ArgumentParser):
    p.add_argument("--out", type=Path, default=Path("."), help="output directory (created if missing)")
    p.add_argument("--threads", type=int, default=1, metavar="N", help="parallel solves (default 1)")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="relaxmm", description="Relaxed micromorphic beam studies and parameter identification.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("identify", help="identify C_macro, C_micro candidates and C_e")
    _common(p)
    p.add_argument("--cell", choices=CELL_NAMES[:2], default="variant1", help="periodic cell")
    p.add_argument("--refine", type=int, default=4, help="unit-cell mesh refinement (default 4)")
    p.add_argument("--variants", type=_ints, default=[1, 2, 3, 4], help="apparent-tensor variants")
    p.add_argument("--clusters", type=_ints, default=[1, 2, 4], help="cluster sizes for beta")
    p.add_argument("--beta-refine", type=int, default=None, help="refinement of the beta clusters")

    p = sub.add_parser("run", help="run a scenario sweep and write CSV")
    _common(p)
    p.add_argument("--config", type=Path, help="JSON scenario file; flags override its fields")
    p.add_argument("--scenario", choices=SCENARIOS)
    p.add_argument("--n", type=int, help="size index n (curvature scaling Lc/n)")
    p.add_argument("--sizes", type=_ints, help="resolved sizes, e.g. 1,2,3")
    p.add_argument("--loading", choices=("rotation", "traction"))
    p.add_argument("--candidate", choices=CANDIDATES)
    p.add_argument("--lc", type=_floats, help="Lc values in metres")
    p.add_argument("--lc-sweep", type=_floats, help="Lc values in multiples of the cell size l")
    p.add_argument("--mu-c", type=_floats, help="Cosserat couple moduli in Pa")
    p.add_argument("--mu-c-rel", type=_floats, help="Cosserat couple moduli in multiples of mu_macro")
    p.add_argument("--mu-curv", type=float, help="curvature modulus in Pa (default mu_macro)")
    p.add_argument("--bc", choices=BC_SCENARIOS)
    p.add_argument("--cell", choices=CELL_NAMES)
    p.add_argument("--refine", type=int, help="resolved or unit-cell mesh refinement")
    p.add_argument("--kappa", type=float, help="imposed curvature 1/m")
    p.add_argument("--tbar", type=float, help="traction amplitude N/m")
    p.add_argument("--a", type=float, help="simple-shear amplitude")
    p.add_argument("--grid", type=_ints, help="RMM grid NX,NY")
    p.add_argument("--y-grading", type=float, help="row grading toward the top and bottom edges")
    p.add_argument("--params", type=Path, help="identification report (default: reference moduli)")
    p.add_argument("--vtk", action="store_true", default=None, help="write a VTK file per solve")

    p = sub.add_parser("export-mesh", help="write a mesh as legacy VTK")
    _common(p)
    p.add_argument("--kind", choices=("unit-cell", "cluster", "beam", "rmm-beam"), default="unit-cell")
    p.add_argument("--cell", choices=CELL_NAMES, default="variant1")
    p.add_argument("--refine", type=int, default=4)
    p.add_argument("--n", type=int, default=1, help="cluster size or beam size index")
    p.add_argument("--grid", type=_ints, default=[48, 4])
    return parser


# -- config -------------------------------------------------------------------

_FLAG_FIELDS = {
    "scenario": "scenario", "n": "n", "sizes": "sizes", "loading": "loading", "candidate": "candidate",
    "lc": "lc", "mu_c": "mu_c", "mu_curv": "mu_curv", "bc": "bc", "cell": "cell", "refine": "refinement",
    "kappa": "kappa", "tbar": "tbar", "a": "a", "grid": "grid", "y_grading": "y_grading", "vtk": "vtk",
}


def load_config(args) -> tuple[ScenarioConfig, IdentifiedParams | None]:
    data = {}
    if args.config is not None:
        if not args.config.is_file():
            raise ConfigError(f"config file not found: {args.config}")
        try:
            data = json.loads(args.config.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{args.config}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
        if not isinstance(data, dict):
            raise ConfigError(f"{args.config}: top level must be an object")
    for flag, name in _FLAG_FIELDS.items():
        v = getattr(args, flag)
        if v is not None:
            data[name] = v
    if args.params is not None:
        data["report"] = str(args.params)
    params = None
    if data.get("report"):
        path = Path(data["report"])
        if not path.is_file():
            raise ConfigError(f"identification report not found: {path}")
        try:
            params = IdentifiedParams.load(path)
        except (KeyError, ValueError, TypeError) as exc:
            raise ConfigError(f"{path}: malformed identification report ({exc})") from None
    if args.lc_sweep is not None:
        data["lc"] = [v * CELL_L for v in args.lc_sweep]
    if args.mu_c_rel is not None:
        mu = (params or default_parameters()).C_macro.mu
        data["mu_c"] = [v * mu for v in args.mu_c_rel]
    try:
        cfg = ScenarioConfig.from_dict(data)
    except (TypeError, ValueError) as exc:
        where = f"{args.config}: " if args.config else ""
        raise ConfigError(f"{where}{exc}") from None
    return cfg, params


# -- commands -----------------------------------------------------------------


def _identify(args, cell="variant1", refine=4, variants=(1, 2, 3, 4), clusters=(1, 2, 4), beta_refine=None):
    t = time.perf_counter()
    params = identify(refine, variants, clusters, beta_refine, args.threads, CELL_NAMES.index(cell) + 1)
    path = params.save(args.out / REPORT_NAME)
    lam, mu, mu_s = params.C_macro.gpa()
    print(f"C_macro (GPa): lambda={lam:.3f} mu={mu:.3f} mu*={mu_s:.3f}")
    for v, c in params.apparent.items():
        print(f"apparent variant {v} (GPa): " + " ".join(f"{x:.3f}" for x in c.gpa()))
    betas = ", ".join(f"{b:.4f}" for b in params.beta_sequence)
    print(f"alpha={params.alpha:.4f} beta=[{betas}]")
    print(f"wrote {path} in {time.perf_counter() - t:.1f} s")


def cmd_identify(args) -> int:
    _identify(args, args.cell, args.refine, args.variants, args.clusters, args.beta_refine)
    return 0


def cmd_run(args) -> int:
    cfg, params = load_config(args)
    if cfg.scenario == "identify":
        refine = args.refine if args.refine is not None else 4
        _identify(args, cfg.cell if cfg.cell in CELL_NAMES[:2] else "variant1", refine)
        return 0
    t = time.perf_counter()
    result = run_scenario(cfg, params, args.threads, args.out)
    csv = result.write_csv(args.out / f"{cfg.scenario}.csv")
    (args.out / f"{cfg.scenario}.config.json").write_text(json.dumps(asdict(cfg), indent=2) + "\n")
    print(f"wrote {csv} ({len(result.rows)} rows) in {time.perf_counter() - t:.1f} s")
    return 0


def cmd_export_mesh(args) -> int:
    spec = UnitCellSpec(CELL_L, CELL_D, CELL_NAMES.index(args.cell) + 1, args.refine)
    if args.kind == "unit-cell":
        mesh = build_unit_cell_mesh(spec)
    elif args.kind == "cluster":
        mesh = build_cell_cluster(spec, args.n, args.n)
    elif args.kind == "beam":
        mesh = build_beam_mesh(args.n, spec)
    else:
        if len(args.grid) != 2:
            raise ConfigError("--grid expects NX,NY")
        mesh = rmm_beam_mesh(2 * CELL_L, tuple(args.grid))
    path = write_vtk(mesh, args.out / f"{args.kind}_{args.cell}.vtk")
    print(f"wrote {path}: {mesh.n_cells} {mesh.kind} cells, {mesh.n_nodes} nodes")
    return 0


COMMANDS = {"identify": cmd_identify, "run": cmd_run, "export-mesh": cmd_export_mesh}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    if args.threads < 1:
        parser.error("--threads must be >= 1")
    try:
        args.out.mkdir(parents=True, exist_ok=True)
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"relaxmm: error: {exc}", file=sys.stderr)
        return 2
    except (SolverError, ValueError, KeyError, OSError) as exc:
        print(f"relaxmm: {args.command} failed: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
