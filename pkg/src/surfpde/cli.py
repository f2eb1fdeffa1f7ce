"""Command-line front end.

Subcommands:
  train-normals  fit the surface (and boundary) normal fields, checkpoint them
  solve          one PDE solve: checkpoint, history CSV, solution PLY, report
  sweep          width sweep with the convergence verdict (CSV + JSON)
  fem            FEM ground-truth solve / eigenpair export / refinement study
  app            geometry-processing drivers: heat geodesic mcf harmonic minimal

Every run writes a manifest (resolved config, hash, seed, versions, timings);
rerunning with the same config and seed reproduces all outputs bit-for-bit
except wall-clock fields.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

from . import apps, convergence, femref, io as io_, trainer
from .errors import ConfigError, SurfPdeError
from .estimators import NormalFieldModel, PdeSolver
from .field import load_net, save_net
from .geometry import (
    CylinderSurface,
    DiskSurface,
    MeshSurface,
    RectangleSurface,
    SphereSurface,
    grid_mesh,
    icosphere,
    load_mesh,
    saddle_heightfield,
)


def load_config(path):
    if not os.path.exists(path):
        raise ConfigError(f"config file not found: {path}")
    with open(path, "rb") as fh:
        try:
            return tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}")


def build_surface(cfg):
    sc = cfg.get("surface", {})
    kind = sc.get("kind")
    if kind == "sphere":
        return SphereSurface(radius=sc.get("radius", 1.0))
    if kind == "rect":
        bounds = sc.get("bounds", [[-1.0, 1.0], [-1.0, 1.0]])
        return RectangleSurface(bounds=tuple(map(tuple, bounds)))
    if kind == "disk":
        return DiskSurface(
            radius=sc.get("radius", 1.0), inner_radius=sc.get("inner_radius", 0.0)
        )
    if kind == "cylinder":
        return CylinderSurface(
            radius=sc.get("radius", 0.5), height=sc.get("height", 1.0)
        )
    if kind == "heightfield":
        bounds = sc.get("bounds", [[-1.0, 1.0], [-1.0, 1.0]])
        return saddle_heightfield(
            amplitude=sc.get("amplitude", 0.3), bounds=tuple(map(tuple, bounds))
        )
    if kind == "mesh":
        path = sc.get("path")
        if not path or not os.path.exists(path):
            raise ConfigError(f"mesh file not found: {path!r}")
        return load_mesh(path, normalize=sc.get("normalize", True))
    if kind == "icosphere":
        return icosphere(subdivisions=int(sc.get("subdivisions", 3)))
    if kind == "cylinder_mesh":
        from .geometry import cylinder_mesh

        return cylinder_mesh(
            radius=sc.get("radius", 0.5), height=sc.get("height", 1.0),
            n_theta=int(sc.get("n_theta", 48)), n_z=int(sc.get("n_z", 24)),
        )
    raise ConfigError(f"unknown or missing surface kind {kind!r}")


def build_problem(cfg, surface):
    pc = cfg.get("problem", {})
    family = pc.get("source", "trigonometric")
    params = dict(pc.get("params", {}))
    params["operator"] = pc.get("operator", "poisson")
    params["k"] = pc.get("k", 0.0)
    params["lambda_bc"] = pc.get("lambda_bc", 100.0)
    if family == "zero":
        labels = tuple(surface.boundary_labels())
        problem = trainer.PdeProblem(
            operator=params["operator"], k=params["k"],
            lambda_bc=params["lambda_bc"], dirichlet_labels=labels,
        )
        pts = surface.sample_interior(5000, np.random.default_rng(1)).positions
        return femref.ManufacturedProblem(
            surface=surface, problem=problem, eval_points=pts,
            eval_values=np.zeros(len(pts)), description="zero problem",
        )
    manufactured = femref.make_manufactured(surface, family, params)
    bc = cfg.get("surface", {}).get("boundary", {})
    if bc:
        manufactured.problem.dirichlet_labels = tuple(bc.get("dirichlet", ()))
        manufactured.problem.neumann_labels = tuple(bc.get("neumann", ()))
    return manufactured


def resolve_normals(cfg, surface, out_dir=None):
    nc = cfg.get("normals", {})
    source = nc.get("source", "exact")
    if source == "exact":
        return None  # estimators default to exact analytic normals
    if source == "net":
        path = nc.get("checkpoint")
        if path:
            if not os.path.exists(path):
                raise ConfigError(f"normal checkpoint not found: {path}")
            return load_net(path)
        model = NormalFieldModel(
            width=int(nc.get("width", 64)), depth=int(nc.get("depth", 5)),
            iterations=int(nc.get("iterations", 20000)),
            lr=float(nc.get("lr", 1e-4)), batch_size=int(nc.get("batch", 2048)),
            seed=int(nc.get("seed", 0)),
        )
        model.fit(surface)
        if out_dir:
            save_net(model.net_, os.path.join(out_dir, "normals.spnet"))
        return model
    raise ConfigError(f"unknown normals source {source!r}")


def _solver_params(cfg, args):
    tc = cfg.get("train", {})
    nc = cfg.get("net", {})
    iters = int(args.iterations or tc.get("iterations", 8000))
    return dict(
        width=int(nc.get("width", 30)), depth=int(nc.get("depth", 3)),
        omega0=float(nc.get("omega0", 30.0)),
        activation=nc.get("activation", "sine"),
        iterations=iters, lr=float(tc.get("lr", 1e-3)),
        interior_batch=int(tc.get("interior_batch", 1024)),
        boundary_batch=int(tc.get("boundary_batch", 256)),
        plateau_patience=int(tc.get("plateau_patience", max(200, iters // 10))),
        log_every=int(tc.get("log_every", 100)),
    )


def _run_seed(cfg, args):
    if args.seed is not None:
        return int(args.seed)
    return int(cfg.get("run", {}).get("seed", 0))


def _out_dir(cfg, args):
    out = args.out or cfg.get("run", {}).get("out")
    if not out:
        raise ConfigError("no output directory (set [run].out or pass --out)")
    return out


def _write_solution_outputs(run, surface, solver, manufactured):
    save_net(solver.net_, run.file("solution.spnet"))
    io_.write_history_csv(run.file("history.csv"), solver.history_)
    pts = manufactured.eval_points
    pred = solver.predict(pts)
    if isinstance(surface, MeshSurface) and len(pts) == len(surface.vertices):
        io_.write_ply(
            run.file("solution.ply"), pts, faces=surface.faces, scalar=pred
        )
    else:
        io_.write_ply(run.file("solution.ply"), pts, scalar=pred)
    err = convergence.relative_l2(
        pred, manufactured.eval_values, mean_free=manufactured.mean_free
    )
    return err


def cmd_solve(args):
    cfg = load_config(args.config)
    seed = _run_seed(cfg, args)
    run = io_.RunDirectory(_out_dir(cfg, args), cfg, seed)
    surface = build_surface(cfg)
    manufactured = build_problem(cfg, surface)
    problem = manufactured.problem
    report = {"problem": manufactured.description}
    if not problem.dirichlet_labels:
        residual, ok = surfops_compat(surface, problem, seed)
        report["compatibility"] = {"residual": residual, "ok": bool(ok)}
        if not ok:
            print(
                f"warning: compatibility residual {residual:.3e} exceeds "
                "tolerance; pure-Neumann/closed solve may be ill-posed",
                file=sys.stderr,
            )
    params = _solver_params(cfg, args)
    params["seed"] = seed
    solver = PdeSolver(**params)
    solver.normal_source = resolve_normals(cfg, surface, run.path)
    run.mark("setup_seconds")
    solver.fit(surface, problem)
    run.mark("train_seconds")
    err = _write_solution_outputs(run, surface, solver, manufactured)
    report["rel_l2"] = err
    report["iterations"] = params["iterations"]
    with open(run.file("report.json"), "w") as fh:
        json.dump(report, fh, indent=2)
        fh.write("\n")
    run.finalize(extra={"rel_l2": err})
    print(f"solve: rel_l2 = {err:.4e} -> {run.path}")
    return 0


def surfops_compat(surface, problem, seed):
    from .surfops import check_compatibility

    return check_compatibility(
        surface,
        problem.f if problem.operator != "screened"
        else (lambda s: problem.source_values(s)),
        h=problem.h,
        seed=seed,
    )


def cmd_sweep(args):
    cfg = load_config(args.config)
    seed = _run_seed(cfg, args)
    run = io_.RunDirectory(_out_dir(cfg, args), cfg, seed)
    surface = build_surface(cfg)
    manufactured = build_problem(cfg, surface)
    sc = cfg.get("sweep", {})
    widths = (
        [int(w) for w in args.widths.split(",")]
        if args.widths
        else [int(w) for w in sc.get("widths", [30, 60, 90])]
    )
    depth = int(sc.get("depth", 3))
    params = _solver_params(cfg, args)
    params.pop("width")
    params.pop("depth")
    params["normal_source"] = resolve_normals(cfg, surface, run.path)
    report = convergence.run_sweep(
        surface, manufactured.problem, manufactured.eval_set(), widths,
        depth=depth, solver_params=params, seed=seed,
        checkpoint_dir=run.file("checkpoints"), verbose=True,
    )
    report.write_csv(run.file("sweep.csv"))
    report.write_verdict(run.file("verdict.json"))
    run.finalize(extra={"verdict": report.verdict_dict()})
    print(
        f"sweep: m={report.slope:.3f} r={report.pearson:.3f} "
        f"converged={report.converged}"
    )
    return 0


def cmd_train_normals(args):
    cfg = load_config(args.config)
    seed = _run_seed(cfg, args)
    run = io_.RunDirectory(_out_dir(cfg, args), cfg, seed)
    surface = build_surface(cfg)
    nc = cfg.get("normals", {})
    iters = int(args.iterations or nc.get("iterations", 20000))
    model = NormalFieldModel(
        width=int(nc.get("width", 64)), depth=int(nc.get("depth", 5)),
        iterations=iters, lr=float(nc.get("lr", 1e-4)),
        batch_size=int(nc.get("batch", 2048)), seed=seed,
    )
    model.fit(surface)
    save_net(model.net_, run.file("surface_normals.spnet"))
    report = {}
    held_out = surface.sample_interior(10000, seed + 12345)
    ang = model.angular_error_degrees(held_out.positions, held_out.normals)
    report["surface_mean_angular_error_deg"] = float(ang.mean())
    if surface.boundary_labels():
        bmodel = NormalFieldModel(
            width=int(nc.get("width", 64)), depth=int(nc.get("depth", 5)),
            iterations=iters, lr=float(nc.get("lr", 1e-4)),
            batch_size=int(nc.get("batch", 2048)), seed=seed + 1,
            target="boundary",
        )
        bmodel.fit(surface)
        save_net(bmodel.net_, run.file("boundary_normals.spnet"))
        held_b = surface.sample_boundary("all", 5000, seed + 54321)
        ang_b = bmodel.angular_error_degrees(held_b.positions, held_b.nu)
        report["boundary_mean_angular_error_deg"] = float(ang_b.mean())
    with open(run.file("report.json"), "w") as fh:
        json.dump(report, fh, indent=2)
        fh.write("\n")
    run.finalize(extra=report)
    print(f"train-normals: {report}")
    return 0


def cmd_fem(args):
    cfg = load_config(args.config)
    seed = _run_seed(cfg, args)
    run = io_.RunDirectory(_out_dir(cfg, args), cfg, seed)
    fc = cfg.get("fem", {})
    surface = build_surface(cfg)
    if not isinstance(surface, MeshSurface):
        grid = int(fc.get("grid", 32))
        sc = cfg.get("surface", {})
        if sc.get("kind") == "rect":
            bounds = tuple(map(tuple, sc.get("bounds", [[0, 1], [0, 1]])))
            surface = grid_mesh(grid, grid, bounds=bounds)
        elif sc.get("kind") == "heightfield":
            hf = build_surface(cfg)
            surface = grid_mesh(
                grid, grid, bounds=((hf.x0, hf.x1), (hf.y0, hf.y1)), height=hf.g
            )
        elif sc.get("kind") in ("sphere", "icosphere"):
            surface = icosphere(subdivisions=int(fc.get("subdivisions", 3)))
        else:
            raise ConfigError("fem needs a mesh-representable surface")
    if fc.get("study", False):
        orders = fem_refinement_study(fc)
        with open(run.file("study.json"), "w") as fh:
            json.dump(orders, fh, indent=2)
        run.finalize(extra=orders)
        print(f"fem study: orders {orders['orders']}")
        return 0
    bc = cfg.get("surface", {}).get("boundary", {})
    dirichlet = tuple(bc.get("dirichlet", ("all",) if not surface.closed else ()))
    neumann = tuple(bc.get("neumann", ()))
    system = femref.build_fem(
        surface, dirichlet_labels=dirichlet, neumann_labels=neumann
    )
    count = int(fc.get("eigen_count", 0))
    outputs = {}
    if count:
        lam, phi = femref.smallest_eigenpairs(system, count)
        np.savetxt(run.file("eigenvalues.csv"), lam, header="lambda", comments="")
        io_.write_ply(
            run.file("eigenfunction.ply"), surface.vertices,
            faces=surface.faces, scalar=phi[:, min(1, count - 1)],
        )
        outputs["eigenvalues"] = [float(v) for v in lam]
    pc = cfg.get("problem", {})
    if pc:
        manufactured = build_problem(cfg, surface)
        f_call = manufactured.problem.f
        g_call = manufactured.problem.g
        u = femref.fem_solve(
            system, f_call, operator=manufactured.problem.operator,
            k=manufactured.problem.k, g=g_call,
        )
        io_.write_ply(
            run.file("fem_solution.ply"), surface.vertices,
            faces=surface.faces, scalar=u,
        )
        outputs["solution_norm"] = float(np.linalg.norm(u))
    run.finalize(extra=outputs)
    print(f"fem: wrote {sorted(outputs)} -> {run.path}")
    return 0


def fem_refinement_study(fc):
    import math

    errs = []
    sizes = [int(s) for s in fc.get("grids", (8, 16, 32))]
    for n in sizes:
        mesh = grid_mesh(n, n, bounds=((0, 1), (0, 1)))
        system = femref.build_fem(mesh, dirichlet_labels=("all",))
        x, y = mesh.vertices[:, 0], mesh.vertices[:, 1]
        u_true = np.sin(np.pi * x) * np.sin(np.pi * y)
        f = -2 * np.pi**2 * u_true
        u = femref.fem_solve(system, f, g=np.zeros(len(x)))
        e = u - u_true
        errs.append(float(np.sqrt(e @ (system.M @ e))))
    orders = [math.log2(errs[i] / errs[i + 1]) for i in range(len(errs) - 1)]
    return {"grids": sizes, "errors": errs, "orders": orders}


APP_NAMES = ("heat", "geodesic", "mcf", "harmonic", "minimal")


def cmd_app(args):
    cfg = load_config(args.config)
    seed = _run_seed(cfg, args)
    ac = cfg.get("app", {})
    name = args.name or ac.get("name")
    if name not in APP_NAMES:
        raise ConfigError(f"unknown app {name!r}; choose from {APP_NAMES}")
    run = io_.RunDirectory(_out_dir(cfg, args), cfg, seed)
    surface = build_surface(cfg)
    params = _solver_params(cfg, args)
    params.pop("omega0")
    params.pop("activation")
    params["seed"] = seed
    normal_source = resolve_normals(cfg, surface, run.path)
    tau = float(ac.get("tau", 0.05))
    outputs = {}
    if name == "heat":
        from .trainer import from_xyz

        sources = np.asarray(ac.get("sources", [[0.0, 0.0, 1.0]]), dtype=float)
        sigma = float(ac.get("sigma", 0.15))
        u0 = apps.gaussian_source(sources, sigma)
        solver = apps.heat_step(
            surface, u0, tau, solver_params=params, normal_source=normal_source
        )
        pts, faces = _eval_geometry(surface, seed)
        io_.write_ply(
            run.file("heat.ply"), pts, faces=faces, scalar=solver.predict(pts),
            scalar_name="heat",
        )
        outputs["field"] = "heat.ply"
    elif name == "geodesic":
        sources = np.asarray(ac.get("sources", [[0.0, 0.0, 1.0]]), dtype=float)
        distance, _, _ = apps.heat_geodesic(
            surface, sources, tau=tau, solver_params=params,
            normal_source=normal_source,
        )
        pts, faces = _eval_geometry(surface, seed)
        io_.write_ply(
            run.file("distance.ply"), pts, faces=faces, scalar=distance(pts),
            scalar_name="distance",
        )
        outputs["field"] = "distance.ply"
    elif name == "harmonic":
        from .trainer import from_xyz

        # radial two-level Dirichlet data: inner_value within the threshold
        # radius, outer_value beyond (covers the annulus interpolation demo)
        r0 = float(ac.get("inner_value", 0.0))
        r1 = float(ac.get("outer_value", 1.0))
        r_split = float(ac.get("split_radius", 0.5))

        def g_radial(X):
            r = np.linalg.norm(X[:, :2], axis=1)
            return np.where(r > r_split, r1, r0)

        solver = apps.harmonic_interpolation(
            surface, from_xyz(g_radial), solver_params=params,
            normal_source=normal_source,
        )
        pts, faces = _eval_geometry(surface, seed)
        io_.write_ply(
            run.file("harmonic.ply"), pts, faces=faces, scalar=solver.predict(pts),
            scalar_name="value",
        )
        outputs["field"] = "harmonic.ply"
    elif name == "minimal":
        if not isinstance(surface, MeshSurface):
            raise ConfigError("minimal surface needs a mesh (or cylinder_mesh)")
        new_vertices, _ = apps.minimal_surface(
            surface, solver_params=params, normal_source=normal_source
        )
        io_.write_ply(run.file("minimal.ply"), new_vertices, faces=surface.faces)
        outputs["mesh"] = "minimal.ply"
    elif name == "mcf":
        if not isinstance(surface, MeshSurface):
            raise ConfigError("mean-curvature flow needs a closed mesh")
        steps = int(ac.get("steps", 3))
        states = apps.mean_curvature_flow(
            surface, tau, steps, solver_params=params
        )
        for st in states:
            io_.write_ply(
                run.file(f"mcf_step{st.step}.ply"), st.vertices,
                faces=surface.faces,
            )
        outputs["mean_radii"] = [st.mean_radius for st in states]
    run.finalize(extra=outputs)
    print(f"app {name}: -> {run.path}")
    return 0


def _eval_geometry(surface, seed):
    if isinstance(surface, MeshSurface):
        return surface.vertices, surface.faces
    pts = surface.sample_interior(4000, seed + 777).positions
    return pts, None


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="surfpde",
        description="PDE solving on curved surfaces with sine networks",
    )
    parser.add_argument("--config", required=False, help="TOML run configuration")
    parser.add_argument("--out", help="output directory (overrides [run].out)")
    parser.add_argument("--seed", type=int, help="override the global seed")
    parser.add_argument("--jobs", type=int, default=1, help="sweep parallelism")
    parser.add_argument(
        "--iterations", type=int, help="override the iteration budget"
    )
    parser.add_argument("--widths", help="comma-separated sweep widths")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("train-normals")
    sub.add_parser("solve")
    sub.add_parser("sweep")
    sub.add_parser("fem")
    app_parser = sub.add_parser("app")
    app_parser.add_argument("name", choices=APP_NAMES)
    args = parser.parse_args(argv)
    if not args.config:
        parser.error("--config is required")
    handlers = {
        "train-normals": cmd_train_normals,
        "solve": cmd_solve,
        "sweep": cmd_sweep,
        "fem": cmd_fem,
        "app": cmd_app,
    }
    try:
        return handlers[args.command](args)
    except SurfPdeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
