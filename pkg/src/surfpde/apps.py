"""Geometry-processing drivers built on the PDE solver.

heat_step        one implicit-Euler step of surface heat flow
                 (a screened Poisson solve with screening 1/tau)
heat_geodesic    heat-method distances: diffuse, normalize the gradient
                 field, then solve a Poisson equation for the distance
mean_curvature_flow   repeated heat steps on the coordinate functions
harmonic_interpolation   Laplace solve with Dirichlet data
minimal_surface  three harmonic solves of the coordinates
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from . import surfops
from .errors import SurfPdeError
from .estimators import NormalFieldModel, PdeSolver, resolve_normal_source
from .geometry import MeshSurface, Surface
from .trainer import PdeProblem
from .validation import check_points, check_positive


@dataclass
class FlowState:
    """Mesh positions along a flow plus bookkeeping."""

    vertices: np.ndarray
    step: int = 0
    tau: float = 0.0
    degenerate: bool = False
    mean_radius: float = 0.0


def _solver(solver_params, seed_shift=0, **overrides):
    params = dict(solver_params or {})
    params.update(overrides)
    params.setdefault("width", 48)
    params.setdefault("depth", 3)
    params.setdefault("iterations", 4000)
    params["seed"] = int(params.get("seed", 0)) + seed_shift
    return PdeSolver(**params)


def heat_step(surface: Surface, u_prev, tau, solver_params=None,
              normal_source=None, warm_start_net=None, lambda_bc=100.0):
    """One implicit heat step; u_prev is a SampleSet closure (use
    trainer.from_xyz for plain functions of position).  Returns the fitted
    solver for the new field."""
    check_positive(tau, "tau")
    labels = surface.boundary_labels()
    problem = PdeProblem(
        operator="screened", tau=float(tau), u_prev=u_prev,
        lambda_bc=lambda_bc,
        neumann_labels=tuple(labels),  # homogeneous Neumann when a rim exists
    )
    solver = _solver(solver_params)
    solver.normal_source = normal_source
    solver.fit(surface, problem, warm_start_net=warm_start_net)
    return solver


def gaussian_source(centers, sigma, amplitude=1.0):
    """Narrow surface bump(s): sum of Gaussians around the given centers."""
    centers = check_points(centers)

    def fn(samples):
        X = samples.positions if hasattr(samples, "positions") else samples
        d2 = ((X[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        return amplitude * np.exp(-d2 / (2.0 * sigma**2)).sum(axis=1)

    return fn


def heat_geodesic(surface: Surface, sources, tau=0.05, solver_params=None,
                  normal_source=None, sigma_fraction=0.02):
    """Heat-method geodesic distances from the source point set.

    Returns (distance_fn, phi_solver, heat_solver); distance_fn maps (N, 3)
    points to distances shifted so the minimum over the sources is zero.
    """
    sources = check_points(sources)
    if len(sources) == 0:
        raise SurfPdeError("need at least one source point")
    source = resolve_normal_source(surface, normal_source)
    # bounding box diagonal of the normalized domain
    sigma = sigma_fraction * 2.0 * np.sqrt(3.0)
    u0 = gaussian_source(sources, sigma)
    heat = heat_step(
        surface, u0, tau, solver_params=solver_params, normal_source=normal_source
    )

    low_grad_warned = [False]

    def unit_descent_divergence(samples):
        X = samples.positions if hasattr(samples, "positions") else samples
        jets = heat.predict_jets(X)
        n, Jn = source.normal_jet(X)
        _, divX, valid = surfops.tangent_unit_gradient(jets, n, Jn)
        if not np.all(valid) and not low_grad_warned[0]:
            warnings.warn(
                f"{int((~valid).sum())} samples with vanishing surface "
                "gradient skipped in the divergence source"
            )
            low_grad_warned[0] = True
        return divX

    def boundary_flux(samples):
        X = samples.positions
        jets = heat.predict_jets(X)
        n, Jn = source.normal_jet(X)
        X_field, _, _ = surfops.tangent_unit_gradient(jets, n, Jn)
        return np.einsum("nk,nk->n", X_field, samples.nu)

    labels = surface.boundary_labels()
    problem = PdeProblem(
        operator="poisson", f=unit_descent_divergence,
        h=boundary_flux if labels else None,
        neumann_labels=tuple(labels),
    )
    phi = _solver(solver_params, seed_shift=1)
    phi.normal_source = normal_source
    phi.fit(surface, problem)
    offset = float(np.min(phi.predict(sources)))

    def distance(X):
        return phi.predict(X) - offset

    return distance, phi, heat


def harmonic_interpolation(surface: Surface, g, solver_params=None,
                           normal_source=None, dirichlet_labels=None,
                           lambda_bc=100.0):
    """Laplace solve with Dirichlet boundary data g (SampleSet closure)."""
    labels = surface.boundary_labels()
    if not labels:
        raise SurfPdeError("harmonic interpolation needs a boundary")
    use = tuple(labels if dirichlet_labels is None else dirichlet_labels)
    problem = PdeProblem(
        operator="poisson", g=g, lambda_bc=lambda_bc, dirichlet_labels=use
    )
    solver = _solver(solver_params)
    solver.normal_source = normal_source
    solver.fit(surface, problem)
    return solver


def _coordinate_closure(index):
    def fn(samples):
        X = samples.positions if hasattr(samples, "positions") else samples
        return X[:, index]

    return fn


def minimal_surface(mesh: MeshSurface, solver_params=None, normal_source=None,
                    lambda_bc=100.0):
    """Replace vertex positions by the harmonic extension of the boundary
    positions (three Laplace solves).  Returns (new_vertices, solvers)."""
    if not isinstance(mesh, MeshSurface):
        raise SurfPdeError("minimal_surface operates on meshes")
    if mesh.closed:
        raise SurfPdeError("minimal_surface needs a mesh with boundary")
    solvers = []
    new_vertices = np.empty_like(mesh.vertices)
    for c in range(3):
        problem = PdeProblem(
            operator="poisson", g=_coordinate_closure(c),
            lambda_bc=lambda_bc,
            dirichlet_labels=tuple(mesh.boundary_labels()),
        )
        solver = _solver(solver_params, seed_shift=c)
        solver.normal_source = normal_source
        solver.fit(mesh, problem)
        new_vertices[:, c] = solver.predict(mesh.vertices)
        solvers.append(solver)
    return new_vertices, solvers


def mean_curvature_flow(mesh: MeshSurface, tau, steps, solver_params=None,
                        normal_model: NormalFieldModel = None,
                        refit_iterations=2000, min_area=1e-10):
    """Mean-curvature flow: per step, one heat step per coordinate function;
    the solutions become the new vertex positions.

    Returns a list of FlowState (initial state first).  The flow halts early
    when triangles degenerate.
    """
    check_positive(tau, "tau")
    if not isinstance(mesh, MeshSurface) or not mesh.closed:
        raise SurfPdeError("mean-curvature flow expects a closed mesh")
    if normal_model is None:
        normal_model = NormalFieldModel(iterations=6000, seed=101).fit(mesh)
    states = [
        FlowState(
            vertices=mesh.vertices.copy(), step=0, tau=tau,
            mean_radius=float(np.linalg.norm(mesh.vertices, axis=1).mean()),
        )
    ]
    current = mesh
    warm = [None, None, None]
    for step in range(1, steps + 1):
        if current.face_areas.min() < min_area:
            states[-1].degenerate = True
            warnings.warn(f"flow halted at step {step}: degenerate triangles")
            break
        new_vertices = np.empty_like(current.vertices)
        for c in range(3):
            solver = heat_step(
                current, _coordinate_closure(c), tau,
                solver_params=solver_params, normal_source=normal_model,
                warm_start_net=warm[c],
            )
            warm[c] = solver.net_
            new_vertices[:, c] = solver.predict(current.vertices)
        current = MeshSurface(
            new_vertices, current.faces, normalize=False, validate=False
        )
        states.append(
            FlowState(
                vertices=new_vertices, step=step, tau=tau,
                mean_radius=float(np.linalg.norm(new_vertices, axis=1).mean()),
            )
        )
        if step < steps:
            refit = NormalFieldModel(
                iterations=refit_iterations, seed=101 + step
            )
            refit.fit(current, warm_start_net=normal_model.net_)
            normal_model = refit
    return states
