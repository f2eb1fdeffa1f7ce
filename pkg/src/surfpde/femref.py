"""Ground-truth generation with linear finite elements on triangle meshes.

The cotangent Laplacian L here is negative semidefinite (off-diagonal
(cot a + cot b)/2, diagonal minus the row sum) with a lumped diagonal mass
matrix.  K = -L is the positive stiffness matrix, so the solvers below read

    Poisson     K u = -M f            (u solves  Lap_surface u = f)
    Helmholtz   (K - k^2 M) u = -M f
    screened    (K + M/tau) u = -M f

with Dirichlet rows eliminated by substitution and closed / pure-Neumann
Poisson systems pinned to the M-weighted mean-zero solution.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import SurfPdeError
from .geometry import MeshSurface, SampleSet

_RESIDUAL_TOL = 1e-10


def cotangent_laplacian(mesh: MeshSurface):
    """Assemble (L, M): NSD cotangent Laplacian and lumped mass diagonal."""
    V = mesh.vertices
    F = mesh.faces
    nv = len(V)
    rows, cols, vals = [], [], []
    mass = np.zeros(nv)
    for corner in range(3):
        i = F[:, (corner + 1) % 3]
        j = F[:, (corner + 2) % 3]
        k = F[:, corner]
        e1 = V[i] - V[k]
        e2 = V[j] - V[k]
        cos_ = np.einsum("nd,nd->n", e1, e2)
        sin_ = np.linalg.norm(np.cross(e1, e2), axis=1)
        if np.any(sin_ <= 0):
            raise SurfPdeError("degenerate triangle in cotangent assembly")
        w = 0.5 * cos_ / sin_
        rows += [i, j]
        cols += [j, i]
        vals += [w, w]
    areas = mesh.face_areas
    for corner in range(3):
        np.add.at(mass, F[:, corner], areas / 3.0)
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    vals = np.concatenate(vals)
    L = sp.coo_matrix((vals, (rows, cols)), shape=(nv, nv)).tocsr()
    L = L - sp.diags(np.asarray(L.sum(axis=1)).ravel())
    M = sp.diags(mass).tocsr()
    return L.tocsr(), M


@dataclass
class FemSystem:
    mesh: MeshSurface
    L: sp.csr_matrix
    M: sp.csr_matrix
    dirichlet_vertices: np.ndarray = field(default_factory=lambda: np.array([], int))
    neumann_vertices: np.ndarray = field(default_factory=lambda: np.array([], int))

    @property
    def stiffness(self):
        return -self.L


def _loop_vertices(mesh, labels):
    if not labels:
        return np.array([], dtype=np.int64)
    idx = []
    for lab in labels:
        if lab == "all":
            for loop in mesh.boundary_loops:
                idx.append(loop)
            continue
        i = int(str(lab).removeprefix("loop"))
        if i >= len(mesh.boundary_loops):
            raise SurfPdeError(f"boundary loop {lab!r} not found")
        idx.append(mesh.boundary_loops[i])
    if not idx:
        return np.array([], dtype=np.int64)
    return np.unique(np.concatenate(idx))


def build_fem(mesh: MeshSurface, dirichlet_labels=("all",), neumann_labels=()) -> FemSystem:
    """Assemble the FEM system; all boundary loops default to Dirichlet.
    Closed meshes simply get empty boundary sets."""
    L, M = cotangent_laplacian(mesh)
    if mesh.closed:
        return FemSystem(mesh=mesh, L=L, M=M)
    d_idx = _loop_vertices(mesh, dirichlet_labels)
    n_idx = _loop_vertices(mesh, neumann_labels)
    overlap = np.intersect1d(d_idx, n_idx)
    if overlap.size:
        raise SurfPdeError("a boundary loop cannot be both Dirichlet and Neumann")
    return FemSystem(mesh=mesh, L=L, M=M, dirichlet_vertices=d_idx, neumann_vertices=n_idx)


def _as_vertex_values(mesh, fn_or_values):
    if fn_or_values is None:
        return np.zeros(len(mesh.vertices))
    if callable(fn_or_values):
        samples = SampleSet(
            positions=mesh.vertices,
            normals=np.zeros_like(mesh.vertices),
        )
        return np.asarray(fn_or_values(samples), dtype=np.float64)
    vals = np.asarray(fn_or_values, dtype=np.float64)
    if vals.shape != (len(mesh.vertices),):
        raise SurfPdeError("per-vertex data has the wrong length")
    return vals


def fem_solve(system: FemSystem, f, operator="poisson", k=0.0, tau=None, g=None):
    """Solve for the per-vertex ground-truth field.

    ``f`` and ``g`` may be per-vertex arrays or callables taking a SampleSet.
    Pure-Neumann / closed Poisson systems are solved with an appended mean
    constraint; the returned field then has M-weighted mean zero.
    """
    mesh = system.mesh
    nv = len(mesh.vertices)
    K = system.stiffness.tocsr()
    M = system.M
    f_v = _as_vertex_values(mesh, f)
    rhs = -(M @ f_v)
    if operator == "poisson":
        A = K
    elif operator == "helmholtz":
        if not k > 0:
            raise SurfPdeError("helmholtz requires a positive wavenumber k")
        A = (K - (k**2) * M).tocsr()
    elif operator == "screened":
        if tau is None or not tau > 0:
            raise SurfPdeError("screened operator requires tau > 0")
        A = (K + M / tau).tocsr()
    else:
        raise SurfPdeError(f"unknown operator {operator!r}")

    d_idx = system.dirichlet_vertices
    if d_idx.size:
        g_v = _as_vertex_values(mesh, g)
        free = np.setdiff1d(np.arange(nv), d_idx)
        u = np.zeros(nv)
        u[d_idx] = g_v[d_idx]
        A_ff = A[free][:, free]
        rhs_f = rhs[free] - A[free][:, d_idx] @ g_v[d_idx]
        u[free] = spla.spsolve(A_ff.tocsc(), rhs_f)
        if not np.isfinite(u).all():
            raise SurfPdeError("singular Dirichlet system")
        return u

    if operator == "poisson":
        # singular system: pin the M-weighted mean with a Lagrange multiplier;
        # the multiplier equals the compatibility defect and must vanish
        m = np.asarray((M @ np.ones(nv))).ravel()
        A_aug = sp.bmat([[A, m[:, None]], [m[None, :], None]], format="csc")
        sol = spla.spsolve(A_aug, np.concatenate([rhs, [0.0]]))
        u = sol[:nv]
        defect = abs(sol[nv])
        scale = float(np.abs(rhs).max()) + 1e-300
        if not np.isfinite(u).all():
            raise SurfPdeError("singular pure-Neumann system")
        if defect > 1e-8 * scale:
            raise SurfPdeError(
                f"incompatible pure-Neumann data (compatibility defect "
                f"{sol[nv]:.3e}); the source must integrate to zero"
            )
        return u
    u = spla.spsolve(A.tocsc(), rhs)
    if not np.isfinite(u).all():
        raise SurfPdeError("singular system in fem_solve")
    return u


def smallest_eigenpairs(system: FemSystem, count):
    """Lowest generalized eigenpairs of K phi = lambda M phi, ascending,
    with M-orthonormal eigenvectors."""
    if count > 10:
        raise SurfPdeError("eigenpair count limited to 10")
    K = system.stiffness
    M = system.M
    nv = K.shape[0]
    if count >= nv:
        raise SurfPdeError("mesh too small for requested eigenpair count")
    try:
        lam, phi = spla.eigsh(K, k=count, M=M, sigma=-1e-8, which="LM")
    except spla.ArpackNoConvergence as exc:  # pragma: no cover - rare
        raise SurfPdeError(f"eigenvalue iteration failed to converge: {exc}")
    order = np.argsort(lam)
    lam = lam[order]
    phi = phi[:, order]
    # residual + orthogonality contract
    for i in range(count):
        r = K @ phi[:, i] - lam[i] * (M @ phi[:, i])
        denom = np.linalg.norm(M @ phi[:, i])
        if np.linalg.norm(r) / denom > 1e-8 * max(1.0, abs(lam[i])):
            raise SurfPdeError(f"eigenpair {i} residual too large")
    return lam, phi


def discrete_divergence(mesh: MeshSurface, face_vectors):
    """Integrated divergence of a per-face tangent vector field at vertices
    (the standard cotangent formula); divide by the lumped mass for a
    pointwise value."""
    V = mesh.vertices
    F = mesh.faces
    X = np.asarray(face_vectors, dtype=np.float64)
    out = np.zeros(len(V))
    for corner in range(3):
        i = F[:, corner]
        j = F[:, (corner + 1) % 3]
        k = F[:, (corner + 2) % 3]
        e1 = V[j] - V[i]
        e2 = V[k] - V[i]
        # cotangents of the angles opposite to e1 and e2
        def cot(a, b):
            return np.einsum("nd,nd->n", a, b) / np.linalg.norm(
                np.cross(a, b), axis=1
            )
        cot1 = cot(V[i] - V[k], V[j] - V[k])  # angle at k, opposite e1
        cot2 = cot(V[i] - V[j], V[k] - V[j])  # angle at j, opposite e2
        contrib = 0.5 * (
            cot1 * np.einsum("nd,nd->n", e1, X)
            + cot2 * np.einsum("nd,nd->n", e2, X)
        )
        np.add.at(out, i, contrib)
    return out


# ---------------------------------------------------------------------------
# Manufactured problems
# ---------------------------------------------------------------------------


@dataclass
class ManufacturedProblem:
    """A (surface, PDE data, ground truth) bundle ready for training and
    error measurement."""

    surface: object
    problem: object  # trainer.PdeProblem
    eval_points: np.ndarray
    eval_values: np.ndarray
    mean_free: bool = False
    description: str = ""
    u_gt: object = None  # optional closure SampleSet -> values

    def eval_set(self):
        from .convergence import EvalSet

        return EvalSet(
            points=self.eval_points, values=self.eval_values,
            mean_free=self.mean_free,
        )


class GridInterpolator:
    """Piecewise-linear interpolation of per-vertex data on a regular grid
    mesh built by :func:`surfpde.geometry.grid_mesh` (matching triangle
    split).  Lookup is closed-form, no search structures."""

    def __init__(self, nx, ny, bounds, vertex_values):
        (self.x0, self.x1), (self.y0, self.y1) = bounds
        self.nx, self.ny = nx, ny
        self.values = np.asarray(vertex_values, dtype=np.float64)
        if self.values.shape[0] != (nx + 1) * (ny + 1):
            raise SurfPdeError("vertex data does not match the grid size")

    def __call__(self, samples):
        X = samples.positions if hasattr(samples, "positions") else np.asarray(samples)
        x, y = X[:, 0], X[:, 1]
        hx = (self.x1 - self.x0) / self.nx
        hy = (self.y1 - self.y0) / self.ny
        i = np.clip(((x - self.x0) / hx).astype(int), 0, self.nx - 1)
        j = np.clip(((y - self.y0) / hy).astype(int), 0, self.ny - 1)
        s = (x - self.x0) / hx - i
        t = (y - self.y0) / hy - j

        def vid(ii, jj):
            return ii * (self.ny + 1) + jj

        v00 = self.values[vid(i, j)]
        v10 = self.values[vid(i + 1, j)]
        v11 = self.values[vid(i + 1, j + 1)]
        v01 = self.values[vid(i, j + 1)]
        lower = s >= t  # triangle (i,j) (i+1,j) (i+1,j+1)
        out = np.where(
            lower,
            (1 - s) * v00 + (s - t) * v10 + t * v11,
            (1 - t) * v00 + s * v11 + (t - s) * v01,
        )
        return out


def make_manufactured(surface, family, params=None, seed=0):
    """Construct a manufactured (u, f) pair on the given surface.

    Families:
      trigonometric  flat rectangle: u = sin(a pi x) sin(b pi y)
      polynomial     sphere: u = c . x (first-degree harmonic)
      eigenfunction  heightfield/mesh: u = phi_i of the discrete operator
      mesh_source    closed mesh: analytic f (mean-subtracted), FEM u_gt
    """
    from .trainer import PdeProblem, from_xyz

    params = dict(params or {})
    operator = params.pop("operator", "poisson")
    k = float(params.pop("k", 0.0))
    lambda_bc = float(params.pop("lambda_bc", 100.0))
    rng = np.random.default_rng(seed)

    if family == "trigonometric":
        from .geometry import RectangleSurface

        if not isinstance(surface, RectangleSurface):
            raise SurfPdeError("trigonometric family expects a flat rectangle")
        a = float(params.pop("a", 1.0))
        b = float(params.pop("b", 1.0))
        sx = np.pi * a / (surface.x1 - surface.x0)
        sy = np.pi * b / (surface.y1 - surface.y0)

        def u_fn(X):
            return np.sin(sx * (X[:, 0] - surface.x0)) * np.sin(
                sy * (X[:, 1] - surface.y0)
            )

        lam = sx**2 + sy**2

        def f_fn(X):
            return (k**2 - lam) * u_fn(X) if operator == "helmholtz" else -lam * u_fn(X)

        problem = PdeProblem(
            operator=operator, f=from_xyz(f_fn), g=from_xyz(u_fn), k=k,
            lambda_bc=lambda_bc,
            dirichlet_labels=tuple(surface.boundary_labels()),
        )
        pts = surface.sample_interior(10000, np.random.default_rng(seed + 90001)).positions
        return ManufacturedProblem(
            surface=surface, problem=problem, eval_points=pts,
            eval_values=u_fn(pts), mean_free=False,
            description=f"rect trig a={a} b={b} {operator}",
            u_gt=from_xyz(u_fn),
        )

    if family == "polynomial":
        from .geometry import SphereSurface

        if not isinstance(surface, SphereSurface):
            raise SurfPdeError("polynomial family expects the sphere")
        c = np.asarray(params.pop("coeffs", (0.0, 0.0, 1.0)), dtype=np.float64)

        def u_fn(X):
            return X @ c

        lam = 2.0 / surface.radius**2  # first spherical harmonics: -Lap u = lam u

        def f_fn(X):
            val = u_fn(X)
            return (k**2 - lam) * val if operator == "helmholtz" else -lam * val

        problem = PdeProblem(
            operator=operator, f=from_xyz(f_fn), k=k, lambda_bc=lambda_bc
        )
        pts = surface.sample_interior(10000, np.random.default_rng(seed + 90001)).positions
        return ManufacturedProblem(
            surface=surface, problem=problem, eval_points=pts,
            eval_values=u_fn(pts),
            mean_free=(operator == "poisson"),
            description=f"sphere linear {operator}", u_gt=from_xyz(u_fn),
        )

    if family == "eigenfunction":
        index = int(params.pop("index", 1))
        from .geometry import HeightfieldSurface, MeshSurface

        if isinstance(surface, HeightfieldSurface):
            nx = int(params.pop("grid", 96))
            from .geometry import grid_mesh

            mesh = grid_mesh(
                nx, nx, bounds=((surface.x0, surface.x1), (surface.y0, surface.y1)),
                height=surface.g,
            )
            system = build_fem(mesh, dirichlet_labels=(), neumann_labels=("all",))
            lam, phi = smallest_eigenpairs(system, max(index + 1, 2))
            lam_i = float(lam[index])
            vertex_u = phi[:, index]
            if operator == "helmholtz" and abs(k**2 - lam_i) < 0.3:
                raise SurfPdeError(
                    f"k^2={k**2:.3f} too close to eigenvalue {lam_i:.3f}"
                )
            interp = GridInterpolator(
                nx, nx, ((surface.x0, surface.x1), (surface.y0, surface.y1)),
                vertex_u,
            )
            factor = (k**2 - lam_i) if operator == "helmholtz" else -lam_i

            def f_fn(samples):
                return factor * interp(samples)

            problem = PdeProblem(
                operator=operator, f=f_fn, h=None, k=k, lambda_bc=lambda_bc,
                neumann_labels=tuple(surface.boundary_labels()),
            )
            return ManufacturedProblem(
                surface=surface, problem=problem,
                eval_points=mesh.vertices, eval_values=vertex_u,
                mean_free=(operator == "poisson"),
                description=f"heightfield eigen index={index} lam={lam_i:.4f} {operator}",
                u_gt=interp,
            )
        if isinstance(surface, MeshSurface):
            system = build_fem(
                surface, dirichlet_labels=(), neumann_labels=("all",)
            )
            lam, phi = smallest_eigenpairs(system, max(index + 1, 2))
            lam_i = float(lam[index])
            vertex_u = phi[:, index]
            factor = (k**2 - lam_i) if operator == "helmholtz" else -lam_i

            def f_fn(samples):
                return factor * surface.interpolate(vertex_u, samples)

            problem = PdeProblem(
                operator=operator, f=f_fn, k=k, lambda_bc=lambda_bc,
                neumann_labels=tuple(surface.boundary_labels()),
            )
            return ManufacturedProblem(
                surface=surface, problem=problem,
                eval_points=surface.vertices, eval_values=vertex_u,
                mean_free=(operator == "poisson"),
                description=f"mesh eigen index={index} lam={lam_i:.4f} {operator}",
            )
        raise SurfPdeError("eigenfunction family needs a heightfield or mesh")

    if family == "mesh_source":
        from .geometry import MeshSurface

        if not isinstance(surface, MeshSurface) or not surface.closed:
            raise SurfPdeError("mesh_source family expects a closed mesh")
        f_xyz = params.pop("f")
        rounds = int(params.pop("refine", 1))
        project = params.pop("project", None)
        fine = refine_mesh(surface, project=project, rounds=rounds)
        system = build_fem(fine)
        f_vertex = np.asarray(f_xyz(fine.vertices), dtype=np.float64)
        mass = system.M.diagonal()
        mean = float(mass @ f_vertex / mass.sum())
        f_vertex = f_vertex - mean

        def f_fn(samples):
            return np.asarray(f_xyz(samples.positions), dtype=np.float64) - mean

        if operator == "helmholtz":
            u_vertex = fem_solve(system, f_vertex, operator="helmholtz", k=k)
        else:
            u_vertex = fem_solve(system, f_vertex)
        from .trainer import PdeProblem

        problem = PdeProblem(
            operator=operator, f=f_fn, k=k, lambda_bc=lambda_bc
        )
        return ManufacturedProblem(
            surface=surface, problem=problem, eval_points=fine.vertices,
            eval_values=u_vertex, mean_free=(operator == "poisson"),
            description=f"closed mesh source {operator} (refined x{rounds})",
        )

    raise SurfPdeError(f"unknown manufactured family {family!r}")


def refine_mesh(mesh: MeshSurface, project=None, rounds=1) -> MeshSurface:
    """Midpoint (1-to-4) subdivision; ``project`` may push new vertices back
    onto the smooth surface (e.g. sphere normalization or heightfield lift)."""
    V = mesh.vertices.copy()
    F = mesh.faces.copy()
    for _ in range(rounds):
        verts = list(V)
        midpoint = {}
        new_faces = []

        def mid(a, b):
            key = (min(a, b), max(a, b))
            if key not in midpoint:
                m = 0.5 * (verts[a] + verts[b])
                midpoint[key] = len(verts)
                verts.append(m)
            return midpoint[key]

        for a, b, c in F:
            ab, bc, ca = mid(a, b), mid(b, c), mid(c, a)
            new_faces += [[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]
        V = np.array(verts)
        F = np.array(new_faces, dtype=np.int64)
        if project is not None:
            V = project(V)
    return MeshSurface(V, F, normalize=False)
