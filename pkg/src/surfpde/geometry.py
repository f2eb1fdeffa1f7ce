"""Domain representations: analytic surfaces and triangle meshes.

Every surface supplies uniform area-weighted interior sampling, arc-length
uniform boundary sampling with outward boundary normals, and (for analytic
kinds) exact normals plus the spatial Jacobian of the extended normal field.
Meshes are validated for manifoldness and consistent orientation on load and
normalized into the [-1, 1]^3 cube.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import NonManifoldMeshError, SurfPdeError
from .validation import check_points, check_rng

_DEGENERATE_AREA_FRACTION = 1e-14


@dataclass
class SampleSet:
    """A batch of surface samples with their geometric attributes.

    ``normals`` are exact analytic normals or flat face normals (mesh kind).
    Boundary sets also carry the outward boundary normal ``nu`` (tangent to
    the surface, perpendicular to the boundary curve).
    """

    positions: np.ndarray  # (N, 3)
    normals: np.ndarray  # (N, 3)
    on_boundary: bool = False
    nu: np.ndarray | None = None  # (N, 3) for boundary sets
    face_index: np.ndarray | None = None  # (N,) mesh kind
    barycentric: np.ndarray | None = None  # (N, 3) mesh kind

    def __len__(self):
        return self.positions.shape[0]


class Surface:
    """Common interface for all domain kinds."""

    kind = "abstract"
    closed = False

    def area(self) -> float:
        raise NotImplementedError

    def boundary_labels(self) -> list[str]:
        return []

    def boundary_length(self, labels=None) -> float:
        return 0.0

    def sample_interior(self, count, seed) -> SampleSet:
        raise NotImplementedError

    def sample_boundary(self, labels, count, seed) -> SampleSet:
        self._require_labels(labels)  # raises for closed surfaces
        raise NotImplementedError

    def _require_labels(self, labels):
        known = self.boundary_labels()
        if not known:
            raise SurfPdeError(f"{self.kind} surface has no boundary loops")
        if labels is None or labels == "all":
            return list(known)
        labels = [labels] if isinstance(labels, str) else list(labels)
        for lab in labels:
            if lab not in known:
                raise SurfPdeError(
                    f"unknown boundary label {lab!r}; available: {known}"
                )
        return labels


class AnalyticSurface(Surface):
    """Surface with closed-form normals; ``normal_jet`` returns the unit
    normal field and its spatial Jacobian (column i = dn/dx_i)."""

    def normal(self, X) -> np.ndarray:
        return self.normal_jet(X)[0]

    def normal_jet(self, X):
        raise NotImplementedError


def _unit_jet_from_raw(v, Jv):
    """Normal and Jacobian of v/|v| given the raw field jet."""
    r = np.linalg.norm(v, axis=1, keepdims=True)
    n = v / r
    proj = np.einsum("nr,nrk->nk", n, Jv)
    Jn = (Jv - n[:, :, None] * proj[:, None, :]) / r[:, :, None]
    return n, Jn


class SphereSurface(AnalyticSurface):
    """Sphere of given radius centered at the origin (closed)."""

    kind = "sphere"
    closed = True

    def __init__(self, radius=1.0):
        if radius <= 0 or radius > 1.0 + 1e-12:
            raise SurfPdeError("sphere radius must lie in (0, 1] (normalized cube)")
        self.radius = float(radius)

    def area(self):
        return 4.0 * np.pi * self.radius**2

    def normal_jet(self, X):
        X = check_points(X)
        r = np.linalg.norm(X, axis=1, keepdims=True)
        n = X / r
        Jn = (np.eye(3)[None] - n[:, :, None] * n[:, None, :]) / r[:, :, None]
        return n, Jn

    def sample_interior(self, count, seed):
        rng = check_rng(seed)
        v = rng.standard_normal((count, 3))
        n = v / np.linalg.norm(v, axis=1, keepdims=True)
        return SampleSet(positions=self.radius * n, normals=n)


class RectangleSurface(AnalyticSurface):
    """Flat axis-aligned rectangle at z = 0.

    Boundary labels: xmin, xmax, ymin, ymax.
    """

    kind = "rect"

    def __init__(self, bounds=((-1.0, 1.0), (-1.0, 1.0))):
        (self.x0, self.x1), (self.y0, self.y1) = [
            (float(a), float(b)) for a, b in bounds
        ]
        if self.x1 <= self.x0 or self.y1 <= self.y0:
            raise SurfPdeError("rectangle bounds must be increasing")

    def area(self):
        return (self.x1 - self.x0) * (self.y1 - self.y0)

    def boundary_labels(self):
        return ["xmin", "xmax", "ymin", "ymax"]

    def boundary_length(self, labels=None):
        labels = self._require_labels(labels)
        lx, ly = self.x1 - self.x0, self.y1 - self.y0
        per = {"xmin": ly, "xmax": ly, "ymin": lx, "ymax": lx}
        return sum(per[lab] for lab in labels)

    def normal_jet(self, X):
        X = check_points(X)
        n = np.tile(np.array([0.0, 0.0, 1.0]), (X.shape[0], 1))
        return n, np.zeros((X.shape[0], 3, 3))

    def sample_interior(self, count, seed):
        rng = check_rng(seed)
        P = np.zeros((count, 3))
        P[:, 0] = rng.uniform(self.x0, self.x1, count)
        P[:, 1] = rng.uniform(self.y0, self.y1, count)
        return SampleSet(positions=P, normals=self.normal(P))

    def sample_boundary(self, labels, count, seed):
        labels = self._require_labels(labels)
        rng = check_rng(seed)
        lengths = np.array([self.boundary_length([lab]) for lab in labels])
        choice = rng.choice(len(labels), size=count, p=lengths / lengths.sum())
        t = rng.uniform(0.0, 1.0, count)
        P = np.zeros((count, 3))
        nu = np.zeros((count, 3))
        for i, lab in enumerate(labels):
            sel = choice == i
            if lab in ("xmin", "xmax"):
                P[sel, 0] = self.x0 if lab == "xmin" else self.x1
                P[sel, 1] = self.y0 + t[sel] * (self.y1 - self.y0)
                nu[sel, 0] = -1.0 if lab == "xmin" else 1.0
            else:
                P[sel, 1] = self.y0 if lab == "ymin" else self.y1
                P[sel, 0] = self.x0 + t[sel] * (self.x1 - self.x0)
                nu[sel, 1] = -1.0 if lab == "ymin" else 1.0
        return SampleSet(
            positions=P, normals=self.normal(P), on_boundary=True, nu=nu
        )


class DiskSurface(AnalyticSurface):
    """Flat disk (or annulus when inner_radius > 0) at z = 0.

    Boundary labels: outer, and inner when an inner radius is set.
    """

    kind = "disk"

    def __init__(self, radius=1.0, inner_radius=0.0):
        if radius <= 0 or inner_radius < 0 or inner_radius >= radius:
            raise SurfPdeError("need 0 <= inner_radius < radius")
        self.radius = float(radius)
        self.inner_radius = float(inner_radius)

    def area(self):
        return np.pi * (self.radius**2 - self.inner_radius**2)

    def boundary_labels(self):
        return ["outer", "inner"] if self.inner_radius > 0 else ["outer"]

    def boundary_length(self, labels=None):
        labels = self._require_labels(labels)
        per = {"outer": 2 * np.pi * self.radius, "inner": 2 * np.pi * self.inner_radius}
        return sum(per[lab] for lab in labels)

    def normal_jet(self, X):
        X = check_points(X)
        n = np.tile(np.array([0.0, 0.0, 1.0]), (X.shape[0], 1))
        return n, np.zeros((X.shape[0], 3, 3))

    def sample_interior(self, count, seed):
        rng = check_rng(seed)
        r = np.sqrt(rng.uniform(self.inner_radius**2, self.radius**2, count))
        th = rng.uniform(0, 2 * np.pi, count)
        P = np.column_stack([r * np.cos(th), r * np.sin(th), np.zeros(count)])
        return SampleSet(positions=P, normals=self.normal(P))

    def sample_boundary(self, labels, count, seed):
        labels = self._require_labels(labels)
        rng = check_rng(seed)
        lengths = np.array([self.boundary_length([lab]) for lab in labels])
        choice = rng.choice(len(labels), size=count, p=lengths / lengths.sum())
        th = rng.uniform(0, 2 * np.pi, count)
        P = np.zeros((count, 3))
        nu = np.zeros((count, 3))
        radial = np.column_stack([np.cos(th), np.sin(th), np.zeros(count)])
        for i, lab in enumerate(labels):
            sel = choice == i
            rad = self.radius if lab == "outer" else self.inner_radius
            sign = 1.0 if lab == "outer" else -1.0
            P[sel] = rad * radial[sel]
            nu[sel] = sign * radial[sel]
        return SampleSet(
            positions=P, normals=self.normal(P), on_boundary=True, nu=nu
        )


class CylinderSurface(AnalyticSurface):
    """Open cylinder of given radius about the z axis, z in [-h/2, h/2].

    Boundary labels: top, bottom (the two rim circles).
    """

    kind = "cylinder"

    def __init__(self, radius=0.5, height=1.0):
        if radius <= 0 or height <= 0:
            raise SurfPdeError("cylinder radius and height must be positive")
        self.radius = float(radius)
        self.height = float(height)

    def area(self):
        return 2 * np.pi * self.radius * self.height

    def boundary_labels(self):
        return ["top", "bottom"]

    def boundary_length(self, labels=None):
        labels = self._require_labels(labels)
        return len(labels) * 2 * np.pi * self.radius

    def normal_jet(self, X):
        X = check_points(X)
        v = X.copy()
        v[:, 2] = 0.0
        Jv = np.zeros((X.shape[0], 3, 3))
        Jv[:, 0, 0] = 1.0
        Jv[:, 1, 1] = 1.0
        return _unit_jet_from_raw(v, Jv)

    def sample_interior(self, count, seed):
        rng = check_rng(seed)
        th = rng.uniform(0, 2 * np.pi, count)
        z = rng.uniform(-self.height / 2, self.height / 2, count)
        P = np.column_stack(
            [self.radius * np.cos(th), self.radius * np.sin(th), z]
        )
        return SampleSet(positions=P, normals=self.normal(P))

    def sample_boundary(self, labels, count, seed):
        labels = self._require_labels(labels)
        rng = check_rng(seed)
        choice = rng.choice(len(labels), size=count)
        th = rng.uniform(0, 2 * np.pi, count)
        P = np.zeros((count, 3))
        nu = np.zeros((count, 3))
        for i, lab in enumerate(labels):
            sel = choice == i
            zsign = 1.0 if lab == "top" else -1.0
            P[sel, 0] = self.radius * np.cos(th[sel])
            P[sel, 1] = self.radius * np.sin(th[sel])
            P[sel, 2] = zsign * self.height / 2
            nu[sel, 2] = zsign
        return SampleSet(
            positions=P, normals=self.normal(P), on_boundary=True, nu=nu
        )


class HeightfieldSurface(AnalyticSurface):
    """Graph z = g(x, y) over an axis-aligned rectangle.

    ``g`` must supply values, gradient and Hessian:
    callables g(x, y), grad(x, y) -> (gx, gy), hess(x, y) -> (gxx, gxy, gyy),
    each vectorized over numpy arrays.  Boundary labels as for rectangles.
    """

    kind = "heightfield"

    def __init__(self, g, grad, hess, bounds=((-1.0, 1.0), (-1.0, 1.0))):
        self.g, self.grad, self.hess = g, grad, hess
        (self.x0, self.x1), (self.y0, self.y1) = [
            (float(a), float(b)) for a, b in bounds
        ]
        if self.x1 <= self.x0 or self.y1 <= self.y0:
            raise SurfPdeError("heightfield bounds must be increasing")
        # density bound for rejection sampling, from a dense probe grid
        xs = np.linspace(self.x0, self.x1, 257)
        ys = np.linspace(self.y0, self.y1, 257)
        GX, GY = np.meshgrid(xs, ys)
        gx, gy = self.grad(GX.ravel(), GY.ravel())
        self._density_bound = float(np.sqrt(1 + gx**2 + gy**2).max()) * 1.05

    def lift(self, xy):
        """Embed (x, y) parameter points onto the surface."""
        xy = np.asarray(xy, dtype=np.float64)
        return np.column_stack([xy[:, 0], xy[:, 1], self.g(xy[:, 0], xy[:, 1])])

    def area(self):
        # tensor-grid quadrature of the area element
        xs = np.linspace(self.x0, self.x1, 513)
        ys = np.linspace(self.y0, self.y1, 513)
        GX, GY = np.meshgrid(xs, ys)
        gx, gy = self.grad(GX.ravel(), GY.ravel())
        dens = np.sqrt(1 + gx**2 + gy**2).reshape(GX.shape)
        return float(
            np.trapezoid(np.trapezoid(dens, ys, axis=0), xs)
        )

    def boundary_labels(self):
        return ["xmin", "xmax", "ymin", "ymax"]

    def boundary_length(self, labels=None):
        labels = self._require_labels(labels)
        total = 0.0
        for lab in labels:
            t, pts = self._edge_points(lab, 513)
            seg = np.diff(pts, axis=0)
            total += float(np.linalg.norm(seg, axis=1).sum())
        return total

    def _edge_points(self, lab, n):
        t = np.linspace(0.0, 1.0, n)
        if lab in ("xmin", "xmax"):
            x = np.full(n, self.x0 if lab == "xmin" else self.x1)
            y = self.y0 + t * (self.y1 - self.y0)
        else:
            y = np.full(n, self.y0 if lab == "ymin" else self.y1)
            x = self.x0 + t * (self.x1 - self.x0)
        return t, np.column_stack([x, y, self.g(x, y)])

    def normal_jet(self, X):
        X = check_points(X)
        x, y = X[:, 0], X[:, 1]
        gx, gy = self.grad(x, y)
        gxx, gxy, gyy = self.hess(x, y)
        v = np.column_stack([-gx, -gy, np.ones_like(gx)])
        Jv = np.zeros((X.shape[0], 3, 3))
        Jv[:, 0, 0] = -gxx
        Jv[:, 0, 1] = -gxy
        Jv[:, 1, 0] = -gxy
        Jv[:, 1, 1] = -gyy
        return _unit_jet_from_raw(v, Jv)

    def sample_interior(self, count, seed):
        rng = check_rng(seed)
        xs = np.empty(count)
        ys = np.empty(count)
        have = 0
        while have < count:
            n_try = max(64, int((count - have) * 1.5))
            x = rng.uniform(self.x0, self.x1, n_try)
            y = rng.uniform(self.y0, self.y1, n_try)
            gx, gy = self.grad(x, y)
            dens = np.sqrt(1 + gx**2 + gy**2)
            keep = rng.uniform(0, self._density_bound, n_try) < dens
            k = min(int(keep.sum()), count - have)
            xs[have : have + k] = x[keep][:k]
            ys[have : have + k] = y[keep][:k]
            have += k
        P = np.column_stack([xs, ys, self.g(xs, ys)])
        return SampleSet(positions=P, normals=self.normal(P))

    def sample_boundary(self, labels, count, seed):
        labels = self._require_labels(labels)
        rng = check_rng(seed)
        lengths = np.array([self.boundary_length([lab]) for lab in labels])
        choice = rng.choice(len(labels), size=count, p=lengths / lengths.sum())
        P = np.zeros((count, 3))
        nu = np.zeros((count, 3))
        outward = {
            "xmin": np.array([-1.0, 0.0, 0.0]),
            "xmax": np.array([1.0, 0.0, 0.0]),
            "ymin": np.array([0.0, -1.0, 0.0]),
            "ymax": np.array([0.0, 1.0, 0.0]),
        }
        for i, lab in enumerate(labels):
            sel = np.flatnonzero(choice == i)
            if sel.size == 0:
                continue
            pts = self._sample_edge(lab, sel.size, rng)
            P[sel] = pts
            n, _ = self.normal_jet(pts)
            # tangent along the edge
            if lab in ("xmin", "xmax"):
                gx, gy = self.grad(pts[:, 0], pts[:, 1])
                T = np.column_stack([np.zeros(sel.size), np.ones(sel.size), gy])
            else:
                gx, gy = self.grad(pts[:, 0], pts[:, 1])
                T = np.column_stack([np.ones(sel.size), np.zeros(sel.size), gx])
            raw = np.cross(T, n)
            raw /= np.linalg.norm(raw, axis=1, keepdims=True)
            sign = np.sign(raw @ outward[lab])
            nu[sel] = raw * sign[:, None]
        return SampleSet(
            positions=P, normals=self.normal(P), on_boundary=True, nu=nu
        )

    def _sample_edge(self, lab, count, rng):
        # rejection on the 1-D arc-length density
        lo, hi = (
            (self.y0, self.y1) if lab in ("xmin", "xmax") else (self.x0, self.x1)
        )
        _, probe = self._edge_points(lab, 257)
        speed_bound = (
            np.linalg.norm(np.diff(probe, axis=0), axis=1).max()
            / ((hi - lo) / 256)
        ) * 1.05
        out = np.empty(count)
        have = 0
        while have < count:
            n_try = max(64, int((count - have) * 1.5))
            t = rng.uniform(lo, hi, n_try)
            if lab in ("xmin", "xmax"):
                x = np.full(n_try, self.x0 if lab == "xmin" else self.x1)
                gx, gy = self.grad(x, t)
                speed = np.sqrt(1 + gy**2)
            else:
                y = np.full(n_try, self.y0 if lab == "ymin" else self.y1)
                gx, gy = self.grad(t, y)
                speed = np.sqrt(1 + gx**2)
            keep = rng.uniform(0, speed_bound, n_try) < speed
            k = min(int(keep.sum()), count - have)
            out[have : have + k] = t[keep][:k]
            have += k
        if lab in ("xmin", "xmax"):
            x = np.full(count, self.x0 if lab == "xmin" else self.x1)
            return np.column_stack([x, out, self.g(x, out)])
        y = np.full(count, self.y0 if lab == "ymin" else self.y1)
        return np.column_stack([out, y, self.g(out, y)])


def saddle_heightfield(amplitude=0.3, bounds=((-1.0, 1.0), (-1.0, 1.0))):
    """Smooth saddle z = a*(x^2 - y^2) with closed-form derivatives."""
    a = float(amplitude)
    return HeightfieldSurface(
        g=lambda x, y: a * (x**2 - y**2),
        grad=lambda x, y: (2 * a * x, -2 * a * y),
        hess=lambda x, y: (
            np.full_like(np.asarray(x, dtype=float), 2 * a),
            np.zeros_like(np.asarray(x, dtype=float)),
            np.full_like(np.asarray(x, dtype=float), -2 * a),
        ),
        bounds=bounds,
    )


# ---------------------------------------------------------------------------
# Triangle meshes
# ---------------------------------------------------------------------------


@dataclass
class MeshData:
    vertices: np.ndarray  # (V, 3)
    faces: np.ndarray  # (F, 3) int
    boundary_loops: list = field(default_factory=list)  # list of vertex index arrays


def _validate_mesh(vertices, faces):
    """Manifoldness + orientation checks; returns boundary loop vertex lists."""
    if len(faces) == 0:
        raise NonManifoldMeshError("empty mesh (no faces)")
    edge_count = {}
    directed = set()
    for f_idx, (a, b, c) in enumerate(faces):
        if a == b or b == c or a == c:
            raise NonManifoldMeshError(f"face {f_idx} repeats a vertex")
        for u, v in ((a, b), (b, c), (c, a)):
            if (u, v) in directed:
                raise NonManifoldMeshError(
                    f"directed edge ({u},{v}) appears twice: inconsistent "
                    "orientation or non-manifold mesh"
                )
            directed.add((u, v))
            key = (min(u, v), max(u, v))
            edge_count[key] = edge_count.get(key, 0) + 1
    for key, cnt in edge_count.items():
        if cnt > 2:
            raise NonManifoldMeshError(f"edge {key} shared by {cnt} faces")
    # boundary = directed edges with no reverse partner
    boundary_edges = {(u, v) for (u, v) in directed if (v, u) not in directed}
    nxt = {}
    for u, v in boundary_edges:
        if u in nxt:
            raise NonManifoldMeshError(
                f"vertex {u} has multiple outgoing boundary edges (non-manifold)"
            )
        nxt[u] = v
    loops = []
    remaining = set(nxt)
    while remaining:
        start = min(remaining)
        loop = [start]
        remaining.discard(start)
        v = nxt[start]
        while v != start:
            loop.append(v)
            remaining.discard(v)
            v = nxt[v]
        loops.append(np.array(loop, dtype=np.int64))
    loops.sort(key=lambda lp: int(lp.min()))
    return loops


def triangle_areas_normals(vertices, faces):
    e1 = vertices[faces[:, 1]] - vertices[faces[:, 0]]
    e2 = vertices[faces[:, 2]] - vertices[faces[:, 0]]
    cross = np.cross(e1, e2)
    norms = np.linalg.norm(cross, axis=1)
    areas = 0.5 * norms
    with np.errstate(invalid="ignore", divide="ignore"):
        normals = cross / norms[:, None]
    return areas, normals


class MeshSurface(Surface):
    """Manifold oriented triangle mesh.

    Boundary loops get labels loop0, loop1, ... ordered by smallest vertex
    index.  Per-sample normals are the flat face normals.
    """

    kind = "mesh"

    def __init__(self, vertices, faces, normalize=True, validate=True):
        vertices = np.asarray(vertices, dtype=np.float64)
        faces = np.asarray(faces, dtype=np.int64)
        if faces.ndim != 2 or faces.shape[1] != 3:
            raise NonManifoldMeshError("faces must be an (F, 3) index array")
        if len(vertices) == 0 or len(faces) == 0:
            raise NonManifoldMeshError("empty mesh")
        if faces.min(initial=0) < 0 or faces.max(initial=-1) >= len(vertices):
            raise NonManifoldMeshError("face index out of range")
        self.normalization_offset = np.zeros(3)
        self.normalization_scale = 1.0
        if normalize:
            lo, hi = vertices.min(axis=0), vertices.max(axis=0)
            center = 0.5 * (lo + hi)
            half = float(np.max(hi - lo)) / 2.0
            if half <= 0:
                raise NonManifoldMeshError("mesh is a single point")
            vertices = (vertices - center) / half
            self.normalization_offset = center
            self.normalization_scale = half
        self.vertices = vertices
        self.faces = faces
        areas, normals = triangle_areas_normals(vertices, faces)
        total = areas.sum()
        if total <= 0:
            raise NonManifoldMeshError("mesh has zero total area")
        bad = areas < _DEGENERATE_AREA_FRACTION * total
        if np.any(bad):
            warnings.warn(
                f"dropping {int(bad.sum())} degenerate triangles", stacklevel=2
            )
            self.faces = faces = faces[~bad]
            areas, normals = triangle_areas_normals(vertices, faces)
        self.face_areas = areas
        self.face_normals = normals
        loops = _validate_mesh(vertices, faces) if validate else []
        self.boundary_loops = loops
        self.closed = len(loops) == 0
        self._face_cdf = np.cumsum(areas) / areas.sum()
        self._boundary_cache = {}

    def area(self):
        return float(self.face_areas.sum())

    def boundary_labels(self):
        return [f"loop{i}" for i in range(len(self.boundary_loops))]

    def _loop_edges(self, label):
        if label not in self._boundary_cache:
            idx = int(label.removeprefix("loop"))
            loop = self.boundary_loops[idx]
            starts = loop
            ends = np.roll(loop, -1)
            seg = self.vertices[ends] - self.vertices[starts]
            lengths = np.linalg.norm(seg, axis=1)
            # owning face of each boundary edge (directed edge appears once)
            edge_face = {}
            for f_idx, (a, b, c) in enumerate(self.faces):
                for u, v in ((a, b), (b, c), (c, a)):
                    edge_face[(u, v)] = f_idx
            faces = np.array(
                [edge_face[(int(u), int(v))] for u, v in zip(starts, ends)]
            )
            self._boundary_cache[label] = (starts, ends, lengths, faces)
        return self._boundary_cache[label]

    def boundary_length(self, labels=None):
        labels = self._require_labels(labels)
        return float(
            sum(self._loop_edges(lab)[2].sum() for lab in labels)
        )

    def sample_interior(self, count, seed):
        rng = check_rng(seed)
        u = rng.uniform(0, 1, count)
        tri = np.searchsorted(self._face_cdf, u)
        r1 = np.sqrt(rng.uniform(0, 1, count))
        r2 = rng.uniform(0, 1, count)
        w0 = 1.0 - r1
        w1 = r1 * (1.0 - r2)
        w2 = r1 * r2
        bary = np.column_stack([w0, w1, w2])
        tri_pts = self.vertices[self.faces[tri]]  # (N, 3, 3)
        P = np.einsum("nc,ncd->nd", bary, tri_pts)
        return SampleSet(
            positions=P,
            normals=self.face_normals[tri],
            face_index=tri,
            barycentric=bary,
        )

    def sample_boundary(self, labels, count, seed):
        labels = self._require_labels(labels)
        rng = check_rng(seed)
        starts_all, ends_all, lengths_all, faces_all = [], [], [], []
        for lab in labels:
            s, e, ln, fc = self._loop_edges(lab)
            starts_all.append(s)
            ends_all.append(e)
            lengths_all.append(ln)
            faces_all.append(fc)
        starts = np.concatenate(starts_all)
        ends = np.concatenate(ends_all)
        lengths = np.concatenate(lengths_all)
        faces = np.concatenate(faces_all)
        cdf = np.cumsum(lengths) / lengths.sum()
        pick = np.searchsorted(cdf, rng.uniform(0, 1, count))
        t = rng.uniform(0, 1, count)
        a = self.vertices[starts[pick]]
        b = self.vertices[ends[pick]]
        P = a + t[:, None] * (b - a)
        n = self.face_normals[faces[pick]]
        edge_dir = b - a
        edge_dir /= np.linalg.norm(edge_dir, axis=1, keepdims=True)
        nu = np.cross(edge_dir, n)
        nu /= np.linalg.norm(nu, axis=1, keepdims=True)
        # sign fix: point away from the owning triangle's third vertex
        tri = self.faces[faces[pick]]
        centroid = self.vertices[tri].mean(axis=1)
        flip = np.einsum("nd,nd->n", nu, centroid - P) > 0
        nu[flip] *= -1.0
        return SampleSet(
            positions=P,
            normals=n,
            on_boundary=True,
            nu=nu,
            face_index=faces[pick],
        )

    def interpolate(self, vertex_values, samples: SampleSet):
        """Linear interpolation of per-vertex data at mesh sample points."""
        if samples.face_index is None or samples.barycentric is None:
            raise SurfPdeError("samples lack face/barycentric data")
        vals = np.asarray(vertex_values, dtype=np.float64)
        tri = self.faces[samples.face_index]
        return np.einsum("nc,nc->n", samples.barycentric, vals[tri])


def load_mesh(path, normalize=True) -> MeshSurface:
    """Read a triangle OBJ (polygon faces fan-triangulated)."""
    vertices = []
    faces = []
    with open(path) as fh:
        for line in fh:
            parts = line.split()
            if not parts:
                continue
            if parts[0] == "v":
                vertices.append([float(p) for p in parts[1:4]])
            elif parts[0] == "f":
                idx = [int(p.split("/")[0]) for p in parts[1:]]
                idx = [i - 1 if i > 0 else len(vertices) + i for i in idx]
                for k in range(1, len(idx) - 1):
                    faces.append([idx[0], idx[k], idx[k + 1]])
    if not vertices or not faces:
        raise NonManifoldMeshError(f"{path}: no triangles found")
    return MeshSurface(np.array(vertices), np.array(faces), normalize=normalize)


# ---------------------------------------------------------------------------
# Mesh generators (used for ground truth and tests)
# ---------------------------------------------------------------------------


def grid_mesh(nx, ny, bounds=((0.0, 1.0), (0.0, 1.0)), height=None, normalize=False):
    """Regular triangulated grid over a rectangle, optionally lifted by a
    heightfield callable z = height(x, y)."""
    (x0, x1), (y0, y1) = bounds
    xs = np.linspace(x0, x1, nx + 1)
    ys = np.linspace(y0, y1, ny + 1)
    GX, GY = np.meshgrid(xs, ys, indexing="ij")
    Z = height(GX, GY) if height is not None else np.zeros_like(GX)
    V = np.column_stack([GX.ravel(), GY.ravel(), Z.ravel()])
    faces = []
    def vid(i, j):
        return i * (ny + 1) + j
    for i in range(nx):
        for j in range(ny):
            a, b, c, d = vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1)
            faces.append([a, b, c])
            faces.append([a, c, d])
    return MeshSurface(V, np.array(faces), normalize=normalize)


def icosphere(subdivisions=3, radius=1.0, normalize=False):
    """Icosahedron refined by midpoint subdivision, projected to the sphere."""
    phi = (1 + np.sqrt(5)) / 2
    verts = np.array(
        [
            [-1, phi, 0], [1, phi, 0], [-1, -phi, 0], [1, -phi, 0],
            [0, -1, phi], [0, 1, phi], [0, -1, -phi], [0, 1, -phi],
            [phi, 0, -1], [phi, 0, 1], [-phi, 0, -1], [-phi, 0, 1],
        ],
        dtype=np.float64,
    )
    verts /= np.linalg.norm(verts, axis=1, keepdims=True)
    faces = np.array(
        [
            [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
            [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
            [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
            [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
        ],
        dtype=np.int64,
    )
    for _ in range(subdivisions):
        verts_list = list(verts)
        midpoint = {}
        new_faces = []
        def mid(a, b):
            key = (min(a, b), max(a, b))
            if key not in midpoint:
                m = verts_list[a] + verts_list[b]
                m = m / np.linalg.norm(m)
                midpoint[key] = len(verts_list)
                verts_list.append(m)
            return midpoint[key]
        for a, b, c in faces:
            ab, bc, ca = mid(a, b), mid(b, c), mid(c, a)
            new_faces += [[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]
        verts = np.array(verts_list)
        faces = np.array(new_faces, dtype=np.int64)
    return MeshSurface(radius * verts, faces, normalize=normalize)


def cylinder_mesh(radius=0.5, height=1.0, n_theta=48, n_z=24, normalize=False):
    """Open cylinder about the z axis (two boundary rims)."""
    thetas = np.linspace(0, 2 * np.pi, n_theta, endpoint=False)
    zs = np.linspace(-height / 2, height / 2, n_z + 1)
    V = []
    for z in zs:
        for th in thetas:
            V.append([radius * np.cos(th), radius * np.sin(th), z])
    V = np.array(V)
    faces = []
    def vid(iz, it):
        return iz * n_theta + (it % n_theta)
    for iz in range(n_z):
        for it in range(n_theta):
            a, b = vid(iz, it), vid(iz, it + 1)
            c, d = vid(iz + 1, it + 1), vid(iz + 1, it)
            faces.append([a, b, c])
            faces.append([a, c, d])
    return MeshSurface(V, np.array(faces, dtype=np.int64), normalize=normalize)


def disk_mesh(radius=1.0, inner_radius=0.0, n_theta=48, n_r=12, normalize=False):
    """Flat disk or annulus at z = 0."""
    if inner_radius > 0:
        radii = np.linspace(inner_radius, radius, n_r + 1)
        rings = [
            [[r * np.cos(t), r * np.sin(t), 0.0] for t in
             np.linspace(0, 2 * np.pi, n_theta, endpoint=False)]
            for r in radii
        ]
        V = np.array([p for ring in rings for p in ring])
        faces = []
        def vid(ir, it):
            return ir * n_theta + (it % n_theta)
        for ir in range(n_r):
            for it in range(n_theta):
                a, b = vid(ir, it), vid(ir + 1, it)
                c, d = vid(ir + 1, it + 1), vid(ir, it + 1)
                faces.append([a, b, c])
                faces.append([a, c, d])
        return MeshSurface(V, np.array(faces, dtype=np.int64), normalize=normalize)
    radii = np.linspace(0, radius, n_r + 1)[1:]
    V = [[0.0, 0.0, 0.0]]
    for r in radii:
        for t in np.linspace(0, 2 * np.pi, n_theta, endpoint=False):
            V.append([r * np.cos(t), r * np.sin(t), 0.0])
    V = np.array(V)
    faces = []
    def vid2(ir, it):
        return 1 + ir * n_theta + (it % n_theta)
    for it in range(n_theta):
        faces.append([0, vid2(0, it), vid2(0, it + 1)])
    for ir in range(len(radii) - 1):
        for it in range(n_theta):
            a, b = vid2(ir, it), vid2(ir + 1, it)
            c, d = vid2(ir + 1, it + 1), vid2(ir, it + 1)
            faces.append([a, b, c])
            faces.append([a, c, d])
    return MeshSurface(V, np.array(faces, dtype=np.int64), normalize=normalize)
