"""Surface differential operators expressed over jets.

Everything is written against the extrinsic normal-projection formulas:
the surface gradient removes the normal component of the Euclidean
gradient, and the surface divergence of a vector field F is
``trace(J(F)) - n^T J(F) n`` with J's column i holding dF/dx_i.  The
surface Laplacian composes the two by the product rule, so only the
scalar field's Hessian and the normal field's first derivatives enter.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff
from .autodiff import Jet2, VecJet1
from .errors import SurfPdeError
from .field import SirenNet
from .geometry import AnalyticSurface, Surface
from .validation import check_point

_UNIT_TOL = 1e-8


@dataclass(frozen=True)
class SurfaceJet:
    """Scalar-field jet together with the normal field data at one point."""

    u: Jet2
    n: np.ndarray  # (3,) unit normal
    Jn: np.ndarray  # (3, 3) Jacobian of the normal field, column i = dn/dx_i


def _check_unit_normal(n):
    n = np.asarray(n, dtype=np.float64)
    err = abs(np.linalg.norm(n) - 1.0)
    if err > _UNIT_TOL:
        raise SurfPdeError(f"normal is not unit length (|norm-1|={err:.2e})")
    return n


def surface_gradient(grad, n):
    """Tangential part of the Euclidean gradient: grad - (grad.n) n."""
    n = _check_unit_normal(n)
    grad = np.asarray(grad, dtype=np.float64)
    return grad - np.dot(grad, n) * n


def surface_divergence(F_jet: VecJet1, n):
    """trace(J) - n^T J n for a vector field's first-order jet."""
    n = _check_unit_normal(n)
    J = F_jet.jacobian
    return float(np.trace(J) - n @ J @ n)


def projected_gradient_jacobian(sj: SurfaceJet):
    """The tangential-gradient field G = grad u - (grad u . n) n and its
    Jacobian, assembled by the product rule from the scalar Hessian and the
    normal field's Jacobian."""
    n = _check_unit_normal(sj.n)
    g = sj.u.grad
    H = sj.u.hess
    Jn = sj.Jn
    s = float(g @ n)
    G = g - s * n
    JG = H - np.outer(n, H @ n) - (s * Jn + np.outer(n, Jn.T @ g))
    return G, JG


def laplace_beltrami(sj: SurfaceJet) -> float:
    """Surface Laplacian: surface divergence of the tangential gradient."""
    n = _check_unit_normal(sj.n)
    _, JG = projected_gradient_jacobian(sj)
    return float(np.trace(JG) - n @ JG @ n)


def neumann_derivative(sj: SurfaceJet, nu) -> float:
    """Directional derivative of the field along the boundary normal nu."""
    nu = _check_unit_normal(np.asarray(nu, dtype=np.float64))
    n = _check_unit_normal(sj.n)
    if abs(float(nu @ n)) > 1e-6:
        raise SurfPdeError(
            f"boundary normal is not tangent to the surface (nu.n={float(nu @ n):.2e})"
        )
    return float(surface_gradient(sj.u.grad, n) @ nu)


# ---------------------------------------------------------------------------
# Batched forms used by the trainer (identical math, vectorized)
# ---------------------------------------------------------------------------


def lb_coefficients(n, Jn):
    """Linear coefficients of the surface Laplacian in the scalar jet.

    Returns (A, b) with LB(u) = <A, H> + b . grad, where A = I - n n^T and
    b = -(trace Jn - n^T Jn n) n.  This is the closed form obtained by
    expanding trace(JG) - n^T JG n; the projector annihilates every term of
    JG built on an outer product with n.
    """
    n = np.asarray(n, dtype=np.float64)
    A = np.eye(3)[None] - n[:, :, None] * n[:, None, :]
    c = np.einsum("nkk->n", Jn) - np.einsum("nk,nkm,nm->n", n, Jn, n)
    b = -c[:, None] * n
    return A, b


def lb_batch(grad, hess, n, Jn):
    """Surface Laplacian for a batch of scalar jets."""
    A, b = lb_coefficients(n, Jn)
    return np.einsum("nkm,nkm->n", A, hess) + np.einsum("nk,nk->n", b, grad)


def surface_gradient_batch(grad, n):
    s = np.einsum("nk,nk->n", grad, n)
    return grad - s[:, None] * n


def tangent_unit_gradient(jets, n, Jn, eps=1e-8):
    """Unit tangential-gradient field X = -G/|G| with its surface divergence.

    Returns (X, divX, valid) where ``valid`` flags samples whose tangential
    gradient exceeds ``eps`` (the rest carry zeros).
    """
    g, H = jets.grad, jets.hess
    s = np.einsum("nk,nk->n", g, n)
    G = g - s[:, None] * n
    JG = (
        H
        - n[:, :, None] * np.einsum("nkm,nm->nk", H, n)[:, None, :]
        - s[:, None, None] * Jn
        - n[:, :, None] * np.einsum("nmk,nm->nk", Jn, g)[:, None, :]
    )
    norm = np.linalg.norm(G, axis=1)
    valid = norm > eps
    X = np.zeros_like(G)
    divX = np.zeros(len(norm))
    if np.any(valid):
        Gv = G[valid]
        nv = norm[valid][:, None]
        Ghat = Gv / nv
        JGv = JG[valid]
        # J(-G/|G|) = -(I - Ghat Ghat^T) JG / |G|
        JX = -(JGv - Ghat[:, :, None] * np.einsum("nr,nrk->nk", Ghat, JGv)[:, None, :]) / nv[:, :, None]
        X[valid] = -Ghat
        nn = n[valid]
        divX[valid] = np.einsum("nkk->n", JX) - np.einsum(
            "nk,nkm,nm->n", nn, JX, nn
        )
    return X, divX, valid


# ---------------------------------------------------------------------------
# Jet assembly and quadrature
# ---------------------------------------------------------------------------


class NormalSource:
    """Supplies (n, Jn) at arbitrary surface points."""

    def normal_jet(self, X):
        raise NotImplementedError


class ExactNormals(NormalSource):
    """Closed-form normals of an analytic surface."""

    def __init__(self, surface: AnalyticSurface):
        if not isinstance(surface, AnalyticSurface):
            raise SurfPdeError(
                "exact normals require an analytic surface; train a normal "
                "net for mesh domains"
            )
        self.surface = surface

    def normal_jet(self, X):
        return self.surface.normal_jet(X)


class NetNormals(NormalSource):
    """Normals from a trained unit-output network, differentiated through
    the normalization layer."""

    def __init__(self, net: SirenNet):
        if not net.normalize_output:
            raise SurfPdeError("normal net must have normalize_output set")
        self.net = net

    def normal_jet(self, X):
        return autodiff.vec_jet1_forward(self.net, X)


def make_surface_jet(u_net: SirenNet, normal_source, x) -> SurfaceJet:
    """Assemble the full surface jet of a solution field at one point."""
    x = check_point(x)
    if isinstance(normal_source, AnalyticSurface):
        normal_source = ExactNormals(normal_source)
    u = autodiff.eval_jet2(u_net, x)
    n, Jn = normal_source.normal_jet(x[None, :])
    return SurfaceJet(u=u, n=n[0], Jn=Jn[0])


def check_compatibility(surface: Surface, f, h=None, count=20000, seed=0, tol=1e-2):
    """Monte Carlo check of the solvability condition for Neumann/closed
    problems: the area integral of f plus the boundary integral of h must
    vanish.  Diagnostic only: returns (residual, ok)."""
    interior = surface.sample_interior(count, seed)
    f_vals = np.asarray(f(interior), dtype=np.float64)
    area = surface.area()
    residual = area * float(np.mean(f_vals))
    scale = area * float(np.max(np.abs(f_vals), initial=0.0))
    if h is not None and surface.boundary_labels():
        boundary = surface.sample_boundary("all", max(count // 10, 100), seed + 1)
        h_vals = np.asarray(h(boundary), dtype=np.float64)
        perim = surface.boundary_length("all")
        residual += perim * float(np.mean(h_vals))
        scale += perim * float(np.max(np.abs(h_vals), initial=0.0))
    ok = abs(residual) <= tol * (scale + 1e-12)
    return residual, ok
