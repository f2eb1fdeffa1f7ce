import numpy as np
import pytest

from surfpde import apps
from surfpde.errors import SurfPdeError
from surfpde.estimators import NormalFieldModel
from surfpde.geometry import (
    CylinderSurface,
    DiskSurface,
    RectangleSurface,
    SphereSurface,
    cylinder_mesh,
    icosphere,
)
from surfpde.trainer import from_xyz

FAST = dict(width=12, depth=2, iterations=250, interior_batch=96,
            boundary_batch=32, log_every=100)


class TestHeatStep:
    def test_tau_must_be_positive(self):
        with pytest.raises(ValueError):
            apps.heat_step(SphereSurface(), from_xyz(lambda X: X[:, 2]), 0.0,
                           solver_params=FAST)

    def test_constant_field_stationary(self):
        # constants solve the screened step exactly; a short run keeps them
        surf = SphereSurface()
        solver = apps.heat_step(
            surf, from_xyz(lambda X: np.full(len(X), 0.7)), 0.1,
            solver_params=dict(FAST, iterations=800, seed=2),
        )
        pts = surf.sample_interior(500, seed=3).positions
        assert np.max(np.abs(solver.predict(pts) - 0.7)) < 5e-2

    def test_gaussian_source_closure(self):
        fn = apps.gaussian_source([[0.0, 0.0, 1.0]], sigma=0.3)

        class S:
            positions = np.array([[0.0, 0.0, 1.0], [0.0, 0.0, -1.0]])

        vals = fn(S)
        assert vals[0] == pytest.approx(1.0)
        assert vals[1] < 1e-6


class TestGeodesicPlumbing:
    def test_needs_source_points(self):
        with pytest.raises(SurfPdeError):
            apps.heat_geodesic(DiskSurface(), np.zeros((0, 3)),
                               solver_params=FAST)

    def test_distance_zero_at_source_smoke(self):
        # tiny-budget smoke: the shift pins the source value at zero
        surf = SphereSurface()
        distance, phi, heat = apps.heat_geodesic(
            surf, [[0.0, 0.0, 1.0]], tau=0.25,
            solver_params=dict(FAST, iterations=300, seed=4),
        )
        assert distance(np.array([[0.0, 0.0, 1.0]]))[0] == pytest.approx(0.0, abs=1e-9)


class TestHarmonic:
    def test_needs_boundary(self):
        with pytest.raises(SurfPdeError):
            apps.harmonic_interpolation(
                SphereSurface(), from_xyz(lambda X: np.zeros(len(X))),
                solver_params=FAST,
            )

    def test_constant_boundary_gives_constant(self):
        surf = DiskSurface()
        solver = apps.harmonic_interpolation(
            surf, from_xyz(lambda X: np.full(len(X), 2.0)),
            solver_params=dict(FAST, iterations=900, seed=1),
        )
        pts = surf.sample_interior(400, seed=6).positions
        assert np.max(np.abs(solver.predict(pts) - 2.0)) < 5e-2


class TestMinimalSurface:
    def test_rejects_closed_mesh(self):
        with pytest.raises(SurfPdeError):
            apps.minimal_surface(icosphere(1), solver_params=FAST)

    def test_rejects_analytic_surface(self):
        with pytest.raises(SurfPdeError):
            apps.minimal_surface(CylinderSurface(), solver_params=FAST)


class TestMeanCurvatureFlow:
    def test_rejects_open_mesh(self):
        mesh = cylinder_mesh(n_theta=12, n_z=3)
        with pytest.raises(SurfPdeError):
            apps.mean_curvature_flow(mesh, 0.05, 1, solver_params=FAST)

    def test_rejects_nonpositive_tau(self):
        with pytest.raises(ValueError):
            apps.mean_curvature_flow(icosphere(1), 0.0, 1, solver_params=FAST)

    def test_degenerate_mesh_halts_immediately(self):
        tiny = icosphere(1, radius=1.0)
        shrunk = type(tiny)(tiny.vertices * 1e-6, tiny.faces, normalize=False)
        model = NormalFieldModel(width=8, depth=1, iterations=20,
                                 batch_size=32, seed=0).fit(shrunk)
        with pytest.warns(UserWarning, match="halted"):
            states = apps.mean_curvature_flow(
                shrunk, 0.05, 2, solver_params=FAST, normal_model=model,
                min_area=1e-10,
            )
        assert len(states) == 1
        assert states[0].degenerate


class TestFlowState:
    def test_mean_radius_bookkeeping(self):
        mesh = icosphere(1)
        st = apps.FlowState(vertices=mesh.vertices, tau=0.1,
                            mean_radius=float(np.linalg.norm(mesh.vertices, axis=1).mean()))
        assert st.mean_radius == pytest.approx(1.0, abs=1e-6)
