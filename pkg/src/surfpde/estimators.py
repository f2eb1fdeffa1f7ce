"""Estimator-style front end: fit a field on a surface, predict anywhere.

``PdeSolver`` trains the solution network for a PdeProblem on a Surface;
``NormalFieldModel`` fits the unit normal field (surface or boundary flavor).
Both follow the sklearn parameter conventions (get_params / set_params,
fitted attributes with trailing underscores), so they compose with generic
model-selection tooling.
"""

from __future__ import annotations

import numpy as np

from . import autodiff, trainer
from .base import BaseEstimator, check_fitted
from .errors import SurfPdeError
from .field import SirenNet, forward, init_siren
from .geometry import AnalyticSurface, Surface
from .surfops import ExactNormals, NetNormals, NormalSource
from .validation import check_points


def resolve_normal_source(surface, normal_source):
    """Accept None (exact analytic), a NormalSource, a net or an estimator."""
    if normal_source is None:
        if isinstance(surface, AnalyticSurface):
            return ExactNormals(surface)
        raise SurfPdeError(
            "mesh surfaces need a trained normal field; pass normal_source"
        )
    if isinstance(normal_source, NormalSource):
        return normal_source
    if isinstance(normal_source, SirenNet):
        return NetNormals(normal_source)
    if isinstance(normal_source, NormalFieldModel):
        check_fitted(normal_source, "net_")
        return NetNormals(normal_source.net_)
    if isinstance(normal_source, AnalyticSurface):
        return ExactNormals(normal_source)
    raise SurfPdeError(f"cannot interpret normal source {normal_source!r}")


class NormalFieldModel(BaseEstimator):
    """Unit normal field fitted to a surface's sampled normals.

    target='surface' learns the surface normal field from interior samples;
    target='boundary' learns the outward boundary normal on the given loops.
    """

    def __init__(self, width=64, depth=5, omega0=30.0, lr=1e-4, iterations=20000,
                 batch_size=2048, seed=0, target="surface", boundary_labels="all",
                 plateau_patience=2000, log_every=200):
        self.width = width
        self.depth = depth
        self.omega0 = omega0
        self.lr = lr
        self.iterations = iterations
        self.batch_size = batch_size
        self.seed = seed
        self.target = target
        self.boundary_labels = boundary_labels
        self.plateau_patience = plateau_patience
        self.log_every = log_every

    def _init_net(self):
        return init_siren(
            width=self.width, depth=self.depth, out_dim=3, omega0=self.omega0,
            seed=self.seed, normalize_output=True,
        )

    def fit(self, surface: Surface, warm_start_net: SirenNet = None):
        if self.target not in ("surface", "boundary"):
            raise SurfPdeError("target must be 'surface' or 'boundary'")
        config = trainer.NormalTrainConfig(
            iterations=self.iterations, lr=self.lr, batch=self.batch_size,
            seed=self.seed, plateau_patience=self.plateau_patience,
            log_every=self.log_every,
        )
        net = warm_start_net if warm_start_net is not None else self._init_net()
        self.net_, self.history_ = trainer.train_normals(
            surface, config, net=net, target=self.target,
            labels=self.boundary_labels,
        )
        return self

    def fit_points(self, X, y):
        """Fit directly on (points, unit targets) arrays."""
        X = check_points(X)
        y = check_points(y, "y")
        if X.shape != y.shape:
            raise SurfPdeError("X and y must have matching shapes")

        class _ArraySampler:
            def __init__(self, X, y):
                self.X, self.y = X, y

            def sample_interior(self, count, rng):
                from .geometry import SampleSet

                idx = rng.integers(0, len(self.X), count)
                return SampleSet(positions=self.X[idx], normals=self.y[idx])

        config = trainer.NormalTrainConfig(
            iterations=self.iterations, lr=self.lr, batch=self.batch_size,
            seed=self.seed, plateau_patience=self.plateau_patience,
            log_every=self.log_every,
        )
        self.net_, self.history_ = trainer.train_normals(
            _ArraySampler(X, y), config, net=self._init_net(), target="surface"
        )
        return self

    def predict(self, X):
        check_fitted(self, "net_")
        return forward(self.net_, check_points(X))

    def angular_error_degrees(self, X, true_normals):
        """Per-point angle between predictions and references, in degrees."""
        check_fitted(self, "net_")
        pred = self.predict(X)
        t = check_points(true_normals, "true_normals")
        cosang = np.clip(np.einsum("nk,nk->n", pred, t), -1.0, 1.0)
        return np.degrees(np.arccos(cosang))


class PdeSolver(BaseEstimator):
    """Sine-network PDE solver: fit(surface, problem) then predict(points)."""

    def __init__(self, width=30, depth=3, omega0=30.0, activation="sine",
                 iterations=10000, lr=1e-3, interior_batch=1024,
                 boundary_batch=256, plateau_factor=0.5, plateau_patience=2000,
                 plateau_threshold=1e-3, min_lr=1e-6, seed=0, log_every=100,
                 normal_source=None, boundary_normal_source=None,
                 divergence_factor=1e6, debug_grad_check=False):
        self.width = width
        self.depth = depth
        self.omega0 = omega0
        self.activation = activation
        self.iterations = iterations
        self.lr = lr
        self.interior_batch = interior_batch
        self.boundary_batch = boundary_batch
        self.plateau_factor = plateau_factor
        self.plateau_patience = plateau_patience
        self.plateau_threshold = plateau_threshold
        self.min_lr = min_lr
        self.seed = seed
        self.log_every = log_every
        self.normal_source = normal_source
        self.boundary_normal_source = boundary_normal_source
        self.divergence_factor = divergence_factor
        self.debug_grad_check = debug_grad_check

    def _config(self):
        return trainer.TrainConfig(
            iterations=self.iterations, lr=self.lr,
            plateau_factor=self.plateau_factor,
            plateau_patience=self.plateau_patience,
            plateau_threshold=self.plateau_threshold, min_lr=self.min_lr,
            interior_batch=self.interior_batch,
            boundary_batch=self.boundary_batch, seed=self.seed,
            log_every=self.log_every, divergence_factor=self.divergence_factor,
            debug_grad_check=self.debug_grad_check,
        )

    def fit(self, surface: Surface, problem: trainer.PdeProblem,
            warm_start_net: SirenNet = None):
        source = resolve_normal_source(surface, self.normal_source)
        bns = self.boundary_normal_source
        if isinstance(bns, NormalFieldModel):
            check_fitted(bns, "net_")
            bns = bns.net_
        if warm_start_net is not None:
            net = warm_start_net
        else:
            net = init_siren(
                width=self.width, depth=self.depth, out_dim=1,
                omega0=self.omega0, seed=self.seed, activation=self.activation,
            )
        self.net_, self.history_ = trainer.train_pde(
            surface, problem, net, source, self._config(), boundary_normals=bns
        )
        self.problem_ = problem
        self.surface_ = surface
        self.normal_source_ = source
        return self

    def predict(self, X):
        check_fitted(self, "net_")
        return forward(self.net_, check_points(X))

    def predict_jets(self, X):
        """Solution jets (value/grad/hess) at points; used by the apps."""
        check_fitted(self, "net_")
        return autodiff.jet2_forward(self.net_, check_points(X))

    def residual(self, samples):
        """Pointwise PDE residual on a SampleSet (diagnostic)."""
        check_fitted(self, "net_")
        return np.sqrt(
            trainer.loss_pde(self.net_, self.normal_source_, self.problem_, samples)
        )
