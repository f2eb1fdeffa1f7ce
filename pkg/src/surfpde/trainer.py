"""Loss assembly, optimizer, scheduler and the training loops.

The PDE, Dirichlet and Neumann losses are batch means of squared residuals;
the boundary terms enter the total scaled by the problem's lambda_bc.  The
normal-field loss is the sum of (1 - predicted . target)^2 over the batch
(its per-point mean is logged alongside).  Parameter gradients come from the
jet engine: each loss computes its own adjoint seeds analytically and hands
them to the reverse sweep.
"""

from __future__ import annotations

import time
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from . import autodiff, surfops
from .errors import NonFiniteLossError, SurfPdeError, TrainingDivergedError
from .field import SirenNet, init_siren
from .geometry import SampleSet, Surface
from .validation import check_rng

OPERATORS = ("poisson", "helmholtz", "screened")


def constant_source(value):
    def fn(samples):
        return np.full(len(samples), float(value))

    return fn


def from_xyz(fn):
    """Adapt a plain f(X[N,3]) -> values callable to the SampleSet protocol."""

    def wrapped(samples):
        return np.asarray(fn(samples.positions), dtype=np.float64)

    return wrapped


@dataclass
class PdeProblem:
    """Operator kind plus data closures; closures take a SampleSet."""

    operator: str = "poisson"
    f: callable = None
    g: callable = None
    h: callable = None
    k: float = 0.0
    tau: float = None
    u_prev: callable = None
    lambda_bc: float = 100.0
    dirichlet_labels: tuple = ()
    neumann_labels: tuple = ()

    def __post_init__(self):
        if self.operator not in OPERATORS:
            raise SurfPdeError(f"unknown operator {self.operator!r}")
        if self.operator == "helmholtz" and not self.k > 0:
            raise SurfPdeError("helmholtz problem requires wavenumber k > 0")
        if self.operator == "screened":
            if self.tau is None or not self.tau > 0:
                raise SurfPdeError("screened poisson requires time step tau > 0")
            if self.u_prev is None:
                raise SurfPdeError("screened poisson requires the previous field")
        if self.lambda_bc < 0:
            raise SurfPdeError("lambda_bc must be nonnegative")
        if self.f is None:
            self.f = constant_source(0.0)

    @property
    def linear_coefficient(self):
        """kappa in residual = LB(u) + kappa*u - F."""
        if self.operator == "helmholtz":
            return self.k**2
        if self.operator == "screened":
            return -1.0 / self.tau
        return 0.0

    def source_values(self, samples):
        if self.operator == "screened":
            return -np.asarray(self.u_prev(samples), dtype=np.float64) / self.tau
        return np.asarray(self.f(samples), dtype=np.float64)

    @property
    def mean_free(self):
        """Poisson with no Dirichlet pinning is only determined up to a constant."""
        return self.operator == "poisson" and len(self.dirichlet_labels) == 0


# ---------------------------------------------------------------------------
# Losses (value + parameter gradient)
# ---------------------------------------------------------------------------


def _guard_finite(value, *arrays):
    if not np.isfinite(value):
        idx = autodiff.first_nonfinite_row(*arrays)
        raise NonFiniteLossError(
            f"non-finite loss (first bad sample: {idx})", sample_index=idx
        )


def loss_pde_grad(u_net, normal_source, problem, samples: SampleSet):
    """Mean squared PDE residual over an interior batch and its gradient."""
    X = samples.positions
    N = X.shape[0]
    n, Jn = normal_source.normal_jet(X)
    jets = autodiff.jet2_forward(u_net, X)
    A, b = surfops.lb_coefficients(n, Jn)
    lb = np.einsum("nkm,nkm->n", A, jets.hess) + np.einsum("nk,nk->n", b, jets.grad)
    kappa = problem.linear_coefficient
    r = lb + kappa * jets.value - problem.source_values(samples)
    loss = float(np.mean(r**2))
    _guard_finite(loss, jets.value, jets.grad, jets.hess, r)
    rbar = 2.0 * r / N
    bar_v = kappa * rbar
    bar_g = rbar[:, None] * b
    bar_H = rbar[:, None, None] * A
    grad = autodiff.jet2_backward(u_net, jets, bar_v, bar_g, bar_H)
    return loss, grad


def loss_pde(u_net, normal_source, problem, samples: SampleSet):
    return loss_pde_grad(u_net, normal_source, problem, samples)[0]


def loss_dirichlet_grad(u_net, problem, samples: SampleSet):
    """Mean squared Dirichlet mismatch (u - g)^2 on a boundary batch."""
    N = len(samples)
    vals, cache = autodiff.value_forward(u_net, samples.positions)
    u = vals[:, 0]
    g = (
        np.zeros(N)
        if problem.g is None
        else np.asarray(problem.g(samples), dtype=np.float64)
    )
    r = u - g
    loss = float(np.mean(r**2))
    _guard_finite(loss, u, r)
    grad = autodiff.value_backward(u_net, cache, (2.0 * r / N)[:, None])
    return loss, grad


def loss_neumann_grad(u_net, normal_source, problem, samples: SampleSet,
                      boundary_normals=None):
    """Mean squared Neumann mismatch (grad_surface u . nu - h)^2."""
    if samples.nu is None and boundary_normals is None:
        raise SurfPdeError("Neumann loss needs boundary normals")
    X = samples.positions
    N = X.shape[0]
    n, _ = normal_source.normal_jet(X)
    if boundary_normals is not None:
        nu = boundary_normals.predict(X) if hasattr(boundary_normals, "predict") \
            else autodiff.value_forward(boundary_normals, X)[0]
    else:
        nu = samples.nu
    jets = autodiff.jet2_forward(u_net, X)
    # grad_surface u . nu = grad . (nu - (nu.n) n)
    t = nu - np.einsum("nk,nk->n", nu, n)[:, None] * n
    dn = np.einsum("nk,nk->n", jets.grad, t)
    h = (
        np.zeros(N)
        if problem.h is None
        else np.asarray(problem.h(samples), dtype=np.float64)
    )
    r = dn - h
    loss = float(np.mean(r**2))
    _guard_finite(loss, jets.grad, r)
    bar_g = (2.0 * r / N)[:, None] * t
    grad = autodiff.jet2_backward(
        u_net, jets, np.zeros(N), bar_g, np.zeros((N, 3, 3))
    )
    return loss, grad


def loss_bc_grad(u_net, normal_source, problem, dirichlet_samples=None,
                 neumann_samples=None, boundary_normals=None):
    """Combined boundary loss: Dirichlet mean + Neumann mean."""
    loss = 0.0
    grad = np.zeros(u_net.num_weights)
    if dirichlet_samples is not None and len(dirichlet_samples):
        l, g = loss_dirichlet_grad(u_net, problem, dirichlet_samples)
        loss += l
        grad += g
    if neumann_samples is not None and len(neumann_samples):
        l, g = loss_neumann_grad(
            u_net, normal_source, problem, neumann_samples, boundary_normals
        )
        loss += l
        grad += g
    return loss, grad


def loss_bc(u_net, normal_source, problem, dirichlet_samples=None,
            neumann_samples=None, boundary_normals=None):
    return loss_bc_grad(
        u_net, normal_source, problem, dirichlet_samples, neumann_samples,
        boundary_normals,
    )[0]


def loss_normals_grad(net, samples: SampleSet, targets=None):
    """Sum over the batch of (1 - n_pred . n_target)^2, plus gradient.

    Returns (loss_sum, mean_per_point, gradient).
    """
    if targets is None:
        targets = samples.nu if samples.on_boundary else samples.normals
    t = np.asarray(targets, dtype=np.float64)
    y, cache = autodiff.value_forward(net, samples.positions)
    align = np.einsum("nk,nk->n", y, t)
    r = 1.0 - align
    loss = float(np.sum(r**2))
    _guard_finite(loss, y, r)
    bar_y = -2.0 * r[:, None] * t
    grad = autodiff.value_backward(net, cache, bar_y)
    return loss, loss / len(samples), grad


def loss_normals(net, samples: SampleSet, targets=None):
    return loss_normals_grad(net, samples, targets)[0]


# ---------------------------------------------------------------------------
# Optimizer and scheduler
# ---------------------------------------------------------------------------


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def init(cls, n_params, beta1=0.9, beta2=0.999, eps=1e-8):
        return cls(
            m=np.zeros(n_params), v=np.zeros(n_params),
            beta1=beta1, beta2=beta2, eps=eps,
        )


def adam_step(params, grad, state: AdamState, lr):
    """One bias-corrected Adam update; returns (new_params, state)."""
    state.t += 1
    state.m = state.beta1 * state.m + (1 - state.beta1) * grad
    state.v = state.beta2 * state.v + (1 - state.beta2) * grad * grad
    m_hat = state.m / (1 - state.beta1**state.t)
    v_hat = state.v / (1 - state.beta2**state.t)
    return params - lr * m_hat / (np.sqrt(v_hat) + state.eps), state


class PlateauScheduler:
    """Halve the learning rate when the smoothed loss stops improving."""

    def __init__(self, lr=1e-3, factor=0.5, patience=2000, threshold=1e-3,
                 min_lr=1e-6, window=100):
        self.lr = float(lr)
        self.factor = factor
        self.patience = patience
        self.threshold = threshold
        self.min_lr = min_lr
        self._window = deque(maxlen=window)
        self._best = np.inf
        self._bad = 0

    def step(self, loss) -> float:
        self._window.append(float(loss))
        smoothed = sum(self._window) / len(self._window)
        if smoothed < self._best * (1.0 - self.threshold):
            self._best = smoothed
            self._bad = 0
        else:
            self._bad += 1
            if self._bad > self.patience:
                self.lr = max(self.lr * self.factor, self.min_lr)
                self._bad = 0
        return self.lr


# ---------------------------------------------------------------------------
# Training loops
# ---------------------------------------------------------------------------


@dataclass
class TrainConfig:
    iterations: int = 10000
    lr: float = 1e-3
    plateau_factor: float = 0.5
    plateau_patience: int = 2000
    plateau_threshold: float = 1e-3
    min_lr: float = 1e-6
    interior_batch: int = 1024
    boundary_batch: int = 256
    seed: int = 0
    log_every: int = 100
    divergence_factor: float = 1e6
    debug_grad_check: bool = False

    def __post_init__(self):
        if self.iterations < 1 or self.interior_batch < 1 or self.boundary_batch < 1:
            raise SurfPdeError("iteration budget and batch sizes must be >= 1")


@dataclass
class TrainHistory:
    iterations: list = field(default_factory=list)
    total: list = field(default_factory=list)
    pde: list = field(default_factory=list)
    bc: list = field(default_factory=list)
    lr: list = field(default_factory=list)
    seconds: list = field(default_factory=list)

    def log(self, iteration, total, pde, bc, lr, seconds):
        if self.iterations and iteration <= self.iterations[-1]:
            raise SurfPdeError("history iterations must strictly increase")
        self.iterations.append(iteration)
        self.total.append(total)
        self.pde.append(pde)
        self.bc.append(bc)
        self.lr.append(lr)
        self.seconds.append(seconds)

    def to_rows(self):
        return list(
            zip(self.iterations, self.total, self.pde, self.bc, self.lr, self.seconds)
        )


def _fd_direction_check(loss_grad_fn, net, theta, rng, n_dirs=3, step=1e-5, tol=1e-3):
    """Cheap directional finite-difference audit of the assembled gradient."""
    _, g = loss_grad_fn(net.with_params(theta))
    for _ in range(n_dirs):
        v = rng.standard_normal(theta.size)
        v /= np.linalg.norm(v)
        lp, _ = loss_grad_fn(net.with_params(theta + step * v))
        lm, _ = loss_grad_fn(net.with_params(theta - step * v))
        fd = (lp - lm) / (2 * step)
        an = float(g @ v)
        denom = max(abs(fd), abs(an), 1e-10)
        if abs(fd - an) / denom > tol:
            raise SurfPdeError(
                f"gradient self-test failed: fd={fd:.6e} analytic={an:.6e}"
            )


def train_pde(surface: Surface, problem: PdeProblem, net: SirenNet,
              normal_source, config: TrainConfig, boundary_normals=None,
              callback=None):
    """Soft-constraint PDE training; returns (trained net, history)."""
    rng = check_rng(config.seed)
    theta = net.params.copy()
    adam = AdamState.init(theta.size)
    sched = PlateauScheduler(
        lr=config.lr, factor=config.plateau_factor,
        patience=config.plateau_patience, threshold=config.plateau_threshold,
        min_lr=config.min_lr,
    )
    history = TrainHistory()
    has_dirichlet = bool(problem.dirichlet_labels)
    has_neumann = bool(problem.neumann_labels)

    def total_loss_grad(cur, interior, bd, bn):
        lp, gp = loss_pde_grad(cur, normal_source, problem, interior)
        lb_, gb = 0.0, 0.0
        if bd is not None or bn is not None:
            lb_, gb = loss_bc_grad(
                cur, normal_source, problem, bd, bn, boundary_normals
            )
        total = lp + problem.lambda_bc * lb_
        grad = gp + problem.lambda_bc * gb if np.ndim(gb) else gp
        return total, grad, lp, lb_

    if config.debug_grad_check:
        interior = surface.sample_interior(config.interior_batch, rng)
        bd = (
            surface.sample_boundary(problem.dirichlet_labels, config.boundary_batch, rng)
            if has_dirichlet else None
        )
        bn = (
            surface.sample_boundary(problem.neumann_labels, config.boundary_batch, rng)
            if has_neumann else None
        )
        _fd_direction_check(
            lambda cur: total_loss_grad(cur, interior, bd, bn)[:2],
            net, theta, rng,
        )

    initial_total = None
    lr = config.lr
    t0 = time.perf_counter()
    for it in range(1, config.iterations + 1):
        interior = surface.sample_interior(config.interior_batch, rng)
        bd = (
            surface.sample_boundary(problem.dirichlet_labels, config.boundary_batch, rng)
            if has_dirichlet else None
        )
        bn = (
            surface.sample_boundary(problem.neumann_labels, config.boundary_batch, rng)
            if has_neumann else None
        )
        cur = net.with_params(theta)
        total, grad, lp, lb_ = total_loss_grad(cur, interior, bd, bn)
        if initial_total is None:
            initial_total = max(total, 1e-30)
        if total > config.divergence_factor * initial_total:
            raise TrainingDivergedError(
                f"loss diverged at iteration {it}: {total:.3e} "
                f"(initial {initial_total:.3e}, pde {lp:.3e}, bc {lb_:.3e})"
            )
        theta, adam = adam_step(theta, grad, adam, lr)
        lr = sched.step(total)
        if it % config.log_every == 0 or it == config.iterations:
            history.log(it, total, lp, lb_, lr, time.perf_counter() - t0)
            if callback is not None:
                callback(it, total, net.with_params(theta))
    return net.with_params(theta), history


@dataclass
class NormalTrainConfig:
    iterations: int = 20000
    lr: float = 1e-4
    plateau_factor: float = 0.5
    plateau_patience: int = 2000
    plateau_threshold: float = 1e-3
    min_lr: float = 1e-7
    batch: int = 2048
    seed: int = 0
    log_every: int = 200


def train_normals(surface: Surface, config: NormalTrainConfig = None,
                  net: SirenNet = None, target="surface", labels="all"):
    """Fit a unit-output net to the surface (or boundary) normal field."""
    config = config or NormalTrainConfig()
    rng = check_rng(config.seed)
    if net is None:
        net = init_siren(
            width=64, depth=5, out_dim=3, omega0=30.0,
            seed=int(rng.integers(2**31)), normalize_output=True,
        )
    if not net.normalize_output:
        raise SurfPdeError("normal net must normalize its output")
    theta = net.params.copy()
    adam = AdamState.init(theta.size)
    sched = PlateauScheduler(
        lr=config.lr, factor=config.plateau_factor,
        patience=config.plateau_patience, threshold=config.plateau_threshold,
        min_lr=config.min_lr,
    )
    history = TrainHistory()
    lr = config.lr
    t0 = time.perf_counter()
    for it in range(1, config.iterations + 1):
        if target == "surface":
            samples = surface.sample_interior(config.batch, rng)
        else:
            samples = surface.sample_boundary(labels, config.batch, rng)
        cur = net.with_params(theta)
        loss_sum, loss_mean, grad = loss_normals_grad(cur, samples)
        theta, adam = adam_step(theta, grad, adam, lr)
        lr = sched.step(loss_mean)
        if it % config.log_every == 0 or it == config.iterations:
            history.log(it, loss_sum, loss_mean, 0.0, lr, time.perf_counter() - t0)
    return net.with_params(theta), history
