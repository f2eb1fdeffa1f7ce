"""Empirical convergence analysis: error metric, log-log fit and sweeps.

A sweep trains one solution network per width (sharing the normal source),
measures the relative l2 error against ground truth on a fixed evaluation
set, then fits log(error) against log(#W) by ordinary least squares.  The
verdict is converged iff the slope m < -0.3 and the Pearson coefficient
r < -0.5.
"""

from __future__ import annotations

import csv
import json
import time
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import SurfPdeError, TrainingDivergedError
from .estimators import PdeSolver
from .field import init_siren, load_net, save_net
from .geometry import Surface
from .trainer import PdeProblem

SLOPE_THRESHOLD = -0.3
PEARSON_THRESHOLD = -0.5


def relative_l2(u_pred, u_gt, mean_free=False):
    """||u_pred - u_gt|| / ||u_gt||, optionally after removing each mean
    (solutions of pure-Neumann / closed problems are defined up to a
    constant)."""
    u_pred = np.asarray(u_pred, dtype=np.float64).ravel()
    u_gt = np.asarray(u_gt, dtype=np.float64).ravel()
    if u_pred.shape != u_gt.shape or u_pred.size == 0:
        raise SurfPdeError("prediction and ground truth must have equal length >= 1")
    if mean_free:
        u_pred = u_pred - u_pred.mean()
        u_gt = u_gt - u_gt.mean()
    denom = np.linalg.norm(u_gt)
    if denom == 0.0:
        raise SurfPdeError("ground truth has zero norm")
    return float(np.linalg.norm(u_pred - u_gt) / denom)


def fit_loglog(pairs):
    """Least-squares slope and Pearson coefficient of ln(e) vs ln(#W).

    Degenerate inputs (constant error) report r = 0, never a NaN.
    """
    pairs = [(float(w), float(e)) for w, e in pairs]
    if len(pairs) < 3:
        raise SurfPdeError("need at least 3 (num_weights, error) pairs")
    if any(w <= 0 or e <= 0 for w, e in pairs):
        raise SurfPdeError("weights and errors must be positive")
    x = np.log([w for w, _ in pairs])
    y = np.log([e for _, e in pairs])
    if np.ptp(x) == 0:
        raise SurfPdeError("zero variance in log #W")
    dx = x - x.mean()
    dy = y - y.mean()
    m = float(dx @ dy / (dx @ dx))
    sy = float(np.sqrt(dy @ dy))
    if sy == 0.0:
        return m, 0.0
    r = float(dx @ dy / (np.sqrt(dx @ dx) * sy))
    return m, r


@dataclass
class EvalSet:
    """Where and against what the solution is scored."""

    points: np.ndarray  # (N, 3)
    values: np.ndarray  # (N,)
    mean_free: bool = False


@dataclass
class SweepEntry:
    width: int
    depth: int
    num_weights: int
    rel_l2: float
    iterations: int
    seconds: float


@dataclass
class ConvergenceReport:
    entries: list = field(default_factory=list)
    slope: float = float("nan")
    pearson: float = float("nan")
    converged: bool = False
    floor_detected: bool = False
    surface: str = ""
    problem: str = ""
    seed: int = 0

    def finalize(self):
        if len(self.entries) < 3:
            raise SurfPdeError("sweep produced fewer than 3 usable entries")
        ws = [e.num_weights for e in self.entries]
        if any(b <= a for a, b in zip(ws, ws[1:])):
            raise SurfPdeError("#W must be strictly increasing across entries")
        self.slope, self.pearson = fit_loglog(
            [(e.num_weights, e.rel_l2) for e in self.entries]
        )
        self.floor_detected = self.pearson == 0.0
        self.converged = (
            self.slope < SLOPE_THRESHOLD and self.pearson < PEARSON_THRESHOLD
        )
        return self

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(
                ["width", "depth", "num_weights", "rel_l2", "iterations", "seconds"]
            )
            for e in self.entries:
                writer.writerow(
                    [e.width, e.depth, e.num_weights,
                     f"{e.rel_l2:.12e}", e.iterations, f"{e.seconds:.3f}"]
                )

    def verdict_dict(self):
        return {
            "m": self.slope,
            "r": self.pearson,
            "converged": bool(self.converged),
            "threshold_m": SLOPE_THRESHOLD,
            "threshold_r": PEARSON_THRESHOLD,
            "floor_detected": bool(self.floor_detected),
            "surface": self.surface,
            "problem": self.problem,
            "seed": self.seed,
        }

    def write_verdict(self, path):
        with open(path, "w") as fh:
            json.dump(self.verdict_dict(), fh, indent=2)
            fh.write("\n")


def derived_seed(seed, width):
    """Per-width seed: global seed XOR width."""
    return int(seed) ^ int(width)


def run_sweep(surface: Surface, problem: PdeProblem, eval_set: EvalSet,
              widths, depth=3, solver_params=None, seed=0,
              checkpoint_dir=None, verbose=False):
    """Train one net per width and assemble the convergence report.

    ``solver_params`` are forwarded to PdeSolver (iterations, batches, ...).
    With ``checkpoint_dir`` set, finished widths are skipped on rerun.
    """
    widths = [int(w) for w in widths]
    if len(widths) < 3:
        raise SurfPdeError("sweep needs at least 3 widths")
    if any(b <= a for a, b in zip(widths, widths[1:])):
        raise SurfPdeError("widths must be strictly increasing")
    params = dict(solver_params or {})
    report = ConvergenceReport(
        surface=surface.kind, problem=problem.operator, seed=seed
    )
    for width in widths:
        entry_seed = derived_seed(seed, width)
        ckpt = None
        if checkpoint_dir is not None:
            import os

            os.makedirs(checkpoint_dir, exist_ok=True)
            ckpt = os.path.join(checkpoint_dir, f"width{width:04d}")
        net = None
        elapsed = 0.0
        iterations = int(params.get("iterations", 10000))
        if ckpt is not None and _checkpoint_ready(ckpt):
            net = load_net(ckpt + ".spnet")
            meta = json.load(open(ckpt + ".entry.json"))
            elapsed = meta["seconds"]
            iterations = meta["iterations"]
        else:
            solver = PdeSolver(width=width, depth=depth, seed=entry_seed, **params)
            t0 = time.perf_counter()
            try:
                solver.fit(surface, problem)
            except TrainingDivergedError as exc:
                warnings.warn(f"width {width} diverged and is excluded: {exc}")
                continue
            elapsed = time.perf_counter() - t0
            net = solver.net_
            if ckpt is not None:
                save_net(net, ckpt + ".spnet")
                with open(ckpt + ".entry.json", "w") as fh:
                    json.dump(
                        {"width": width, "seconds": elapsed,
                         "iterations": iterations}, fh,
                    )
        from .field import forward

        pred = forward(net, eval_set.points)
        err = relative_l2(pred, eval_set.values, mean_free=eval_set.mean_free)
        report.entries.append(
            SweepEntry(
                width=width, depth=depth, num_weights=net.num_weights,
                rel_l2=err, iterations=iterations, seconds=elapsed,
            )
        )
        if verbose:
            print(f"width {width}: #W={net.num_weights} rel_l2={err:.4e} "
                  f"({elapsed:.0f}s)")
    return report.finalize()


def _checkpoint_ready(ckpt):
    import os

    return os.path.exists(ckpt + ".spnet") and os.path.exists(ckpt + ".entry.json")


def matched_depth_for_weights(target_weights, width, out_dim=1, in_dim=3):
    """Depth whose #W at the given width comes closest to the target."""
    best = None
    for depth in range(1, 40):
        n = init_siren(width=width, depth=depth, out_dim=out_dim).num_weights
        gap = abs(n - target_weights)
        if best is None or gap < best[0]:
            best = (gap, depth, n)
    return best[1], best[2]
