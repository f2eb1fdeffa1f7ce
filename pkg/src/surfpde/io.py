"""Output plumbing: PLY meshes with per-vertex scalars, CSV logs, manifests."""

from __future__ import annotations

import csv
import hashlib
import json
import os
import sys
import time

import numpy as np

from .errors import SurfPdeError


def write_ply(path, vertices, faces=None, scalar=None, scalar_name="value"):
    """ASCII PLY with an optional per-vertex scalar attribute."""
    vertices = np.asarray(vertices, dtype=np.float64)
    if scalar is not None:
        scalar = np.asarray(scalar, dtype=np.float64)
        if scalar.shape[0] != vertices.shape[0]:
            raise SurfPdeError("scalar attribute length must match vertex count")
    with open(path, "w") as fh:
        fh.write("ply\nformat ascii 1.0\n")
        fh.write(f"element vertex {len(vertices)}\n")
        fh.write("property float x\nproperty float y\nproperty float z\n")
        if scalar is not None:
            fh.write(f"property float {scalar_name}\n")
        if faces is not None:
            fh.write(f"element face {len(faces)}\n")
            fh.write("property list uchar int vertex_indices\n")
        fh.write("end_header\n")
        for i, v in enumerate(vertices):
            row = f"{v[0]:.9g} {v[1]:.9g} {v[2]:.9g}"
            if scalar is not None:
                row += f" {scalar[i]:.9g}"
            fh.write(row + "\n")
        if faces is not None:
            for f in faces:
                fh.write(f"3 {f[0]} {f[1]} {f[2]}\n")


def write_history_csv(path, history):
    """Training history: iteration, losses, learning rate, wall seconds."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["iteration", "total_loss", "pde_loss", "bc_loss", "lr", "seconds"]
        )
        for it, total, pde, bc, lr, sec in history.to_rows():
            writer.writerow(
                [it, f"{total:.12e}", f"{pde:.12e}", f"{bc:.12e}",
                 f"{lr:.6e}", f"{sec:.3f}"]
            )


def config_hash(config: dict) -> str:
    """Stable hash of a resolved configuration dictionary."""
    canon = json.dumps(config, sort_keys=True, default=str)
    return hashlib.sha256(canon.encode()).hexdigest()[:16]


def write_manifest(path, config: dict, seed, timings=None, extra=None):
    """Run manifest: resolved config, its hash, seed, versions, timings.

    Timing fields are excluded from the reproducibility contract.
    """
    manifest = {
        "config": config,
        "config_hash": config_hash(config),
        "seed": int(seed),
        "versions": {
            "python": sys.version.split()[0],
            "numpy": np.__version__,
            "surfpde": _package_version(),
        },
        "timings": timings or {},
    }
    if extra:
        manifest.update(extra)
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=2, default=str)
        fh.write("\n")
    return manifest


def _package_version():
    from . import __version__

    return __version__


class RunDirectory:
    """Output directory for one command invocation."""

    def __init__(self, path, config: dict, seed):
        self.path = str(path)
        os.makedirs(self.path, exist_ok=True)
        self.config = config
        self.seed = seed
        self._t0 = time.perf_counter()
        self.timings = {}

    def file(self, name):
        return os.path.join(self.path, name)

    def mark(self, label):
        self.timings[label] = round(time.perf_counter() - self._t0, 3)

    def finalize(self, extra=None):
        self.mark("total_seconds")
        return write_manifest(
            self.file("manifest.json"), self.config, self.seed,
            timings=self.timings, extra=extra,
        )
