"""Sine-activated coordinate networks and their (de)serialization.

A net maps R^3 -> R^out_dim through ``depth`` sine layers followed by an
affine output layer.  The first layer frequency omega0 multiplies its
pre-activation; deeper sine layers are plain ``sin(Wh + b)``.  A net with
``normalize_output`` divides the final 3-vector by its Euclidean norm,
which is how the normal fields guarantee unit normals.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import CheckpointError, DegenerateNormalError, DimensionMismatchError
from .validation import check_points

ACTIVATIONS = ("sine", "tanh", "sigmoid")

_MAGIC = b"SPDENET1"
_NORM_EPS = 1e-12


@dataclass(frozen=True)
class SirenNet:
    """Immutable network: architecture plus a flat float64 parameter vector."""

    width: int
    depth: int
    out_dim: int = 1
    in_dim: int = 3
    omega0: float = 30.0
    normalize_output: bool = False
    activation: str = "sine"
    seed: int = 0
    params: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        if self.width < 1 or self.depth < 1 or self.out_dim not in (1, 3):
            raise DimensionMismatchError(
                f"invalid architecture width={self.width} depth={self.depth} "
                f"out_dim={self.out_dim}"
            )
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        if self.normalize_output and self.out_dim != 3:
            raise DimensionMismatchError("normalize_output requires out_dim == 3")
        if self.params is not None and self.params.shape != (self.num_weights,):
            raise DimensionMismatchError(
                f"parameter vector has length {self.params.shape}, "
                f"architecture needs {self.num_weights}"
            )

    @property
    def layer_dims(self) -> list[tuple[int, int]]:
        """(fan_in, fan_out) per weight layer, output layer last."""
        dims = [self.in_dim] + [self.width] * self.depth + [self.out_dim]
        return list(zip(dims[:-1], dims[1:]))

    @property
    def num_weights(self) -> int:
        """#W: count of tunable weights plus biases."""
        return sum(fi * fo + fo for fi, fo in self.layer_dims)

    def layers(self, params=None):
        """Views (W, b) into the flat parameter vector, no copies."""
        theta = self.params if params is None else params
        out = []
        offset = 0
        for fan_in, fan_out in self.layer_dims:
            W = theta[offset : offset + fan_in * fan_out].reshape(fan_out, fan_in)
            offset += fan_in * fan_out
            b = theta[offset : offset + fan_out]
            offset += fan_out
            out.append((W, b))
        return out

    def with_params(self, params: np.ndarray) -> "SirenNet":
        params = np.ascontiguousarray(params, dtype=np.float64)
        return replace(self, params=params)


def _layer_frequency(net: SirenNet, layer_index: int) -> float:
    return net.omega0 if layer_index == 0 else 1.0


def init_siren(
    width: int,
    depth: int,
    out_dim: int = 1,
    omega0: float = 30.0,
    seed: int = 0,
    normalize_output: bool = False,
    activation: str = "sine",
    in_dim: int = 3,
) -> SirenNet:
    """Deterministic initialization.

    First layer uniform in [-1/in_dim, 1/in_dim] (the omega0 scaling happens
    at activation time); deeper layers uniform in +-sqrt(6/fan_in)/omega0.
    Non-sine activations fall back to Xavier uniform.
    """
    net = SirenNet(
        width=width,
        depth=depth,
        out_dim=out_dim,
        in_dim=in_dim,
        omega0=omega0,
        normalize_output=normalize_output,
        activation=activation,
        seed=seed,
    )
    rng = np.random.default_rng(seed)
    chunks = []
    for i, (fan_in, fan_out) in enumerate(net.layer_dims):
        if activation == "sine":
            bound = 1.0 / fan_in if i == 0 else np.sqrt(6.0 / fan_in) / omega0
        else:
            bound = np.sqrt(6.0 / (fan_in + fan_out))
        chunks.append(rng.uniform(-bound, bound, size=fan_in * fan_out))
        chunks.append(rng.uniform(-bound, bound, size=fan_out))
    return net.with_params(np.concatenate(chunks))


def _activate(net: SirenNet, z: np.ndarray, layer_index: int) -> np.ndarray:
    if net.activation == "sine":
        return np.sin(_layer_frequency(net, layer_index) * z)
    if net.activation == "tanh":
        return np.tanh(z)
    return 1.0 / (1.0 + np.exp(-z))


def normalize_rows(v: np.ndarray) -> np.ndarray:
    """Unit-normalize each row, refusing degenerate vectors."""
    norms = np.linalg.norm(v, axis=-1, keepdims=True)
    if np.any(norms < _NORM_EPS):
        idx = int(np.argmax(norms.ravel() < _NORM_EPS))
        raise DegenerateNormalError(
            f"cannot unit-normalize near-zero output (sample {idx}, "
            f"norm {float(norms.ravel()[idx]):.3e})"
        )
    return v / norms


def forward(net: SirenNet, x) -> np.ndarray:
    """Evaluate the network. Accepts a single point or an (N, 3) batch."""
    single = np.asarray(x, dtype=np.float64).ndim == 1
    X = check_points(x)
    if X.shape[1] != net.in_dim:
        raise DimensionMismatchError(
            f"net expects {net.in_dim}-D input, got {X.shape[1]}-D"
        )
    h = X
    layers = net.layers()
    for i, (W, b) in enumerate(layers[:-1]):
        h = _activate(net, h @ W.T + b, i)
    W, b = layers[-1]
    y = h @ W.T + b
    if net.normalize_output:
        y = normalize_rows(y)
    if net.out_dim == 1:
        y = y[:, 0]
    return y[0] if single else y


_ACT_CODE = {name: i for i, name in enumerate(ACTIVATIONS)}
_ACT_NAME = {i: name for name, i in _ACT_CODE.items()}

# header: magic(8) in_dim width depth out_dim flags act(u32 x6) omega0(f64)
# seed(i64) count(u64); then count little-endian float64 parameters
_HEADER = struct.Struct("<8s6Id q Q")


def save_net(net: SirenNet, path) -> None:
    """Write the self-describing binary checkpoint plus a JSON sidecar."""
    path = str(path)
    if net.params is None:
        raise CheckpointError("net has no parameters to save")
    header = _HEADER.pack(
        _MAGIC,
        net.in_dim,
        net.width,
        net.depth,
        net.out_dim,
        int(net.normalize_output),
        _ACT_CODE[net.activation],
        float(net.omega0),
        int(net.seed),
        net.num_weights,
    )
    payload = np.ascontiguousarray(net.params, dtype="<f8").tobytes()
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(payload)
    manifest = {
        "format": _MAGIC.decode(),
        "in_dim": net.in_dim,
        "width": net.width,
        "depth": net.depth,
        "out_dim": net.out_dim,
        "normalize_output": bool(net.normalize_output),
        "activation": net.activation,
        "omega0": float(net.omega0),
        "seed": int(net.seed),
        "num_weights": int(net.num_weights),
    }
    with open(path + ".json", "w") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")


def load_net(path) -> SirenNet:
    path = str(path)
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _HEADER.size:
        raise CheckpointError(f"{path}: truncated header")
    (magic, in_dim, width, depth, out_dim, norm_flag, act_code, omega0, seed, count) = (
        _HEADER.unpack_from(raw)
    )
    if magic != _MAGIC:
        raise CheckpointError(f"{path}: bad magic {magic!r} (version mismatch?)")
    if act_code not in _ACT_NAME:
        raise CheckpointError(f"{path}: unknown activation code {act_code}")
    net = SirenNet(
        width=width,
        depth=depth,
        out_dim=out_dim,
        in_dim=in_dim,
        omega0=omega0,
        normalize_output=bool(norm_flag),
        activation=_ACT_NAME[act_code],
        seed=seed,
    )
    if count != net.num_weights:
        raise CheckpointError(
            f"{path}: declared #W={count} does not match architecture "
            f"#W={net.num_weights}"
        )
    body = raw[_HEADER.size :]
    if len(body) != 8 * count:
        raise CheckpointError(
            f"{path}: expected {8 * count} parameter bytes, found {len(body)}"
        )
    params = np.frombuffer(body, dtype="<f8").astype(np.float64)
    return net.with_params(params)
