import numpy as np
import pytest

from surfpde.errors import (
    CheckpointError,
    DegenerateNormalError,
    DimensionMismatchError,
)
from surfpde.field import SirenNet, forward, init_siren, load_net, save_net


class TestArchitecture:
    def test_weight_count_width30_depth3(self):
        net = init_siren(width=30, depth=3, out_dim=1, seed=0)
        assert net.num_weights == (3 * 30 + 30) + 2 * (30 * 30 + 30) + (30 * 1 + 1)
        assert net.num_weights == 2011

    def test_weight_count_width64_depth5_vec(self):
        net = init_siren(width=64, depth=5, out_dim=3, seed=0)
        assert net.num_weights == (3 * 64 + 64) + 4 * (64 * 64 + 64) + (64 * 3 + 3)
        assert net.num_weights == 17091

    def test_same_seed_bit_identical(self):
        a = init_siren(width=16, depth=2, seed=42)
        b = init_siren(width=16, depth=2, seed=42)
        assert np.array_equal(a.params, b.params)

    def test_different_seed_differs(self):
        a = init_siren(width=16, depth=2, seed=1)
        b = init_siren(width=16, depth=2, seed=2)
        assert not np.array_equal(a.params, b.params)

    def test_init_ranges(self):
        net = init_siren(width=32, depth=3, omega0=30.0, seed=7)
        layers = net.layers()
        W1, _ = layers[0]
        assert np.abs(W1).max() <= 1.0 / 3.0
        for W, _ in layers[1:]:
            assert np.abs(W).max() <= np.sqrt(6.0 / W.shape[1]) / 30.0

    def test_invalid_dimensions(self):
        with pytest.raises(DimensionMismatchError):
            init_siren(width=0, depth=1)
        with pytest.raises(DimensionMismatchError):
            init_siren(width=4, depth=0)
        with pytest.raises(DimensionMismatchError):
            init_siren(width=4, depth=1, out_dim=2)

    def test_normalize_requires_vector_output(self):
        with pytest.raises(DimensionMismatchError):
            SirenNet(width=4, depth=1, out_dim=1, normalize_output=True)


class TestForward:
    def test_zero_parameters(self):
        net = init_siren(width=8, depth=2, seed=0)
        net = net.with_params(np.zeros_like(net.params))
        assert forward(net, [0.5, -0.5, 0.0]) == 0.0

    def test_zero_parameters_normalized_degenerate(self):
        net = init_siren(width=8, depth=2, out_dim=3, seed=0, normalize_output=True)
        net = net.with_params(np.zeros_like(net.params))
        with pytest.raises(DegenerateNormalError):
            forward(net, [0.1, 0.2, 0.3])

    def test_single_unit_closed_form(self):
        # one hidden unit wired so u(x) = sin(omega0 * x1)
        omega0 = 4.0
        net = SirenNet(width=1, depth=1, out_dim=1, omega0=omega0)
        params = np.zeros(net.num_weights)
        params[0] = 1.0  # W1 = [1, 0, 0]
        params[4] = 1.0  # output weight
        net = net.with_params(params)
        x = np.array([np.pi / (2 * omega0), 0.0, 0.0])
        assert abs(forward(net, x) - 1.0) < 1e-15

    def test_unit_normalization_invariant(self, rng):
        net = init_siren(
            width=16, depth=3, out_dim=3, seed=3, normalize_output=True
        )
        X = rng.uniform(-1, 1, (1000, 3))
        out = forward(net, X)
        assert np.max(np.abs(np.linalg.norm(out, axis=1) - 1.0)) < 1e-12

    def test_batch_matches_single(self, rng):
        # batched GEMMs may route through different BLAS kernels, so the
        # agreement contract is near-exact rather than bitwise
        net = init_siren(width=10, depth=2, seed=11)
        X = rng.uniform(-1, 1, (5, 3))
        batch = forward(net, X)
        singles = np.array([forward(net, x) for x in X])
        assert np.allclose(batch, singles, rtol=1e-14, atol=1e-15)

    def test_input_dimension_check(self):
        net = init_siren(width=4, depth=1, seed=0)
        with pytest.raises(DimensionMismatchError):
            forward(net, [[0.0, 1.0]])


class TestCheckpointRoundTrip:
    def test_round_trip_bit_exact(self, tmp_path):
        net = init_siren(
            width=12, depth=2, out_dim=3, omega0=17.5, seed=9,
            normalize_output=True,
        )
        path = tmp_path / "net.spnet"
        save_net(net, path)
        loaded = load_net(path)
        assert np.array_equal(loaded.params, net.params)
        assert loaded.width == net.width
        assert loaded.depth == net.depth
        assert loaded.omega0 == net.omega0
        assert loaded.seed == net.seed
        assert loaded.normalize_output == net.normalize_output
        assert loaded.activation == net.activation

    def test_truncated_file_rejected(self, tmp_path):
        net = init_siren(width=8, depth=1, seed=0)
        path = tmp_path / "net.spnet"
        save_net(net, path)
        raw = path.read_bytes()
        path.write_bytes(raw[: len(raw) - 16])
        with pytest.raises(CheckpointError):
            load_net(path)

    def test_bad_magic_rejected(self, tmp_path):
        net = init_siren(width=8, depth=1, seed=0)
        path = tmp_path / "net.spnet"
        save_net(net, path)
        raw = bytearray(path.read_bytes())
        raw[:8] = b"NOTANETX"
        path.write_bytes(bytes(raw))
        with pytest.raises(CheckpointError):
            load_net(path)

    def test_mismatched_count_rejected(self, tmp_path):
        import struct

        net = init_siren(width=8, depth=1, seed=0)
        path = tmp_path / "net.spnet"
        save_net(net, path)
        raw = bytearray(path.read_bytes())
        # corrupt the declared parameter count (last u64 of the header)
        struct.pack_into("<Q", raw, struct.calcsize("<8s6Id q"), 99999)
        path.write_bytes(bytes(raw))
        with pytest.raises(CheckpointError):
            load_net(path)

    def test_sidecar_manifest_written(self, tmp_path):
        import json

        net = init_siren(width=8, depth=1, seed=0)
        path = tmp_path / "net.spnet"
        save_net(net, path)
        manifest = json.loads((tmp_path / "net.spnet.json").read_text())
        assert manifest["num_weights"] == net.num_weights
        assert manifest["omega0"] == net.omega0
