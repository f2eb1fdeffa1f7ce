import json

import numpy as np
import pytest

from surfpde import io as io_
from surfpde.errors import SurfPdeError
from surfpde.trainer import TrainHistory


class TestPly:
    def test_point_cloud_with_scalar(self, tmp_path):
        path = tmp_path / "cloud.ply"
        pts = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0]], dtype=float)
        io_.write_ply(path, pts, scalar=np.array([0.5, 1.5, -2.0]), scalar_name="heat")
        text = path.read_text().splitlines()
        assert text[0] == "ply"
        assert "element vertex 3" in text
        assert "property float heat" in text
        assert text[-1].endswith("-2")

    def test_mesh_faces_written(self, tmp_path):
        path = tmp_path / "mesh.ply"
        pts = np.eye(3)
        io_.write_ply(path, pts, faces=np.array([[0, 1, 2]]))
        text = path.read_text()
        assert "element face 1" in text
        assert text.strip().endswith("3 0 1 2")

    def test_scalar_length_mismatch(self, tmp_path):
        with pytest.raises(SurfPdeError):
            io_.write_ply(tmp_path / "x.ply", np.eye(3), scalar=np.zeros(2))


class TestHistoryCsv:
    def test_columns_and_rows(self, tmp_path):
        h = TrainHistory()
        h.log(100, 1.0, 0.9, 0.1, 1e-3, 0.5)
        h.log(200, 0.5, 0.45, 0.05, 1e-3, 1.0)
        path = tmp_path / "history.csv"
        io_.write_history_csv(path, h)
        lines = path.read_text().splitlines()
        assert lines[0] == "iteration,total_loss,pde_loss,bc_loss,lr,seconds"
        assert len(lines) == 3
        assert lines[1].startswith("100,")


class TestManifest:
    def test_hash_stable_under_key_order(self):
        a = io_.config_hash({"a": 1, "b": {"c": 2}})
        b = io_.config_hash({"b": {"c": 2}, "a": 1})
        assert a == b

    def test_hash_changes_with_content(self):
        assert io_.config_hash({"a": 1}) != io_.config_hash({"a": 2})

    def test_manifest_contents(self, tmp_path):
        path = tmp_path / "manifest.json"
        io_.write_manifest(path, {"x": 1}, seed=7, timings={"total_seconds": 1.5})
        data = json.loads(path.read_text())
        assert data["seed"] == 7
        assert data["config"] == {"x": 1}
        assert "numpy" in data["versions"]
        assert data["config_hash"] == io_.config_hash({"x": 1})

    def test_run_directory(self, tmp_path):
        run = io_.RunDirectory(tmp_path / "run1", {"k": "v"}, seed=3)
        run.mark("setup_seconds")
        manifest = run.finalize(extra={"result": 1.25})
        assert (tmp_path / "run1" / "manifest.json").exists()
        assert manifest["result"] == 1.25
        assert "total_seconds" in manifest["timings"]
