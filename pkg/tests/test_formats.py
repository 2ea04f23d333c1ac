"""Tests for file readers and writers."""

import csv
from pathlib import Path

import numpy as np
import pytest

from offsetaxis import formats
from offsetaxis.errors import FormatError, ParseError
from offsetaxis.models import MixedMesh, SampleSet


def make_mesh() -> MixedMesh:
    """Create a triangle with a dangling segment."""
    return MixedMesh(
        vertices=np.array([[0.0, 0, 0], [1, 0, 0], [0, 1, 0], [2, 2, 2]]),
        triangles=np.array([[0, 1, 2]]),
        segments=np.array([[2, 3]]),
        radii=np.array([0.1, 0.2, 0.3, 0.4]),
    )


class TestReadPoints:
    """Tests for read_points."""

    def test_xyz_with_comments_and_commas(self, tmp_path: Path) -> None:
        """Test comment lines are skipped and commas accepted."""
        path = tmp_path / "cloud.xyz"
        path.write_text("# header\n0 0 0\n\n1.5,2,3\n")
        np.testing.assert_array_equal(formats.read_points(path), [[0, 0, 0], [1.5, 2, 3]])

    def test_malformed_line_number(self, tmp_path: Path) -> None:
        """Test the failing line is reported."""
        path = tmp_path / "cloud.xyz"
        path.write_text("0 0 0\n1 two 3\n")
        with pytest.raises(ParseError) as exc_info:
            formats.read_points(path)
        assert exc_info.value.line == 2

    def test_non_finite(self, tmp_path: Path) -> None:
        """Test nan coordinates are rejected."""
        path = tmp_path / "cloud.xyz"
        path.write_text("0 nan 0\n")
        with pytest.raises(ParseError, match="Non-finite"):
            formats.read_points(path)

    def test_empty(self, tmp_path: Path) -> None:
        """Test a file without points fails."""
        path = tmp_path / "cloud.xyz"
        path.write_text("# nothing\n")
        with pytest.raises(ParseError, match="No points"):
            formats.read_points(path)

    def test_missing_file(self, tmp_path: Path) -> None:
        """Test a missing file raises ParseError."""
        with pytest.raises(ParseError, match="not found"):
            formats.read_points(tmp_path / "missing.xyz")

    def test_obj_vertices(self, tmp_path: Path) -> None:
        """Test OBJ vertex records are read as points."""
        path = tmp_path / "cloud.obj"
        path.write_text("v 1 2 3\nv 4 5 6\n")
        assert formats.read_points(path).shape == (2, 3)


class TestReadTriangles:
    """Tests for read_triangles."""

    def test_obj_quad_is_fan_triangulated(self, tmp_path: Path) -> None:
        """Test a quad becomes two triangles and slashes are ignored."""
        path = tmp_path / "quad.obj"
        path.write_text("v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1/1 2/2 3/3 4/4\n")
        _, triangles = formats.read_triangles(path)
        assert triangles.tolist() == [[0, 1, 2], [0, 2, 3]]

    def test_negative_obj_indices(self, tmp_path: Path) -> None:
        """Test relative indices count back from the last vertex."""
        path = tmp_path / "tri.obj"
        path.write_text("v 0 0 0\nv 1 0 0\nv 0 1 0\nf -3 -2 -1\n")
        _, triangles = formats.read_triangles(path)
        assert triangles.tolist() == [[0, 1, 2]]

    def test_out_of_range_index(self, tmp_path: Path) -> None:
        """Test a bad face index reports its line."""
        path = tmp_path / "tri.obj"
        path.write_text("v 0 0 0\nf 1 2 3\n")
        with pytest.raises(ParseError) as exc_info:
            formats.read_triangles(path)
        assert exc_info.value.line == 2

    def test_ascii_ply(self, tmp_path: Path) -> None:
        """Test vertex and face elements of an ascii PLY."""
        path = tmp_path / "tri.ply"
        path.write_text(
            "ply\nformat ascii 1.0\nelement vertex 3\nproperty float x\n"
            "property float y\nproperty float z\nelement face 1\n"
            "property list uchar int vertex_indices\nend_header\n"
            "0 0 0\n1 0 0\n0 1 0\n3 0 1 2\n"
        )
        vertices, triangles = formats.read_triangles(path)
        assert vertices.shape == (3, 3)
        assert triangles.tolist() == [[0, 1, 2]]

    def test_unsupported_suffix(self, tmp_path: Path) -> None:
        """Test unknown formats are rejected."""
        path = tmp_path / "tri.stl3"
        path.write_text("")
        with pytest.raises(ParseError, match="Unsupported"):
            formats.read_triangles(path)


class TestMeshWriters:
    """Tests for write_obj and write_ply."""

    def test_obj_records(self, tmp_path: Path) -> None:
        """Test OBJ output has v, f and l records."""
        path = tmp_path / "mesh.obj"
        formats.write_obj(path, make_mesh())
        lines = path.read_text().splitlines()
        assert sum(line.startswith("v ") for line in lines) == 4
        assert "f 1 2 3" in lines
        assert "l 3 4" in lines

    def test_obj_read_back(self, tmp_path: Path) -> None:
        """Test read_mesh recovers triangles and segments from OBJ."""
        path = tmp_path / "mesh.obj"
        formats.write_obj(path, make_mesh())
        mesh = formats.read_mesh(path)
        assert mesh.triangles.tolist() == [[0, 1, 2]]
        assert mesh.segments.tolist() == [[2, 3]]

    def test_ply_keeps_radii(self, tmp_path: Path) -> None:
        """Test PLY output carries per-vertex radii and edges."""
        path = tmp_path / "mesh.ply"
        formats.write_ply(path, make_mesh())
        mesh = formats.read_mesh(path)
        assert mesh.radii is not None
        np.testing.assert_allclose(mesh.radii, [0.1, 0.2, 0.3, 0.4])
        assert mesh.segments.tolist() == [[2, 3]]

    def test_empty_mesh(self, tmp_path: Path) -> None:
        """Test an empty mesh writes an empty OBJ."""
        path = tmp_path / "empty.obj"
        formats.write_obj(path, MixedMesh.empty())
        assert path.read_text() == ""


class TestGrid:
    """Tests for the UDFGRID format."""

    def test_axis_order(self, tmp_path: Path) -> None:
        """Test values keep their (i, j, k) positions."""
        values = np.arange(24, dtype=np.float64).reshape(2, 3, 4)
        path = tmp_path / "field.grid"
        formats.write_grid(path, values, (0.0, 0.0, 0.0), (0.5, 0.5, 0.5))
        loaded, origin, spacing = formats.read_grid(path)
        np.testing.assert_array_equal(loaded, values)
        assert origin == (0.0, 0.0, 0.0)
        assert spacing == (0.5, 0.5, 0.5)

    def test_payload_mismatch(self, tmp_path: Path) -> None:
        """Test a short payload raises FormatError."""
        path = tmp_path / "field.grid"
        path.write_bytes(b"UDFGRID 1\ndims 2 2 2\norigin 0 0 0\nspacing 1 1 1\n" + b"\0" * 12)
        with pytest.raises(FormatError, match="declares 8"):
            formats.read_grid(path)

    def test_bad_magic(self, tmp_path: Path) -> None:
        """Test the magic line is checked."""
        path = tmp_path / "field.grid"
        path.write_bytes(b"GRID\ndims 1 1 1\norigin 0 0 0\nspacing 1 1 1\n" + b"\0" * 4)
        with pytest.raises(FormatError) as exc_info:
            formats.read_grid(path)
        assert exc_info.value.line == 1


class TestDumps:
    """Tests for debug dumps."""

    def test_samples_ply(self, tmp_path: Path) -> None:
        """Test a sample dump keeps normals, gradients and weights."""
        samples = SampleSet(
            positions=np.array([[0.0, 0.0, 0.1], [0.5, 0.0, 0.1]]),
            normals=np.array([[0.0, 0.0, 1.0], [0.0, 0.0, 1.0]]),
            gradients=np.array([[0.0, 0.0, 0.9], [0.0, 0.0, 1.1]]),
            weights=np.array([1.0, 2.0]),
        )
        path = tmp_path / "samples.ply"
        formats.write_samples_ply(path, samples)
        loaded = formats.read_samples_ply(path)
        np.testing.assert_allclose(loaded.gradients, samples.gradients)
        np.testing.assert_allclose(loaded.weights, [1.0, 2.0])

    def test_spheres(self, tmp_path: Path) -> None:
        """Test sphere dumps are one line per sphere."""
        path = tmp_path / "spheres.txt"
        formats.write_spheres(path, np.array([[0.0, 0.0, 0.0], [1.0, 2.0, 3.0]]), np.array([0.1, 0.2]))
        centers, radii = formats.read_spheres(path)
        assert len(path.read_text().splitlines()) == 2
        np.testing.assert_allclose(radii, [0.1, 0.2])
        np.testing.assert_allclose(centers[1], [1.0, 2.0, 3.0])

    def test_energy_log(self, tmp_path: Path) -> None:
        """Test the energy log is CSV with a header row."""
        path = tmp_path / "energy.csv"
        formats.write_energy_log(path, [(0, 2.5, 10, 4), (1, 1.25, 0, 4)])
        with path.open() as f:
            rows = list(csv.reader(f))
        assert rows[0] == ["iter", "total_energy", "changed_assignments", "active_spheres"]
        assert rows[2] == ["1", "1.25", "0", "4"]
