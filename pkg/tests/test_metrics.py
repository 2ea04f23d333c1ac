"""Tests for accuracy, quality and topology figures."""

import json
import math
from pathlib import Path

import numpy as np
import pytest

from offsetaxis.errors import InvalidInputError, ParameterError
from offsetaxis.metrics import (
    build_report,
    chamfer_hausdorff,
    sample_mesh,
    topology_report,
    triangle_qualities,
    triangle_quality,
    write_report_json,
)
from offsetaxis.models import MixedMesh


def make_mesh(vertices: list[list[float]], triangles: list[list[int]], segments: list[list[int]] | None = None) -> MixedMesh:
    """Create a mixed mesh from lists."""
    return MixedMesh(
        vertices=np.array(vertices, dtype=np.float64),
        triangles=np.array(triangles, dtype=np.int64).reshape(-1, 3),
        segments=np.array(segments or [], dtype=np.int64).reshape(-1, 2),
    )


def make_square(z: float = 0.0) -> MixedMesh:
    """Create the unit square at height z as two triangles."""
    return make_mesh(
        [[0, 0, z], [1, 0, z], [1, 1, z], [0, 1, z]],
        [[0, 1, 2], [0, 2, 3]],
    )


def make_book(pages: int = 3) -> MixedMesh:
    """Create triangles sharing the edge (0, 1)."""
    vertices = [[0.0, 0.0, 0.0], [0.0, 0.0, 1.0]]
    triangles = []
    for k in range(pages):
        angle = 2 * math.pi * k / pages
        vertices.append([math.cos(angle), math.sin(angle), 0.5])
        triangles.append([0, 1, 2 + k])
    return make_mesh(vertices, triangles)


class TestTriangleQuality:
    """Tests for triangle quality."""

    def test_equilateral(self) -> None:
        """Test an equilateral triangle scores 1."""
        mesh = make_mesh([[0, 0, 0], [1, 0, 0], [0.5, math.sqrt(3) / 2, 0]], [[0, 1, 2]])
        assert triangle_quality(mesh) == pytest.approx(1.0)

    def test_right_isosceles(self) -> None:
        """Test a right isosceles triangle scores sqrt(3)/2."""
        mesh = make_mesh([[0, 0, 0], [1, 0, 0], [0, 1, 0]], [[0, 1, 2]])
        assert triangle_quality(mesh) == pytest.approx(math.sqrt(3) / 2)

    def test_collinear(self) -> None:
        """Test a degenerate triangle scores 0."""
        mesh = make_mesh([[0, 0, 0], [1, 0, 0], [2, 0, 0]], [[0, 1, 2]])
        assert triangle_qualities(mesh).tolist() == [0.0]
        assert triangle_quality(mesh) == 0.0

    def test_area_weighted(self) -> None:
        """Test larger triangles weigh more."""
        mesh = make_mesh(
            [[0, 0, 0], [2, 0, 0], [1, math.sqrt(3), 0], [5, 0, 0], [5.1, 0, 0], [5, 0.1, 0]],
            [[0, 1, 2], [3, 4, 5]],
        )
        area_big, area_small = math.sqrt(3), 0.005
        expected = (area_big * 1.0 + area_small * math.sqrt(3) / 2) / (area_big + area_small)
        assert triangle_quality(mesh) == pytest.approx(expected)

    def test_no_triangles(self) -> None:
        """Test quality needs triangles."""
        with pytest.raises(InvalidInputError):
            triangle_quality(make_mesh([[0, 0, 0], [1, 0, 0]], [], [[0, 1]]))


class TestTopology:
    """Tests for topology_report."""

    def test_single_triangle(self) -> None:
        """Test one triangle is a disk with three boundary edges."""
        topo = topology_report(make_mesh([[0, 0, 0], [1, 0, 0], [0, 1, 0]], [[0, 1, 2]]))
        assert topo.euler_char == 1
        assert topo.boundary_edge_count == 3
        assert topo.nm_edge_count == 0
        assert topo.patch_count == 1
        assert topo.component_count == 1

    def test_tetrahedron_surface(self) -> None:
        """Test a closed surface has characteristic 2 and no boundary."""
        mesh = make_mesh(
            [[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1]],
            [[0, 1, 2], [0, 1, 3], [0, 2, 3], [1, 2, 3]],
        )
        topo = topology_report(mesh)
        assert topo.euler_char == 2
        assert topo.boundary_edge_count == 0
        assert topo.patch_count == 1

    def test_book(self) -> None:
        """Test three pages on a spine give one non-manifold edge and three patches."""
        topo = topology_report(make_book(3))
        assert topo.nm_edge_count == 1
        assert topo.patch_count == 3
        assert topo.boundary_edge_count == 6
        assert topo.euler_char == 1
        assert topo.component_count == 1

    def test_square_is_one_patch(self) -> None:
        """Test two triangles across a manifold edge form one patch."""
        topo = topology_report(make_square())
        assert topo.patch_count == 1
        assert topo.boundary_edge_count == 4

    def test_curves_and_components(self) -> None:
        """Test a segment path plus a separate triangle."""
        mesh = make_mesh(
            [[0, 0, 0], [1, 0, 0], [2, 0, 0], [5, 0, 0], [6, 0, 0], [5, 1, 0]],
            [[3, 4, 5]],
            [[0, 1], [1, 2]],
        )
        topo = topology_report(mesh)
        assert topo.component_count == 2
        assert topo.euler_char == 2
        assert topo.patch_count == 1


class TestChamferHausdorff:
    """Tests for chamfer_hausdorff."""

    def test_self_distance_is_zero(self) -> None:
        """Test a mesh against itself."""
        chamfer, hausdorff = chamfer_hausdorff(make_square(), make_square(), n_samples=2000)
        assert chamfer == 0.0
        assert hausdorff == 0.0

    def test_parallel_squares(self) -> None:
        """Test squares d apart are d apart under both measures."""
        chamfer, hausdorff = chamfer_hausdorff(make_square(), make_square(0.1), n_samples=2000)
        assert chamfer == pytest.approx(0.1)
        assert hausdorff == pytest.approx(0.1)

    def test_symmetric(self) -> None:
        """Test swapping the meshes gives the same figures."""
        a = make_square()
        b = make_book(3)
        assert chamfer_hausdorff(a, b, n_samples=1000) == pytest.approx(chamfer_hausdorff(b, a, n_samples=1000))

    def test_segments(self) -> None:
        """Test curve-only meshes are sampled along their segments."""
        a = make_mesh([[0, 0, 0], [1, 0, 0]], [], [[0, 1]])
        b = make_mesh([[0, 0.2, 0], [1, 0.2, 0]], [], [[0, 1]])
        chamfer, hausdorff = chamfer_hausdorff(a, b, n_samples=1000)
        assert chamfer == pytest.approx(0.2)
        assert hausdorff == pytest.approx(0.2)

    def test_too_few_samples(self) -> None:
        """Test fewer than 1000 samples are rejected."""
        with pytest.raises(ParameterError):
            chamfer_hausdorff(make_square(), make_square(), n_samples=999)

    def test_empty_mesh(self) -> None:
        """Test an empty mesh cannot be sampled."""
        with pytest.raises(InvalidInputError):
            sample_mesh(MixedMesh.empty(), 1000)


class TestReport:
    """Tests for build_report and write_report_json."""

    def test_without_reference(self) -> None:
        """Test accuracy fields stay empty without a reference."""
        report = build_report(make_book(3), sample_count=10, sphere_count=4, iterations=7)
        assert report.chamfer is None
        assert report.v_count == 5
        assert report.e_count == 7
        assert report.f_count == 3
        assert report.nm_edge_count == 1
        assert report.iterations == 7

    def test_with_reference(self) -> None:
        """Test a reference fills in accuracy figures."""
        report = build_report(make_square(), reference=make_square(0.1), n_samples=1000)
        assert report.chamfer == pytest.approx(0.1)
        assert report.tri_quality_mean == pytest.approx(math.sqrt(3) / 2)

    def test_json(self, tmp_path: Path) -> None:
        """Test the JSON report carries every field."""
        path = tmp_path / "report.json"
        write_report_json(path, build_report(make_square(), stage_seconds={"load": 0.5}))
        data = json.loads(path.read_text())
        assert data["f_count"] == 2
        assert data["hausdorff"] is None
        assert data["stage_seconds"] == {"load": 0.5}
        assert list(data) == sorted(data)
