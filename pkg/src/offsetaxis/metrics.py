"""Accuracy, quality and topology figures for reconstructed meshes."""

import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import trimesh
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

from offsetaxis.errors import InvalidInputError, ParameterError
from offsetaxis.geometry import triangle_areas
from offsetaxis.models import FloatArray, IntArray, MeshReport, MixedMesh

logger = logging.getLogger(__name__)

DEFAULT_N_SAMPLES = 100_000
MIN_SAMPLES = 1000


@dataclass(frozen=True)
class Topology:
    """Topological summary of a mixed mesh."""

    euler_char: int
    nm_edge_count: int
    boundary_edge_count: int
    patch_count: int
    component_count: int


def _sample_segments(
    vertices: FloatArray, segments: IntArray, count: int, seed: int
) -> FloatArray:
    """Length-uniform random points on a set of segments."""
    a, b = vertices[segments[:, 0]], vertices[segments[:, 1]]
    lengths = np.linalg.norm(b - a, axis=1)
    rng = np.random.default_rng(seed)
    if lengths.sum() > 0:
        chosen = rng.choice(len(segments), size=count, p=lengths / lengths.sum())
    else:
        chosen = rng.integers(0, len(segments), size=count)
    t = rng.random(count)[:, None]
    points: FloatArray = a[chosen] + t * (b[chosen] - a[chosen])
    return points


def sample_mesh(mesh: MixedMesh, count: int, seed: int = 0) -> FloatArray:
    """Area-uniform points on the triangles, or length-uniform on the segments.

    Raises:
        InvalidInputError: If the mesh has no triangles and no segments.
    """
    if mesh.is_empty:
        raise InvalidInputError("Cannot sample an empty mesh")
    if len(mesh.triangles) and triangle_areas(mesh.vertices, mesh.triangles).sum() > 0:
        surface = trimesh.Trimesh(vertices=mesh.vertices, faces=mesh.triangles, process=False)
        points, _ = trimesh.sample.sample_surface(surface, count, seed=seed)
        return np.asarray(points, dtype=np.float64)
    segments = mesh.segments if len(mesh.segments) else mesh.unique_edges()
    return _sample_segments(mesh.vertices, segments, count, seed)


def chamfer_hausdorff(
    mesh_a: MixedMesh,
    mesh_b: MixedMesh,
    n_samples: int = DEFAULT_N_SAMPLES,
    seed: int = 0,
) -> tuple[float, float]:
    """Chamfer and Hausdorff distances between two meshes.

    Each mesh is sampled with the same seed; Chamfer is the mean of the two
    directional mean nearest-sample distances, Hausdorff the larger of the
    two directional maxima.

    Args:
        mesh_a: First mesh.
        mesh_b: Second mesh.
        n_samples: Points per mesh (>= 1000).
        seed: Sampling seed.

    Returns:
        (chamfer, hausdorff).

    Raises:
        InvalidInputError: If either mesh is empty.
        ParameterError: If n_samples < 1000.
    """
    if n_samples < MIN_SAMPLES:
        raise ParameterError("n_samples", n_samples, f"must be >= {MIN_SAMPLES}")
    points_a = sample_mesh(mesh_a, n_samples, seed)
    points_b = sample_mesh(mesh_b, n_samples, seed)
    a_to_b, _ = cKDTree(points_b).query(points_a)
    b_to_a, _ = cKDTree(points_a).query(points_b)
    chamfer = 0.5 * (float(a_to_b.mean()) + float(b_to_a.mean()))
    hausdorff = max(float(a_to_b.max()), float(b_to_a.max()))
    return chamfer, hausdorff


def triangle_qualities(mesh: MixedMesh) -> FloatArray:
    """Per-triangle quality 4 sqrt(3) A / (l1^2 + l2^2 + l3^2), in [0, 1]."""
    tri = mesh.triangles
    a, b, c = (mesh.vertices[tri[:, k]] for k in range(3))
    squares = (
        np.sum((b - a) ** 2, axis=1) + np.sum((c - b) ** 2, axis=1) + np.sum((a - c) ** 2, axis=1)
    )
    areas = triangle_areas(mesh.vertices, tri)
    quality: FloatArray = np.divide(
        4.0 * math.sqrt(3.0) * areas, squares, out=np.zeros_like(areas), where=squares > 0
    )
    return quality


def triangle_quality(mesh: MixedMesh) -> float:
    """Area-weighted mean triangle quality; equilateral triangles score 1.

    Raises:
        InvalidInputError: If the mesh has no triangles.
    """
    if len(mesh.triangles) == 0:
        raise InvalidInputError("Triangle quality needs at least one triangle")
    areas = triangle_areas(mesh.vertices, mesh.triangles)
    total = float(areas.sum())
    if total <= 0:
        return 0.0
    return float(np.sum(triangle_qualities(mesh) * areas) / total)


def _edge_incidence(triangles: IntArray) -> tuple[IntArray, IntArray, IntArray]:
    """Unique triangle edges, the triangle count per edge and the edge id of each triangle side."""
    sides = np.sort(
        np.concatenate([triangles[:, [0, 1]], triangles[:, [1, 2]], triangles[:, [0, 2]]]), axis=1
    )
    unique, inverse, counts = np.unique(sides, axis=0, return_inverse=True, return_counts=True)
    return unique, counts, inverse.reshape(-1)


def topology_report(mesh: MixedMesh) -> Topology:
    """Euler characteristic, edge classes, manifold patches and components.

    Euler characteristic is V - E + F with E counting triangle edges and
    curve segments. Patches are the connected components of triangles
    linked across edges shared by exactly two triangles.
    """
    n_vertices = len(mesh.vertices)
    n_tris = len(mesh.triangles)
    all_edges = mesh.unique_edges()
    euler = n_vertices - len(all_edges) + n_tris

    nm_edges = boundary_edges = patches = 0
    if n_tris:
        _, counts, side_edge = _edge_incidence(mesh.triangles)
        nm_edges = int(np.count_nonzero(counts >= 3))
        boundary_edges = int(np.count_nonzero(counts == 1))
        side_tri = np.tile(np.arange(n_tris), 3)
        manifold_sides = counts[side_edge] == 2
        order = np.argsort(side_edge[manifold_sides], kind="stable")
        paired = side_tri[manifold_sides][order].reshape(-1, 2)
        adjacency = coo_matrix(
            (np.ones(len(paired)), (paired[:, 0], paired[:, 1])), shape=(n_tris, n_tris)
        )
        patches, _ = connected_components(adjacency, directed=False)

    components = 0
    if n_vertices:
        graph = coo_matrix(
            (np.ones(len(all_edges)), (all_edges[:, 0], all_edges[:, 1])),
            shape=(n_vertices, n_vertices),
        )
        components, _ = connected_components(graph, directed=False)

    return Topology(
        euler_char=int(euler),
        nm_edge_count=nm_edges,
        boundary_edge_count=boundary_edges,
        patch_count=int(patches),
        component_count=int(components),
    )


def build_report(
    mesh: MixedMesh,
    reference: MixedMesh | None = None,
    n_samples: int = DEFAULT_N_SAMPLES,
    seed: int = 0,
    sample_count: int = 0,
    sphere_count: int = 0,
    iterations: int = 0,
    stage_seconds: dict[str, float] | None = None,
) -> MeshReport:
    """Assemble a MeshReport for a mesh, with accuracy figures when a reference is given."""
    topology = topology_report(mesh)
    chamfer = hausdorff = None
    if reference is not None and not mesh.is_empty:
        chamfer, hausdorff = chamfer_hausdorff(mesh, reference, n_samples, seed)
    quality = triangle_quality(mesh) if len(mesh.triangles) else None
    return MeshReport(
        v_count=len(mesh.vertices),
        e_count=len(mesh.unique_edges()),
        f_count=len(mesh.triangles),
        segment_count=len(mesh.segments),
        chamfer=chamfer,
        hausdorff=hausdorff,
        tri_quality_mean=quality,
        euler_char=topology.euler_char,
        nm_edge_count=topology.nm_edge_count,
        boundary_edge_count=topology.boundary_edge_count,
        patch_count=topology.patch_count,
        component_count=topology.component_count,
        sample_count=sample_count,
        sphere_count=sphere_count,
        iterations=iterations,
        stage_seconds=dict(stage_seconds or {}),
    )


def write_report_json(path: Path | str, report: MeshReport) -> None:
    """Write a report as a JSON object."""
    with Path(path).open("w") as f:
        json.dump(report.to_dict(), f, indent=2, sort_keys=True)
        f.write("\n")
    logger.info("Wrote report to %s", path)
