"""Data models for offset medial axis reconstruction."""

from dataclasses import asdict, dataclass, field
from enum import Enum
from typing import Any

import numpy as np
from numpy.typing import NDArray

FloatArray = NDArray[np.float64]
IntArray = NDArray[np.int64]
BoolArray = NDArray[np.bool_]

Point = tuple[float, float, float]
Edge = tuple[int, int]
Triangle = tuple[int, int, int]
Tet = tuple[int, int, int, int]


class FitStatus(Enum):
    """Which branch of the sphere update fired."""

    FREE_RADIUS = "free_radius"
    FIXED_RADIUS = "fixed_radius"
    DEGENERATE = "degenerate"


class InputKind(Enum):
    """Kind of distance field input."""

    POINTS = "points"
    TRIANGLES = "triangles"
    GRID = "grid"
    ANALYTIC = "analytic"
    QMDF = "qmdf"


@dataclass(frozen=True)
class BoundingBox:
    """An axis-aligned box in world units."""

    lower: Point
    upper: Point

    @classmethod
    def from_points(cls, points: FloatArray) -> "BoundingBox":
        """Tight box around a point array of shape (N, 3)."""
        lo = points.min(axis=0)
        hi = points.max(axis=0)
        return cls(
            lower=(float(lo[0]), float(lo[1]), float(lo[2])),
            upper=(float(hi[0]), float(hi[1]), float(hi[2])),
        )

    @property
    def lower_array(self) -> FloatArray:
        """Lower corner as an array."""
        return np.asarray(self.lower, dtype=np.float64)

    @property
    def upper_array(self) -> FloatArray:
        """Upper corner as an array."""
        return np.asarray(self.upper, dtype=np.float64)

    @property
    def extent(self) -> FloatArray:
        """Side lengths."""
        return self.upper_array - self.lower_array

    @property
    def diagonal(self) -> float:
        """Length of the main diagonal."""
        return float(np.linalg.norm(self.extent))

    def expanded(self, margin: float) -> "BoundingBox":
        """Box grown by `margin` on every side."""
        lo = self.lower_array - margin
        hi = self.upper_array + margin
        return BoundingBox(
            lower=(float(lo[0]), float(lo[1]), float(lo[2])),
            upper=(float(hi[0]), float(hi[1]), float(hi[2])),
        )

    def contains(self, points: FloatArray) -> BoolArray:
        """Per-point containment test (closed box)."""
        pts = np.atleast_2d(points)
        inside: BoolArray = np.all(
            (pts >= self.lower_array) & (pts <= self.upper_array), axis=1
        )
        return inside


@dataclass(frozen=True)
class NormalizationTransform:
    """Uniform scale + translation mapping world coordinates into the unit cube.

    normalized = (world - offset) * scale
    """

    scale: float = 1.0
    offset: Point = (0.0, 0.0, 0.0)

    @classmethod
    def identity(cls) -> "NormalizationTransform":
        """The do-nothing transform."""
        return cls()

    @classmethod
    def fit(cls, points: FloatArray) -> "NormalizationTransform":
        """Transform sending the bounding box of `points` into [0, 1]^3.

        The box minimum goes to the origin and the longest side to length 1.
        Degenerate inputs (zero extent) only get translated.
        """
        box = BoundingBox.from_points(points)
        longest = float(box.extent.max())
        scale = 1.0 / longest if longest > 0.0 else 1.0
        return cls(scale=scale, offset=box.lower)

    @property
    def is_identity(self) -> bool:
        """Whether applying the transform is a no-op."""
        return self.scale == 1.0 and self.offset == (0.0, 0.0, 0.0)

    def apply(self, points: FloatArray) -> FloatArray:
        """World to normalized coordinates."""
        if self.is_identity:
            return np.asarray(points, dtype=np.float64)
        return (np.asarray(points, dtype=np.float64) - np.asarray(self.offset)) * self.scale

    def invert(self, points: FloatArray) -> FloatArray:
        """Normalized back to world coordinates."""
        if self.is_identity:
            return np.asarray(points, dtype=np.float64)
        return np.asarray(points, dtype=np.float64) / self.scale + np.asarray(self.offset)

    def invert_length(self, length: FloatArray | float) -> FloatArray | float:
        """Normalized lengths (radii) back to world units."""
        return length / self.scale


@dataclass(frozen=True)
class OrientedSample:
    """A point on the alpha level set with its normal and area weight."""

    position: Point
    normal: Point
    gradient: Point
    weight: float = 1.0


@dataclass(eq=False)
class SampleSet:
    """Structure-of-arrays container for oriented samples.

    positions, normals and gradients have shape (N, 3); weights has shape (N,).
    """

    positions: FloatArray
    normals: FloatArray
    gradients: FloatArray
    weights: FloatArray

    def __len__(self) -> int:
        """Number of samples."""
        return int(self.positions.shape[0])

    def __getitem__(self, index: int) -> OrientedSample:
        """A single sample as an OrientedSample."""
        p, n, g = self.positions[index], self.normals[index], self.gradients[index]
        return OrientedSample(
            position=(float(p[0]), float(p[1]), float(p[2])),
            normal=(float(n[0]), float(n[1]), float(n[2])),
            gradient=(float(g[0]), float(g[1]), float(g[2])),
            weight=float(self.weights[index]),
        )

    @classmethod
    def from_positions(
        cls, positions: FloatArray, gradients: FloatArray | None = None
    ) -> "SampleSet":
        """Samples with normals initialised from the normalized gradients."""
        pts = np.asarray(positions, dtype=np.float64).reshape(-1, 3)
        grads = (
            np.zeros_like(pts)
            if gradients is None
            else np.asarray(gradients, dtype=np.float64).reshape(-1, 3)
        )
        norms = np.linalg.norm(grads, axis=1, keepdims=True)
        normals = np.divide(grads, norms, out=np.zeros_like(grads), where=norms > 0)
        return cls(
            positions=pts,
            normals=normals,
            gradients=normals.copy(),
            weights=np.ones(len(pts)),
        )

    @classmethod
    def from_samples(cls, samples: list[OrientedSample]) -> "SampleSet":
        """Pack a list of OrientedSample into arrays."""
        if not samples:
            empty = np.zeros((0, 3))
            return cls(empty, empty.copy(), empty.copy(), np.zeros(0))
        return cls(
            positions=np.array([s.position for s in samples], dtype=np.float64),
            normals=np.array([s.normal for s in samples], dtype=np.float64),
            gradients=np.array([s.gradient for s in samples], dtype=np.float64),
            weights=np.array([s.weight for s in samples], dtype=np.float64),
        )

    def subset(self, indices: IntArray | list[int]) -> "SampleSet":
        """Samples at the given indices, in that order."""
        idx = np.asarray(indices, dtype=np.int64)
        return SampleSet(
            positions=self.positions[idx],
            normals=self.normals[idx],
            gradients=self.gradients[idx],
            weights=self.weights[idx],
        )


@dataclass(eq=False)
class SampleGraph:
    """Filtered kNN graph over the samples.

    edges holds unique index pairs (i, j) with i < j, shape (E, 2).
    """

    samples: SampleSet
    edges: IntArray
    k: int

    def neighbors(self) -> tuple[IntArray, IntArray]:
        """CSR adjacency (indptr, indices) of the undirected graph."""
        n = len(self.samples)
        if len(self.edges) == 0:
            return np.zeros(n + 1, dtype=np.int64), np.zeros(0, dtype=np.int64)
        src = np.concatenate([self.edges[:, 0], self.edges[:, 1]])
        dst = np.concatenate([self.edges[:, 1], self.edges[:, 0]])
        order = np.lexsort((dst, src))
        src, dst = src[order], dst[order]
        indptr = np.zeros(n + 1, dtype=np.int64)
        np.add.at(indptr, src + 1, 1)
        return np.cumsum(indptr), dst.astype(np.int64)

    def degree(self) -> IntArray:
        """Number of neighbours per sample."""
        indptr, _ = self.neighbors()
        return np.diff(indptr)


@dataclass(eq=False)
class MedialSphere:
    """A medial sphere with its cluster bookkeeping."""

    center: FloatArray
    radius: float
    seed_samples: tuple[int, int]
    cluster: set[int] = field(default_factory=set)
    alive: bool = True
    flagged: bool = False


@dataclass(eq=False)
class CoverageResult:
    """Spheres chosen by greedy coverage and the covering sphere per sample."""

    selected: list[MedialSphere]
    owner: IntArray


@dataclass(eq=False)
class SphereState:
    """Optimizer state: spheres, clustering and sphere adjacency."""

    centers: FloatArray
    radii: FloatArray
    alive: BoolArray
    assignment: IntArray
    adjacency: set[Edge] = field(default_factory=set)
    iteration: int = 0
    energy_history: list[float] = field(default_factory=list)

    @property
    def num_spheres(self) -> int:
        """Number of spheres, alive or not."""
        return int(self.centers.shape[0])

    @property
    def active_spheres(self) -> int:
        """Number of alive spheres."""
        return int(self.alive.sum())


@dataclass(eq=False)
class MedialComplex:
    """Mixed-dimensional simplicial complex over sphere centers."""

    vertices: FloatArray
    radii: FloatArray
    edges: set[Edge] = field(default_factory=set)
    triangles: set[Triangle] = field(default_factory=set)
    tets: set[Tet] = field(default_factory=set)

    @property
    def euler_characteristic(self) -> int:
        """V - E + F - T."""
        return (
            len(self.vertices) - len(self.edges) + len(self.triangles) - len(self.tets)
        )

    def face_tets(self) -> dict[Triangle, set[Tet]]:
        """Incidence map from each triangle to the tets containing it."""
        incidence: dict[Triangle, set[Tet]] = {t: set() for t in self.triangles}
        for tet in self.tets:
            for face in tet_faces(tet):
                incidence.setdefault(face, set()).add(tet)
        return incidence

    def edge_faces(self) -> dict[Edge, set[Triangle]]:
        """Incidence map from each edge to the triangles containing it."""
        incidence: dict[Edge, set[Triangle]] = {e: set() for e in self.edges}
        for tri in self.triangles:
            for edge in triangle_edges(tri):
                incidence.setdefault(edge, set()).add(tri)
        return incidence

    def is_closed(self) -> bool:
        """Whether every simplex's boundary is present in the complex."""
        n = len(self.vertices)
        if any(not (0 <= a < n and 0 <= b < n) for a, b in self.edges):
            return False
        if any(e not in self.edges for t in self.triangles for e in triangle_edges(t)):
            return False
        return all(f in self.triangles for t in self.tets for f in tet_faces(t))


@dataclass(eq=False)
class MixedMesh:
    """Output mesh: triangles for sheets and segments for curve branches."""

    vertices: FloatArray
    triangles: IntArray
    segments: IntArray
    radii: FloatArray | None = None

    @classmethod
    def empty(cls) -> "MixedMesh":
        """A mesh with no elements."""
        return cls(
            vertices=np.zeros((0, 3)),
            triangles=np.zeros((0, 3), dtype=np.int64),
            segments=np.zeros((0, 2), dtype=np.int64),
        )

    @property
    def is_empty(self) -> bool:
        """True when the mesh has neither triangles nor segments."""
        return len(self.triangles) == 0 and len(self.segments) == 0

    def unique_edges(self) -> IntArray:
        """All distinct edges: triangle edges plus curve segments, sorted pairs."""
        parts = [self.segments.reshape(-1, 2)]
        if len(self.triangles):
            tri = self.triangles
            parts.append(
                np.concatenate([tri[:, [0, 1]], tri[:, [1, 2]], tri[:, [0, 2]]])
            )
        stacked = np.sort(np.concatenate(parts).astype(np.int64), axis=1)
        if len(stacked) == 0:
            return np.zeros((0, 2), dtype=np.int64)
        return np.unique(stacked, axis=0)


@dataclass
class MeshReport:
    """Evaluation and diagnostic figures for one reconstruction."""

    v_count: int = 0
    e_count: int = 0
    f_count: int = 0
    segment_count: int = 0
    chamfer: float | None = None
    hausdorff: float | None = None
    tri_quality_mean: float | None = None
    euler_char: int = 0
    nm_edge_count: int = 0
    boundary_edge_count: int = 0
    patch_count: int = 0
    component_count: int = 0
    sample_count: int = 0
    sphere_count: int = 0
    iterations: int = 0
    stage_seconds: dict[str, float] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        """JSON-serializable dict of all fields."""
        return asdict(self)


def triangle_edges(tri: Triangle) -> tuple[Edge, Edge, Edge]:
    """Sorted edges of a sorted triangle."""
    a, b, c = tri
    return (a, b), (a, c), (b, c)


def tet_faces(tet: Tet) -> tuple[Triangle, Triangle, Triangle, Triangle]:
    """Sorted faces of a sorted tetrahedron."""
    a, b, c, d = tet
    return (a, b, c), (a, b, d), (a, c, d), (b, c, d)
