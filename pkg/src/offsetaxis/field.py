"""Unsigned distance field backends.

Every backend answers batched queries ``query(points) -> distances`` on
arrays of shape (N, 3). Fields are immutable after construction and may be
queried concurrently; the query counter is diagnostic only.
"""

import logging
import math
import threading
from abc import ABC, abstractmethod
from pathlib import Path
from typing import Any

import numpy as np
import trimesh
from numpy.typing import ArrayLike
from scipy.interpolate import RegularGridInterpolator
from scipy.spatial import cKDTree

from offsetaxis import formats
from offsetaxis.errors import InvalidInputError, ParameterError, ParseError
from offsetaxis.geometry import point_triangle_distances
from offsetaxis.models import (
    BoundingBox,
    FloatArray,
    IntArray,
    MixedMesh,
    NormalizationTransform,
)

logger = logging.getLogger(__name__)

# Queries are evaluated in blocks of this many points
QUERY_BLOCK = 65_536


def _as_points(points: ArrayLike) -> FloatArray:
    """Validate and reshape query points to (N, 3)."""
    pts = np.asarray(points, dtype=np.float64)
    if pts.size % 3 != 0:
        raise InvalidInputError(f"Expected 3D points, got shape {pts.shape}")
    pts = pts.reshape(-1, 3)
    if not np.all(np.isfinite(pts)):
        raise InvalidInputError("Query points must have finite coordinates")
    return pts


class DistanceField(ABC):
    """A queryable unsigned distance field."""

    def __init__(
        self,
        bounding_box: BoundingBox,
        transform: NormalizationTransform | None = None,
    ) -> None:
        """Initialize the field.

        Args:
            bounding_box: Box around the underlying shape (field coordinates).
            transform: World-to-field normalization applied at load time.
        """
        self.bounding_box = bounding_box
        self.transform = transform or NormalizationTransform.identity()
        self._query_count = 0
        self._lock = threading.Lock()

    @property
    def query_count(self) -> int:
        """Number of points evaluated so far."""
        return self._query_count

    @abstractmethod
    def _evaluate(self, points: FloatArray) -> FloatArray:
        """Distances for validated points of shape (N, 3)."""

    def query(self, points: ArrayLike) -> FloatArray:
        """Unsigned distance at each point.

        Args:
            points: Array of shape (N, 3) or (3,).

        Returns:
            Non-negative distances, shape (N,).

        Raises:
            InvalidInputError: If any coordinate is not finite.
        """
        pts = _as_points(points)
        if len(pts) <= QUERY_BLOCK:
            values = self._evaluate(pts)
        else:
            values = np.concatenate(
                [
                    self._evaluate(pts[i : i + QUERY_BLOCK])
                    for i in range(0, len(pts), QUERY_BLOCK)
                ]
            )
        with self._lock:
            self._query_count += len(pts)
        result: FloatArray = np.maximum(values, 0.0)
        return result

    def query_point(self, x: ArrayLike) -> float:
        """Unsigned distance at a single point."""
        return float(self.query(x)[0])

    def gradient(self, points: ArrayLike, h: float = 1e-4) -> FloatArray:
        """Central finite-difference gradient, not normalized.

        Args:
            points: Array of shape (N, 3) or (3,).
            h: Step per axis.

        Returns:
            Gradients, shape (N, 3).

        Raises:
            ParameterError: If h is not positive.
        """
        if not h > 0:
            raise ParameterError("h", h, "must be > 0")
        pts = _as_points(points)
        offsets = np.vstack([np.eye(3) * h, -np.eye(3) * h])
        stencil = (pts[:, None, :] + offsets[None, :, :]).reshape(-1, 3)
        values = self.query(stencil).reshape(-1, 6)
        grads: FloatArray = (values[:, :3] - values[:, 3:]) / (2.0 * h)
        return grads

    def gradient_at(self, x: ArrayLike, h: float = 1e-4) -> FloatArray:
        """Gradient at a single point, shape (3,)."""
        grad: FloatArray = self.gradient(x, h)[0]
        return grad


class AnalyticField(DistanceField):
    """Exact distance to a closed-form shape, with a reference tessellation."""

    name = "analytic"

    @abstractmethod
    def surface_mesh(self, resolution: int = 64) -> MixedMesh:
        """Triangulation of the true shape, for accuracy metrics."""


def _grid_mesh(
    surface: Any,
    nu: int,
    nv: int,
    wrap_u: bool = False,
    wrap_v: bool = False,
) -> tuple[FloatArray, IntArray]:
    """Triangulate a parametric patch surface(u, v) over [0, 1]^2."""
    us = np.linspace(0.0, 1.0, nu, endpoint=not wrap_u)
    vs = np.linspace(0.0, 1.0, nv, endpoint=not wrap_v)
    uu, vv = np.meshgrid(us, vs, indexing="ij")
    vertices = np.asarray(surface(uu.ravel(), vv.ravel()), dtype=np.float64)

    cu = nu if wrap_u else nu - 1
    cv = nv if wrap_v else nv - 1
    i, j = np.meshgrid(np.arange(cu), np.arange(cv), indexing="ij")
    i, j = i.ravel(), j.ravel()
    i1 = (i + 1) % nu
    j1 = (j + 1) % nv
    v00 = i * nv + j
    v10 = i1 * nv + j
    v01 = i * nv + j1
    v11 = i1 * nv + j1
    faces = np.concatenate(
        [np.stack([v00, v10, v11], axis=1), np.stack([v00, v11, v01], axis=1)]
    )
    return vertices, faces.astype(np.int64)


def _mesh(vertices: FloatArray, faces: IntArray) -> MixedMesh:
    return MixedMesh(
        vertices=vertices,
        triangles=faces,
        segments=np.zeros((0, 2), dtype=np.int64),
    )


def _merge_meshes(meshes: list[MixedMesh]) -> MixedMesh:
    vertices, faces, offset = [], [], 0
    for mesh in meshes:
        vertices.append(mesh.vertices)
        faces.append(mesh.triangles + offset)
        offset += len(mesh.vertices)
    return _mesh(np.vstack(vertices), np.vstack(faces))


def _square_distance(points: FloatArray, half: float, z0: float) -> FloatArray:
    """Distance to the square |x|,|y| <= half in the plane z = z0."""
    dx = np.maximum(np.abs(points[:, 0]) - half, 0.0)
    dy = np.maximum(np.abs(points[:, 1]) - half, 0.0)
    dz = points[:, 2] - z0
    dist: FloatArray = np.sqrt(dx * dx + dy * dy + dz * dz)
    return dist


def _square_mesh(half: float, z0: float, resolution: int) -> MixedMesh:
    def surface(u: FloatArray, v: FloatArray) -> FloatArray:
        return np.stack(
            [(2 * u - 1) * half, (2 * v - 1) * half, np.full_like(u, z0)], axis=1
        )

    return _mesh(*_grid_mesh(surface, resolution, resolution))


class SphereField(AnalyticField):
    """Unsigned distance to a sphere surface."""

    name = "sphere"

    def __init__(
        self, radius: float = 1.0, center: tuple[float, float, float] = (0.0, 0.0, 0.0)
    ) -> None:
        """Initialize the sphere.

        Args:
            radius: Sphere radius.
            center: Sphere center.
        """
        if not radius > 0:
            raise ParameterError("radius", radius, "must be > 0")
        self.radius = float(radius)
        self.center = np.asarray(center, dtype=np.float64)
        lo = self.center - radius
        hi = self.center + radius
        super().__init__(BoundingBox(tuple(lo.tolist()), tuple(hi.tolist())))  # type: ignore[arg-type]

    def _evaluate(self, points: FloatArray) -> FloatArray:
        dist: FloatArray = np.abs(np.linalg.norm(points - self.center, axis=1) - self.radius)
        return dist

    def surface_mesh(self, resolution: int = 64) -> MixedMesh:
        subdivisions = max(1, int(round(math.log2(max(resolution, 2)))) - 1)
        ico = trimesh.creation.icosphere(subdivisions=subdivisions, radius=self.radius)
        return _mesh(
            np.asarray(ico.vertices, dtype=np.float64) + self.center,
            np.asarray(ico.faces, dtype=np.int64),
        )


class PlaneField(AnalyticField):
    """Unsigned distance to the infinite plane z = height.

    The bounding box is a square of half-side `half_size` in that plane.
    """

    name = "plane"

    def __init__(self, height: float = 0.0, half_size: float = 1.0) -> None:
        """Initialize the plane.

        Args:
            height: z coordinate of the plane.
            half_size: Half-side of the square bounding region.
        """
        self.height = float(height)
        self.half_size = float(half_size)
        super().__init__(
            BoundingBox(
                (-self.half_size, -self.half_size, self.height),
                (self.half_size, self.half_size, self.height),
            )
        )

    def _evaluate(self, points: FloatArray) -> FloatArray:
        dist: FloatArray = np.abs(points[:, 2] - self.height)
        return dist

    def surface_mesh(self, resolution: int = 64) -> MixedMesh:
        return _square_mesh(self.half_size, self.height, resolution)


class DiskField(AnalyticField):
    """Unsigned distance to an open disk in the plane z = 0."""

    name = "disk"

    def __init__(self, radius: float = 0.5) -> None:
        """Initialize the disk.

        Args:
            radius: Disk radius.
        """
        if not radius > 0:
            raise ParameterError("radius", radius, "must be > 0")
        self.radius = float(radius)
        super().__init__(BoundingBox((-radius, -radius, 0.0), (radius, radius, 0.0)))

    def _evaluate(self, points: FloatArray) -> FloatArray:
        rho = np.hypot(points[:, 0], points[:, 1])
        outside = np.maximum(rho - self.radius, 0.0)
        dist: FloatArray = np.hypot(outside, points[:, 2])
        return dist

    def surface_mesh(self, resolution: int = 64) -> MixedMesh:
        radius = self.radius

        def surface(u: FloatArray, v: FloatArray) -> FloatArray:
            angle = 2 * np.pi * v
            return np.stack(
                [radius * u * np.cos(angle), radius * u * np.sin(angle), np.zeros_like(u)],
                axis=1,
            )

        return _mesh(*_grid_mesh(surface, resolution // 2 + 2, resolution, wrap_v=True))


class TorusField(AnalyticField):
    """Unsigned distance to a torus surface around the z axis."""

    name = "torus"

    def __init__(self, major: float = 0.5, minor: float = 0.2) -> None:
        """Initialize the torus.

        Args:
            major: Distance from the axis to the tube center.
            minor: Tube radius.
        """
        if not 0 < minor < major:
            raise ParameterError("minor", minor, f"must be in (0, major={major})")
        self.major = float(major)
        self.minor = float(minor)
        reach = major + minor
        super().__init__(BoundingBox((-reach, -reach, -minor), (reach, reach, minor)))

    def _evaluate(self, points: FloatArray) -> FloatArray:
        q = np.hypot(points[:, 0], points[:, 1]) - self.major
        dist: FloatArray = np.abs(np.hypot(q, points[:, 2]) - self.minor)
        return dist

    def surface_mesh(self, resolution: int = 64) -> MixedMesh:
        big, small = self.major, self.minor

        def surface(u: FloatArray, v: FloatArray) -> FloatArray:
            theta, phi = 2 * np.pi * u, 2 * np.pi * v
            ring = big + small * np.cos(phi)
            return np.stack(
                [ring * np.cos(theta), ring * np.sin(theta), small * np.sin(phi)], axis=1
            )

        return _mesh(
            *_grid_mesh(surface, resolution, max(resolution // 2, 8), wrap_u=True, wrap_v=True)
        )


class CylinderField(AnalyticField):
    """Unsigned distance to an open (uncapped) cylinder along the z axis."""

    name = "cylinder"

    def __init__(self, radius: float = 0.005, length: float = 0.8) -> None:
        """Initialize the cylinder.

        Args:
            radius: Tube radius.
            length: Tube length, centred on the origin.
        """
        if not radius > 0 or not length > 0:
            raise ParameterError("radius/length", (radius, length), "must be > 0")
        self.radius = float(radius)
        self.length = float(length)
        half = length / 2
        super().__init__(BoundingBox((-radius, -radius, -half), (radius, radius, half)))

    def _evaluate(self, points: FloatArray) -> FloatArray:
        radial = np.hypot(points[:, 0], points[:, 1]) - self.radius
        axial = np.maximum(np.abs(points[:, 2]) - self.length / 2, 0.0)
        dist: FloatArray = np.hypot(radial, axial)
        return dist

    def surface_mesh(self, resolution: int = 64) -> MixedMesh:
        radius, length = self.radius, self.length

        def surface(u: FloatArray, v: FloatArray) -> FloatArray:
            angle = 2 * np.pi * v
            return np.stack(
                [radius * np.cos(angle), radius * np.sin(angle), (u - 0.5) * length],
                axis=1,
            )

        return _mesh(*_grid_mesh(surface, resolution, 16, wrap_v=True))


class FinsField(AnalyticField):
    """Half-plane rectangles sharing the z axis (a non-manifold "book")."""

    name = "fins"

    def __init__(self, width: float = 0.5, height: float = 0.8, count: int = 3) -> None:
        """Initialize the fins.

        Args:
            width: Extent of each fin away from the shared axis.
            height: Extent along z, centred on the origin.
            count: Number of fins, evenly spread in angle.
        """
        if count < 1 or not width > 0 or not height > 0:
            raise ParameterError("fins", (width, height, count), "must be positive")
        self.width = float(width)
        self.height = float(height)
        self.count = int(count)
        angles = 2 * np.pi * np.arange(count) / count
        self._dirs = np.stack([np.cos(angles), np.sin(angles), np.zeros(count)], axis=1)
        self._perps = np.stack([-np.sin(angles), np.cos(angles), np.zeros(count)], axis=1)
        tips = self._dirs * width
        lo = np.minimum(tips.min(axis=0), 0.0)
        hi = np.maximum(tips.max(axis=0), 0.0)
        super().__init__(
            BoundingBox(
                (float(lo[0]), float(lo[1]), -height / 2),
                (float(hi[0]), float(hi[1]), height / 2),
            )
        )

    def _evaluate(self, points: FloatArray) -> FloatArray:
        t = points @ self._dirs.T
        w = points @ self._perps.T
        dt = t - np.clip(t, 0.0, self.width)
        z = points[:, 2:3]
        dz = z - np.clip(z, -self.height / 2, self.height / 2)
        dist: FloatArray = np.sqrt(w * w + dt * dt + dz * dz).min(axis=1)
        return dist

    def surface_mesh(self, resolution: int = 64) -> MixedMesh:
        meshes = []
        for direction in self._dirs:

            def surface(u: FloatArray, v: FloatArray, d: FloatArray = direction) -> FloatArray:
                return (u * self.width)[:, None] * d + np.stack(
                    [np.zeros_like(v), np.zeros_like(v), (v - 0.5) * self.height], axis=1
                )

            meshes.append(_mesh(*_grid_mesh(surface, resolution // 2 + 2, resolution)))
        return _merge_meshes(meshes)


class PlatesField(AnalyticField):
    """Two parallel squares at z = +-gap/2."""

    name = "plates"

    def __init__(self, gap: float = 0.2, size: float = 0.8) -> None:
        """Initialize the plates.

        Args:
            gap: Distance between the plates.
            size: Side length of each square.
        """
        if not gap > 0 or not size > 0:
            raise ParameterError("gap/size", (gap, size), "must be > 0")
        self.gap = float(gap)
        self.size = float(size)
        half = size / 2
        super().__init__(BoundingBox((-half, -half, -gap / 2), (half, half, gap / 2)))

    def _evaluate(self, points: FloatArray) -> FloatArray:
        half = self.size / 2
        dist: FloatArray = np.minimum(
            _square_distance(points, half, self.gap / 2),
            _square_distance(points, half, -self.gap / 2),
        )
        return dist

    def surface_mesh(self, resolution: int = 64) -> MixedMesh:
        half = self.size / 2
        return _merge_meshes(
            [
                _square_mesh(half, self.gap / 2, resolution),
                _square_mesh(half, -self.gap / 2, resolution),
            ]
        )


ANALYTIC_SHAPES: dict[str, type[AnalyticField]] = {
    cls.name: cls
    for cls in (
        SphereField,
        PlaneField,
        DiskField,
        TorusField,
        CylinderField,
        FinsField,
        PlatesField,
    )
}


def make_analytic(name: str, **params: float) -> AnalyticField:
    """Build a named analytic shape.

    Args:
        name: One of ANALYTIC_SHAPES.
        **params: Constructor parameters of that shape.

    Returns:
        The analytic field.

    Raises:
        InvalidInputError: If the name or a parameter is unknown.
    """
    cls = ANALYTIC_SHAPES.get(name)
    if cls is None:
        known = ", ".join(sorted(ANALYTIC_SHAPES))
        raise InvalidInputError(f"Unknown analytic shape {name!r} (known: {known})")
    try:
        return cls(**params)  # type: ignore[arg-type]
    except TypeError as e:
        raise InvalidInputError(f"Bad parameters for {name!r}: {e}") from e


class PointCloudField(DistanceField):
    """Distance to the nearest point of a point set, via a kd-tree."""

    def __init__(
        self, points: FloatArray, transform: NormalizationTransform | None = None
    ) -> None:
        """Initialize from points already in field coordinates.

        Args:
            points: Array of shape (N, 3), N >= 1.
            transform: Normalization that produced these coordinates.
        """
        pts = _as_points(points)
        if len(pts) == 0:
            raise InvalidInputError("Point cloud is empty")
        self.points = pts
        self._tree = cKDTree(pts)
        super().__init__(BoundingBox.from_points(pts), transform)

    def _evaluate(self, points: FloatArray) -> FloatArray:
        dist, _ = self._tree.query(points)
        return np.asarray(dist, dtype=np.float64)


class TriangleSoupField(DistanceField):
    """Exact distance to a triangle soup.

    The hierarchy is a kd-tree over triangle centroids plus each triangle's
    bounding radius: a first exact distance to the nearest-centroid triangle
    bounds the search ball, and every triangle whose centroid lies within
    that bound plus the largest bounding radius is tested exactly.
    """

    def __init__(
        self,
        vertices: FloatArray,
        triangles: IntArray,
        transform: NormalizationTransform | None = None,
    ) -> None:
        """Initialize from a vertex array and triangle indices.

        Args:
            vertices: Array of shape (V, 3) in field coordinates.
            triangles: Array of shape (F, 3), F >= 1.
            transform: Normalization that produced these coordinates.
        """
        verts = _as_points(vertices)
        tris = np.asarray(triangles, dtype=np.int64).reshape(-1, 3)
        if len(tris) == 0:
            raise InvalidInputError("Triangle soup has no faces")
        if tris.min() < 0 or tris.max() >= len(verts):
            raise InvalidInputError("Triangle indices out of range")
        self.vertices = verts
        self.triangles = tris
        self._a = verts[tris[:, 0]]
        self._b = verts[tris[:, 1]]
        self._c = verts[tris[:, 2]]
        centroids = (self._a + self._b + self._c) / 3.0
        self._bound = float(
            np.max(
                np.linalg.norm(
                    np.stack([self._a, self._b, self._c], axis=1) - centroids[:, None],
                    axis=2,
                )
            )
        )
        self._tree = cKDTree(centroids)
        super().__init__(BoundingBox.from_points(verts[np.unique(tris)]), transform)

    def _evaluate(self, points: FloatArray) -> FloatArray:
        _, nearest = self._tree.query(points)
        best = point_triangle_distances(
            points, self._a[nearest], self._b[nearest], self._c[nearest]
        )
        # Any closer triangle has its centroid within best + bound of the query
        candidates = self._tree.query_ball_point(points, best + self._bound + 1e-12)
        counts = np.fromiter((len(c) for c in candidates), dtype=np.int64, count=len(points))
        if counts.sum() == 0:
            return best
        rows = np.repeat(np.arange(len(points)), counts)
        cols = np.fromiter(
            (j for c in candidates for j in c), dtype=np.int64, count=int(counts.sum())
        )
        dist = point_triangle_distances(
            points[rows], self._a[cols], self._b[cols], self._c[cols]
        )
        np.minimum.at(best, rows, dist)
        return best


class GridField(DistanceField):
    """Trilinear interpolation of distances sampled on a regular grid.

    Outside the grid the value at the clamped point is increased by the
    distance to that point, which never underestimates the true distance.
    """

    def __init__(
        self,
        values: FloatArray,
        origin: tuple[float, float, float],
        spacing: tuple[float, float, float],
        transform: NormalizationTransform | None = None,
    ) -> None:
        """Initialize the grid.

        Args:
            values: Array of shape (nx, ny, nz), non-negative.
            origin: World position of node (0, 0, 0).
            spacing: Positive node spacing per axis.
            transform: Normalization the grid was brought into, if any.

        Raises:
            InvalidInputError: On negative values or bad geometry.
        """
        vals = np.asarray(values, dtype=np.float64)
        if vals.ndim != 3 or min(vals.shape) < 1:
            raise InvalidInputError(f"Grid values must be 3D, got shape {vals.shape}")
        if not np.all(np.isfinite(vals)) or vals.min() < 0:
            raise InvalidInputError("Grid values must be finite and non-negative")
        if any(not s > 0 for s in spacing):
            raise ParameterError("spacing", spacing, "must be > 0 on every axis")
        self.values = vals
        self.origin = tuple(float(o) for o in origin)
        self.spacing = tuple(float(s) for s in spacing)
        self.axes = [
            self.origin[k] + self.spacing[k] * np.arange(vals.shape[k]) for k in range(3)
        ]
        # Singleton axes are padded so the interpolator sees at least two nodes
        axes = [a if len(a) > 1 else np.array([a[0], a[0] + self.spacing[k]]) for k, a in enumerate(self.axes)]
        padded = vals
        for k in range(3):
            if vals.shape[k] == 1:
                padded = np.concatenate([padded, padded], axis=k)
        self._interp = RegularGridInterpolator(tuple(axes), padded, method="linear")
        lower = tuple(float(a[0]) for a in self.axes)
        upper = tuple(float(a[-1]) for a in self.axes)
        super().__init__(BoundingBox(lower, upper), transform)  # type: ignore[arg-type]

    @property
    def dims(self) -> tuple[int, int, int]:
        """Node counts per axis."""
        nx, ny, nz = self.values.shape
        return int(nx), int(ny), int(nz)

    def normalized(self, transform: NormalizationTransform | None = None) -> "GridField":
        """The same grid mapped into the unit cube.

        Args:
            transform: Normalization to use; fitted to the grid box when omitted.
        """
        box = self.bounding_box
        if transform is None:
            transform = NormalizationTransform.fit(np.vstack([box.lower_array, box.upper_array]))
        origin = transform.apply(np.asarray([self.origin]))[0]
        return GridField(
            self.values * transform.scale,
            (float(origin[0]), float(origin[1]), float(origin[2])),
            (self.spacing[0] * transform.scale, self.spacing[1] * transform.scale, self.spacing[2] * transform.scale),
            transform,
        )

    def _evaluate(self, points: FloatArray) -> FloatArray:
        lo = self.bounding_box.lower_array
        hi = self.bounding_box.upper_array
        clamped = np.clip(points, lo, hi)
        values = np.asarray(self._interp(clamped), dtype=np.float64)
        outside = np.linalg.norm(points - clamped, axis=1)
        result: FloatArray = values + outside
        return result


class QuasiMedialField(DistanceField):
    """Field max(MF - |SDF|, 0) built from a medial field and a signed field.

    Its zero set approximates a medial surface; it is treated as an imperfect
    unsigned distance field.
    """

    def __init__(self, medial: GridField, signed: GridField) -> None:
        """Initialize from two grids.

        Args:
            medial: Grid of the medial field (distance to the medial axis plus
                the local radius).
            signed: Grid of |SDF| values.
        """
        self.medial = medial
        self.signed = signed
        super().__init__(medial.bounding_box, medial.transform)

    def _evaluate(self, points: FloatArray) -> FloatArray:
        result: FloatArray = np.maximum(
            self.medial._evaluate(points) - np.abs(self.signed._evaluate(points)), 0.0
        )
        return result


def load_point_cloud(path: Path | str, normalize: bool = True) -> PointCloudField:
    """Load a point cloud (XYZ, OBJ vertices or PLY) as a distance field.

    Args:
        path: Input file.
        normalize: Map the points into the unit cube and record the transform.

    Returns:
        Nearest-point distance field.

    Raises:
        ParseError: On empty or malformed files.
    """
    points = formats.read_points(path)
    transform = NormalizationTransform.fit(points) if normalize else None
    if transform is not None:
        points = transform.apply(points)
    logger.info("Loaded %d points from %s", len(points), path)
    return PointCloudField(points, transform)


def load_triangle_soup(path: Path | str, normalize: bool = True) -> TriangleSoupField:
    """Load a triangle soup (OBJ or PLY) as an exact distance field.

    Args:
        path: Input file.
        normalize: Map the vertices into the unit cube and record the transform.

    Returns:
        Point-to-triangle distance field.

    Raises:
        ParseError: On malformed files, or when the file has no faces.
    """
    vertices, triangles = formats.read_triangles(path)
    if len(triangles) == 0:
        raise ParseError(path, "File has no faces; load it as a point cloud instead")
    used = vertices[np.unique(triangles)]
    transform = NormalizationTransform.fit(used) if normalize else None
    if transform is not None:
        vertices = transform.apply(vertices)
    logger.info("Loaded %d triangles from %s", len(triangles), path)
    return TriangleSoupField(vertices, triangles, transform)


def load_grid(path: Path | str, normalize: bool = True) -> GridField:
    """Load a grid-sampled field from the UDFGRID format.

    Args:
        path: Input file.
        normalize: Map the grid box into the unit cube, scaling the stored
            distances with it, and record the transform.

    Raises:
        FormatError: If the header and payload disagree.
    """
    values, origin, spacing = formats.read_grid(path)
    grid = GridField(values, origin, spacing)
    logger.info("Loaded %dx%dx%d grid from %s", *grid.dims, path)
    return grid.normalized() if normalize else grid


def load_quasi_medial(medial_path: Path | str, signed_path: Path | str) -> QuasiMedialField:
    """Load a medial grid and a signed grid into one quasi-medial field.

    Both grids share the normalization fitted to the medial grid box.
    """
    medial = load_grid(medial_path)
    signed = load_grid(signed_path, normalize=False).normalized(medial.transform)
    return QuasiMedialField(medial, signed)


def sample_to_grid(
    field: DistanceField, dims: tuple[int, int, int], margin: float = 0.0
) -> GridField:
    """Sample any field on a regular grid spanning its (expanded) bounding box.

    Args:
        field: Source field.
        dims: Node counts per axis (each >= 2).
        margin: Expansion of the bounding box on every side.

    Returns:
        The sampled grid field.
    """
    if min(dims) < 2:
        raise ParameterError("dims", dims, "need at least 2 nodes per axis")
    box = field.bounding_box.expanded(margin)
    lo, extent = box.lower_array, box.extent
    spacing = tuple(
        float(extent[k] / (dims[k] - 1)) if extent[k] > 0 else 1.0 for k in range(3)
    )
    axes = [lo[k] + spacing[k] * np.arange(dims[k]) for k in range(3)]
    xx, yy, zz = np.meshgrid(*axes, indexing="ij")
    nodes = np.stack([xx.ravel(), yy.ravel(), zz.ravel()], axis=1)
    values = field.query(nodes).reshape(dims)
    origin = (float(lo[0]), float(lo[1]), float(lo[2]))
    return GridField(values, origin, spacing)  # type: ignore[arg-type]
