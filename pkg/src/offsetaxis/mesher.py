"""Dual mesh extraction: clique complex, UDF-scored thinning and cleanup."""

import heapq
import logging
import math
from collections import defaultdict
from collections.abc import Iterable
from pathlib import Path

import numpy as np

from offsetaxis import formats
from offsetaxis.errors import ParameterError, ThinningError
from offsetaxis.field import DistanceField
from offsetaxis.geometry import triangle_areas
from offsetaxis.models import (
    Edge,
    FloatArray,
    MedialComplex,
    MixedMesh,
    NormalizationTransform,
    SphereState,
    Tet,
    Triangle,
    tet_faces,
    triangle_edges,
)

logger = logging.getLogger(__name__)

DEGENERATE_FACE_AREA = 1e-12

# Barycentric quadrature points per supported rule
_QUADRATURE: dict[int, FloatArray] = {
    1: np.array([[1 / 3, 1 / 3, 1 / 3]]),
    3: np.array([[0.5, 0.5, 0.0], [0.0, 0.5, 0.5], [0.5, 0.0, 0.5]]),
    6: np.array(
        [
            [1.0, 0.0, 0.0],
            [0.0, 1.0, 0.0],
            [0.0, 0.0, 1.0],
            [0.5, 0.5, 0.0],
            [0.0, 0.5, 0.5],
            [0.5, 0.0, 0.5],
        ]
    ),
}


def build_complex(state: SphereState) -> MedialComplex:
    """Clique complex of the alive spheres' adjacency graph.

    Vertices are alive sphere centers (renumbered in sphere order), edges the
    adjacency pairs, triangles every 3-clique and tets every 4-clique.
    """
    live = np.flatnonzero(state.alive)
    remap = {int(s): k for k, s in enumerate(live.tolist())}
    edges: set[Edge] = set()
    for i, j in state.adjacency:
        if i in remap and j in remap:
            a, b = sorted((remap[i], remap[j]))
            edges.add((a, b))

    higher: dict[int, set[int]] = {v: set() for v in range(len(live))}
    for a, b in edges:
        higher[a].add(b)

    triangles: set[Triangle] = set()
    for a, b in sorted(edges):
        for c in higher[a] & higher[b]:
            triangles.add((a, b, c))
    tets: set[Tet] = set()
    for a, b, c in sorted(triangles):
        for d in higher[a] & higher[b] & higher[c]:
            tets.add((a, b, c, d))

    complex_ = MedialComplex(
        vertices=state.centers[live].copy(),
        radii=state.radii[live].copy(),
        edges=edges,
        triangles=triangles,
        tets=tets,
    )
    logger.info(
        "Clique complex: %d vertices, %d edges, %d triangles, %d tets",
        len(live),
        len(edges),
        len(triangles),
        len(tets),
    )
    return complex_


def face_scores(
    vertices: FloatArray,
    faces: list[Triangle],
    field: DistanceField,
    quadrature_n: int = 6,
) -> FloatArray:
    """Area integral of the field over each face.

    Area times the mean field value at the quadrature points; the 6-point
    rule uses the corners and edge midpoints. Faces with area <= 1e-12
    score 0.
    """
    weights = _QUADRATURE.get(quadrature_n)
    if weights is None:
        raise ParameterError("quadrature_n", quadrature_n, f"must be one of {sorted(_QUADRATURE)}")
    if not faces:
        return np.zeros(0)
    tri = np.asarray(faces, dtype=np.int64)
    corners = vertices[tri]
    points = np.einsum("qk,fkd->fqd", weights, corners).reshape(-1, 3)
    means = field.query(points).reshape(len(tri), len(weights)).mean(axis=1)
    areas = triangle_areas(vertices, tri)
    scores: FloatArray = np.where(areas > DEGENERATE_FACE_AREA, areas * means, 0.0)
    return scores


def face_score(corners: FloatArray, field: DistanceField, quadrature_n: int = 6) -> float:
    """Area integral of the field over one triangle given by its corners (3, 3)."""
    vertices = np.asarray(corners, dtype=np.float64).reshape(3, 3)
    return float(face_scores(vertices, [(0, 1, 2)], field, quadrature_n)[0])


# Faces count as coplanar for overlap tests when their normals are within 30 degrees
COPLANAR_COSINE = math.cos(math.radians(30.0))
# Corner sectors sharing less angle than this (radians) only touch
OVERLAP_TOLERANCE = math.radians(1.0)

# (tier, -score, face); tiers put degenerate faces first, then faces overlapping two or more others
FaceKey = tuple[int, float, Triangle]


def _unit_normals(vertices: FloatArray, faces: list[Triangle]) -> FloatArray:
    tri = np.asarray(faces, dtype=np.int64).reshape(-1, 3)
    corners = vertices[tri]
    normals = np.cross(corners[:, 1] - corners[:, 0], corners[:, 2] - corners[:, 0])
    lengths = np.linalg.norm(normals, axis=1, keepdims=True)
    unit: FloatArray = np.divide(normals, lengths, out=np.zeros_like(normals), where=lengths > 0)
    return unit


def _sector(
    origin: FloatArray,
    first: FloatArray,
    second: FloatArray,
    e1: FloatArray,
    e2: FloatArray,
) -> tuple[float, float] | None:
    """Angular sector (start, width) at origin toward two corners, measured in the plane (e1, e2)."""
    angles = []
    for corner in (first, second):
        d = corner - origin
        x, y = float(d @ e1), float(d @ e2)
        if math.hypot(x, y) <= DEGENERATE_FACE_AREA:
            return None
        angles.append(math.atan2(y, x))
    start, width = angles[0], (angles[1] - angles[0]) % math.tau
    if width > math.pi:
        start, width = angles[1], math.tau - width
    return start, width


def _arc_overlap(a: tuple[float, float], b: tuple[float, float]) -> float:
    """Shared angle of two arcs, each narrower than pi."""
    (sa, wa), (sb, wb) = a, b
    d = (sb - sa) % math.tau
    e = (sa - sb) % math.tau
    return max(min(wa - d, wb) if d < wa else 0.0, min(wb - e, wa) if e < wb else 0.0)


class _Thinning:
    """Working simplex sets, incidence maps and counters for one thinning run."""

    def __init__(
        self,
        complex_: MedialComplex,
        field: DistanceField,
        quadrature_n: int,
        check: bool,
    ) -> None:
        self.vertices = complex_.vertices
        self.radii = complex_.radii
        self.edges = set(complex_.edges)
        self.triangles = set(complex_.triangles)
        self.tets = set(complex_.tets)
        self.edge_faces = complex_.edge_faces()
        self.face_tets = complex_.face_tets()
        self.vertex_faces: dict[int, set[Triangle]] = defaultdict(set)
        for tri in self.triangles:
            for v in tri:
                self.vertex_faces[v].add(tri)

        ordered = sorted(self.triangles)
        tri = np.asarray(ordered, dtype=np.int64).reshape(-1, 3)
        self.score = dict(zip(ordered, face_scores(self.vertices, ordered, field, quadrature_n).tolist(), strict=True))
        self.area = dict(zip(ordered, triangle_areas(self.vertices, tri).tolist(), strict=True))
        self.normal = dict(zip(ordered, _unit_normals(self.vertices, ordered), strict=True))
        self.degenerate = {t for t in ordered if self.area[t] <= DEGENERATE_FACE_AREA}
        self.threshold = 0.0

        self.check = check
        self.chi = complex_.euler_characteristic
        self.steps = 0
        self.tet_collapses = 0
        self.face_collapses = 0
        self.forced_tets = 0
        self.forced_faces = 0
        if check and not complex_.is_closed():
            raise ThinningError(0, "input complex is not closed")

    def snapshot(self) -> MedialComplex:
        """The current complex."""
        return MedialComplex(
            vertices=self.vertices,
            radii=self.radii,
            edges=set(self.edges),
            triangles=set(self.triangles),
            tets=set(self.tets),
        )

    def _checkpoint(self, elementary: bool) -> None:
        self.steps += 1
        if not self.check:
            return
        current = self.snapshot()
        if not current.is_closed():
            raise ThinningError(self.steps, "complex is no longer closed")
        chi = current.euler_characteristic
        if elementary and chi != self.chi:
            raise ThinningError(self.steps, f"euler characteristic changed {self.chi} -> {chi}")
        if chi != self.chi:
            logger.debug("Forced removal at step %d: euler characteristic %d -> %d", self.steps, self.chi, chi)
        self.chi = chi

    def _remove_tet(self, tet: Tet) -> None:
        self.tets.discard(tet)
        for face in tet_faces(tet):
            self.face_tets[face].discard(tet)

    def _remove_face(self, tri: Triangle) -> None:
        self.triangles.discard(tri)
        self.face_tets.pop(tri, None)
        for edge in triangle_edges(tri):
            self.edge_faces[edge].discard(tri)
        for v in tri:
            self.vertex_faces[v].discard(tri)

    def _remove_edge(self, edge: Edge) -> None:
        self.edges.discard(edge)
        self.edge_faces.pop(edge, None)

    def collapse_tet(self, face: Triangle, tet: Tet) -> None:
        """Elementary collapse of a tet through its free face."""
        self._remove_tet(tet)
        self._remove_face(face)
        self.tet_collapses += 1
        self._checkpoint(elementary=True)

    def collapse_face(self, tri: Triangle, edge: Edge) -> None:
        """Elementary collapse of a face through its free edge."""
        self._remove_face(tri)
        self._remove_edge(edge)
        self.face_collapses += 1
        self._checkpoint(elementary=True)

    def force_face(self, tri: Triangle) -> set[Tet]:
        """Remove a face with every tet still holding it.

        Returns:
            The removed tets.
        """
        owners = set(self.face_tets.get(tri, ()))
        for tet in owners:
            self._remove_tet(tet)
        self._remove_face(tri)
        self.forced_tets += len(owners)
        if not owners:
            self.forced_faces += 1
        self._checkpoint(elementary=False)
        return owners

    def tet_key(self, face: Triangle) -> FaceKey:
        """Order for tet-face pairs: degenerate faces, then decreasing score."""
        return (0 if face in self.degenerate else 1, -self.score[face], face)

    def free_edge(self, tri: Triangle) -> Edge | None:
        """Smallest edge of tri that no other face uses."""
        free = [e for e in triangle_edges(tri) if len(self.edge_faces[e]) == 1]
        return min(free) if free else None

    def neighbours(self, tri: Triangle) -> set[Triangle]:
        """Faces sharing an edge with tri."""
        found: set[Triangle] = set()
        for edge in triangle_edges(tri):
            found |= self.edge_faces.get(edge, set())
        found.discard(tri)
        return found

    def overlap_count(self, tri: Triangle) -> int:
        """Number of nearly coplanar faces sharing a corner whose sector overlaps tri's."""
        if tri in self.degenerate:
            return 0
        normal = self.normal[tri]
        a, b = self.vertices[tri[0]], self.vertices[tri[1]]
        e1 = (b - a) / np.linalg.norm(b - a)
        e2 = np.cross(normal, e1)
        hits: set[Triangle] = set()
        for v in tri:
            mine = self._corner_sector(tri, v, e1, e2)
            if mine is None:
                continue
            for other in self.vertex_faces[v]:
                if other == tri or other in hits or other in self.degenerate:
                    continue
                if abs(float(self.normal[other] @ normal)) < COPLANAR_COSINE:
                    continue
                theirs = self._corner_sector(other, v, e1, e2)
                if theirs is not None and _arc_overlap(mine, theirs) > OVERLAP_TOLERANCE:
                    hits.add(other)
        return len(hits)

    def _corner_sector(
        self, tri: Triangle, v: int, e1: FloatArray, e2: FloatArray
    ) -> tuple[float, float] | None:
        first, second = (u for u in tri if u != v)
        return _sector(self.vertices[v], self.vertices[first], self.vertices[second], e1, e2)

    def _overlap_key(self, tri: Triangle, overlaps: int) -> FaceKey:
        if tri in self.degenerate:
            return (0, -self.score[tri], tri)
        return (1 if overlaps >= 2 else 2, -self.score[tri], tri)

    def face_candidate(self, tri: Triangle) -> FaceKey | None:
        """Heap key if tri may collapse through a free edge now, else None.

        A face qualifies when it has a free edge and is degenerate, scores
        above the offset threshold, or overlaps a coplanar neighbour.
        """
        if tri not in self.triangles or self.free_edge(tri) is None:
            return None
        overlaps = self.overlap_count(tri)
        if tri not in self.degenerate and overlaps == 0 and self.score[tri] <= self.threshold:
            return None
        return self._overlap_key(tri, overlaps)

    def pocket_candidate(self, tri: Triangle) -> FaceKey | None:
        """Heap key if tri sits on a non-manifold edge and overlaps a neighbour, else None."""
        if tri not in self.triangles:
            return None
        if all(len(self.edge_faces[e]) < 3 for e in triangle_edges(tri)):
            return None
        overlaps = self.overlap_count(tri)
        return self._overlap_key(tri, overlaps) if overlaps else None


def _collapse_tets(work: _Thinning) -> None:
    """Remove every tet: free tet-face pairs by decreasing face score, locked tets forced."""
    heap = [work.tet_key(f) for f, owners in work.face_tets.items() if len(owners) == 1]
    heapq.heapify(heap)
    while work.tets:
        if heap:
            _, _, face = heapq.heappop(heap)
            owners = work.face_tets.get(face)
            if owners is None or len(owners) != 1:
                continue
            (tet,) = owners
            work.collapse_tet(face, tet)
            exposed: list[Triangle] = list(tet_faces(tet))
        else:
            # Locked: take out the best-scoring face with the tets holding it
            face = min((f for t in work.tets for f in tet_faces(t)), key=work.tet_key)
            exposed = [f for t in work.force_face(face) for f in tet_faces(t)]
        for f in exposed:
            owners = work.face_tets.get(f)
            if owners is not None and len(owners) == 1:
                heapq.heappush(heap, work.tet_key(f))


def _collapse_faces(work: _Thinning, seeds: Iterable[Triangle]) -> None:
    """Collapse qualifying face-edge pairs, highest priority first, until none is left."""
    heap = [key for key in map(work.face_candidate, seeds) if key is not None]
    heapq.heapify(heap)
    while heap:
        popped = heapq.heappop(heap)
        tri = popped[2]
        current = work.face_candidate(tri)
        if current is None:
            continue
        if current != popped:
            heapq.heappush(heap, current)
            continue
        edge = work.free_edge(tri)
        if edge is None:
            continue
        work.collapse_face(tri, edge)
        for neighbour in work.neighbours(tri):
            key = work.face_candidate(neighbour)
            if key is not None:
                heapq.heappush(heap, key)


def _open_pockets(work: _Thinning) -> None:
    """Break overlapping layers glued along non-manifold edges, then resume face collapses."""
    heap = [key for key in map(work.pocket_candidate, sorted(work.triangles)) if key is not None]
    heapq.heapify(heap)
    while heap:
        popped = heapq.heappop(heap)
        tri = popped[2]
        current = work.pocket_candidate(tri)
        if current is None:
            continue
        if current != popped:
            heapq.heappush(heap, current)
            continue
        work.force_face(tri)
        _collapse_faces(work, work.neighbours(tri))


def thin(
    complex_: MedialComplex,
    field: DistanceField,
    alpha: float,
    quadrature_n: int = 6,
    check: bool = False,
) -> MedialComplex:
    """Collapse every tet, then redundant faces through their free edges.

    Tet-face pairs go first, highest face score first, lexicographic on ties;
    a configuration with no free tet face loses its best-scoring face together
    with the tets on it. Face-edge pairs follow in the same score order, with
    degenerate faces ahead of all others and faces overlapping two or more
    coplanar neighbours ahead of the rest. A face only collapses while it is
    degenerate, overlaps a coplanar neighbour, or scores above alpha times the
    mean face area, so genuine sheets with their rims stay. Overlapping faces
    left on non-manifold edges without a free edge are removed last, each
    followed by a new round of face collapses.

    Args:
        complex_: Closed clique complex.
        field: Field used for face scores.
        alpha: Offset level.
        quadrature_n: Quadrature rule for face scores.
        check: Verify closure after every step and the Euler characteristic
            after every elementary collapse.

    Returns:
        A new complex with no tets.

    Raises:
        ThinningError: With check on, when a step breaks an invariant.
    """
    work = _Thinning(complex_, field, quadrature_n, check)
    _collapse_tets(work)

    remaining = [work.area[t] for t in work.triangles]
    work.threshold = alpha * float(np.mean(remaining)) if remaining else 0.0
    _collapse_faces(work, sorted(work.triangles))
    _open_pockets(work)

    if work.forced_tets:
        logger.warning("Removed %d locked tets without a free face", work.forced_tets)
    if work.forced_faces:
        logger.warning("Removed %d overlapping faces on non-manifold edges", work.forced_faces)
    thinned = work.snapshot()
    logger.info(
        "Thinning: %d tet collapses, %d face collapses, euler characteristic %d -> %d",
        work.tet_collapses,
        work.face_collapses,
        complex_.euler_characteristic,
        thinned.euler_characteristic,
    )
    return thinned


def cleanup(complex_: MedialComplex) -> MixedMesh:
    """Final mixed mesh from a thinned complex.

    Edges without an incident triangle become curve segments, except chords
    whose two ends both lie on triangles; those are what face collapses leave
    across a sheet. Vertices used by nothing are dropped and the rest
    renumbered.
    """
    tri_edges = {e for t in complex_.triangles for e in triangle_edges(t)}
    tri_vertices = {v for t in complex_.triangles for v in t}
    loose = [e for e in complex_.edges if e not in tri_edges]
    segments = sorted(e for e in loose if not (e[0] in tri_vertices and e[1] in tri_vertices))
    if len(segments) < len(loose):
        logger.debug("Dropped %d chords between sheet vertices", len(loose) - len(segments))
    triangles = sorted(complex_.triangles)

    used = sorted(tri_vertices | {v for e in segments for v in e})
    if not used:
        return MixedMesh.empty()
    remap = {old: new for new, old in enumerate(used)}
    index = np.asarray(used, dtype=np.int64)
    return MixedMesh(
        vertices=complex_.vertices[index].copy(),
        triangles=np.array([[remap[v] for v in t] for t in triangles], dtype=np.int64).reshape(-1, 3),
        segments=np.array([[remap[v] for v in e] for e in segments], dtype=np.int64).reshape(-1, 2),
        radii=complex_.radii[index].copy(),
    )


def write_mesh(
    mesh: MixedMesh,
    path: Path | str,
    fmt: str | None = None,
    transform: NormalizationTransform | None = None,
) -> None:
    """Write a mixed mesh as OBJ or PLY in the input coordinate frame.

    Args:
        mesh: Cleaned mesh in normalized coordinates.
        path: Output file.
        fmt: "obj" or "ply"; inferred from the suffix when omitted.
        transform: Normalization to undo before writing.

    Raises:
        ParameterError: On an unknown format.
        OSError: If the file cannot be written.
    """
    kind = (fmt or Path(path).suffix.lstrip(".") or "obj").lower()
    if transform is not None and not transform.is_identity:
        radii = None if mesh.radii is None else np.asarray(transform.invert_length(mesh.radii))
        mesh = MixedMesh(
            vertices=transform.invert(mesh.vertices),
            triangles=mesh.triangles,
            segments=mesh.segments,
            radii=radii,
        )
    if kind == "obj":
        formats.write_obj(path, mesh)
    elif kind == "ply":
        formats.write_ply(path, mesh)
    else:
        raise ParameterError("format", kind, "must be 'obj' or 'ply'")
    logger.info("Wrote %d vertices to %s", len(mesh.vertices), path)
