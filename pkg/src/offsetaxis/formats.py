"""Readers and writers for point clouds, triangle soups, grids and meshes."""

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import trimesh

from offsetaxis.errors import FormatError, ParseError
from offsetaxis.models import FloatArray, IntArray, MixedMesh, SampleSet

GRID_MAGIC = "UDFGRID 1"
FLOAT_FORMAT = "{:.9g}"
TRIMESH_SUFFIXES = {".off", ".stl"}


def _fmt(value: float) -> str:
    return FLOAT_FORMAT.format(float(value))


def _suffix(path: Path | str) -> str:
    return Path(path).suffix.lower()


def _read_lines(path: Path | str) -> list[str]:
    try:
        with Path(path).open("r", encoding="utf-8") as f:
            return f.read().splitlines()
    except FileNotFoundError as e:
        raise ParseError(path, "File not found") from e
    except UnicodeDecodeError as e:
        raise ParseError(path, "Not a text file") from e


def _parse_floats(path: Path | str, line_no: int, tokens: list[str], count: int) -> list[float]:
    if len(tokens) < count:
        raise ParseError(path, f"Expected {count} numbers, got {len(tokens)}", line_no)
    try:
        values = [float(t) for t in tokens[:count]]
    except ValueError as e:
        raise ParseError(path, f"Malformed number in {' '.join(tokens)!r}", line_no) from e
    if not all(np.isfinite(values)):
        raise ParseError(path, "Non-finite coordinate", line_no)
    return values


# --- generic ascii PLY -------------------------------------------------------


@dataclass
class _PlyElement:
    """One element block of an ascii PLY file."""

    name: str
    count: int
    properties: list[str] = field(default_factory=list)
    list_properties: set[str] = field(default_factory=set)
    rows: list[list[str]] = field(default_factory=list)

    def column(self, name: str) -> int:
        return self.properties.index(name)


def _is_binary_ply(path: Path | str) -> bool:
    try:
        with Path(path).open("rb") as f:
            head = f.read(512)
    except FileNotFoundError as e:
        raise ParseError(path, "File not found") from e
    return b"format binary" in head


def _read_ascii_ply(path: Path | str) -> dict[str, _PlyElement]:
    """Parse an ascii PLY into element blocks of raw tokens."""
    lines = _read_lines(path)
    if not lines or lines[0].strip() != "ply":
        raise ParseError(path, "Missing 'ply' magic", 1)
    elements: list[_PlyElement] = []
    body_start = None
    for line_no, line in enumerate(lines[1:], start=2):
        tokens = line.split()
        if not tokens or tokens[0] in ("comment", "obj_info"):
            continue
        if tokens[0] == "format":
            if len(tokens) < 2 or tokens[1] != "ascii":
                raise ParseError(path, f"Unsupported PLY format {line!r}", line_no)
        elif tokens[0] == "element":
            if len(tokens) != 3:
                raise ParseError(path, f"Malformed element line {line!r}", line_no)
            try:
                elements.append(_PlyElement(tokens[1], int(tokens[2])))
            except ValueError as e:
                raise ParseError(path, f"Bad element count {tokens[2]!r}", line_no) from e
        elif tokens[0] == "property":
            if not elements:
                raise ParseError(path, "Property before any element", line_no)
            elements[-1].properties.append(tokens[-1])
            if len(tokens) > 1 and tokens[1] == "list":
                elements[-1].list_properties.add(tokens[-1])
        elif tokens[0] == "end_header":
            body_start = line_no
            break
        else:
            raise ParseError(path, f"Unexpected header line {line!r}", line_no)
    if body_start is None:
        raise ParseError(path, "Missing end_header")

    body = [(n, ln.split()) for n, ln in enumerate(lines[body_start:], start=body_start + 1)]
    body = [(n, t) for n, t in body if t]
    cursor = 0
    for element in elements:
        if cursor + element.count > len(body):
            raise ParseError(path, f"Element {element.name!r} is truncated", len(lines))
        for line_no, tokens in body[cursor : cursor + element.count]:
            if len(tokens) < len(element.properties):
                raise ParseError(path, f"Short {element.name} record", line_no)
            element.rows.append(tokens)
        cursor += element.count
    return {e.name: e for e in elements}


def _ply_columns(path: Path | str, element: _PlyElement, names: list[str]) -> FloatArray:
    try:
        cols = [element.column(n) for n in names]
    except ValueError as e:
        raise ParseError(path, f"Element {element.name!r} lacks {names}") from e
    try:
        data = np.array([[float(row[c]) for c in cols] for row in element.rows], dtype=np.float64)
    except ValueError as e:
        raise ParseError(path, f"Malformed number in element {element.name!r}") from e
    return data.reshape(-1, len(names))


def _ply_faces(path: Path | str, element: _PlyElement) -> IntArray:
    """Fan-triangulated faces of a face element (list property first)."""
    triangles: list[tuple[int, int, int]] = []
    for row in element.rows:
        try:
            count = int(row[0])
            idx = [int(v) for v in row[1 : 1 + count]]
        except (ValueError, IndexError) as e:
            raise ParseError(path, "Malformed face record") from e
        triangles.extend((idx[0], idx[i], idx[i + 1]) for i in range(1, count - 1))
    return np.array(triangles, dtype=np.int64).reshape(-1, 3)


def _trimesh_load(path: Path | str) -> tuple[FloatArray, IntArray]:
    """Vertices and faces through trimesh (binary PLY and anything else)."""
    try:
        loaded = trimesh.load(str(path), process=False)
    except Exception as e:  # trimesh raises a variety of types
        raise ParseError(path, f"Could not read mesh: {e}") from e
    vertices = np.asarray(getattr(loaded, "vertices", np.zeros((0, 3))), dtype=np.float64)
    faces = np.asarray(getattr(loaded, "faces", np.zeros((0, 3))), dtype=np.int64)
    return vertices.reshape(-1, 3), faces.reshape(-1, 3)


# --- OBJ ----------------------------------------------------------------------


def _read_obj(path: Path | str) -> tuple[FloatArray, IntArray, IntArray]:
    """Vertices, fan-triangulated faces and line segments of an OBJ file."""
    vertices: list[list[float]] = []
    faces: list[tuple[int, int, int]] = []
    segments: list[tuple[int, int]] = []

    def index(token: str, line_no: int) -> int:
        try:
            i = int(token.split("/")[0])
        except ValueError as e:
            raise ParseError(path, f"Malformed index {token!r}", line_no) from e
        resolved = i - 1 if i > 0 else len(vertices) + i
        if not 0 <= resolved < len(vertices) or i == 0:
            raise ParseError(path, f"Index {i} out of range", line_no)
        return resolved

    for line_no, line in enumerate(_read_lines(path), start=1):
        tokens = line.split()
        if not tokens or tokens[0].startswith("#"):
            continue
        if tokens[0] == "v":
            vertices.append(_parse_floats(path, line_no, tokens[1:], 3))
        elif tokens[0] == "f":
            idx = [index(t, line_no) for t in tokens[1:]]
            if len(idx) < 3:
                raise ParseError(path, "Face needs at least 3 vertices", line_no)
            faces.extend((idx[0], idx[i], idx[i + 1]) for i in range(1, len(idx) - 1))
        elif tokens[0] == "l":
            idx = [index(t, line_no) for t in tokens[1:]]
            segments.extend(zip(idx[:-1], idx[1:], strict=False))
    return (
        np.array(vertices, dtype=np.float64).reshape(-1, 3),
        np.array(faces, dtype=np.int64).reshape(-1, 3),
        np.array(segments, dtype=np.int64).reshape(-1, 2),
    )


# --- public readers -----------------------------------------------------------


def read_points(path: Path | str) -> FloatArray:
    """Read a point list from XYZ, OBJ (`v` records) or PLY.

    Returns:
        Points, shape (N, 3), N >= 1.

    Raises:
        ParseError: On malformed records (with line number) or an empty file.
    """
    suffix = _suffix(path)
    if suffix == ".obj":
        points, _, _ = _read_obj(path)
    elif suffix == ".ply":
        if _is_binary_ply(path):
            points, _ = _trimesh_load(path)
        else:
            elements = _read_ascii_ply(path)
            if "vertex" not in elements:
                raise ParseError(path, "No vertex element")
            points = _ply_columns(path, elements["vertex"], ["x", "y", "z"])
    elif suffix in TRIMESH_SUFFIXES:
        points, _ = _trimesh_load(path)
    else:
        rows = []
        for line_no, line in enumerate(_read_lines(path), start=1):
            tokens = line.replace(",", " ").split()
            if not tokens or tokens[0].startswith("#"):
                continue
            rows.append(_parse_floats(path, line_no, tokens, 3))
        points = np.array(rows, dtype=np.float64).reshape(-1, 3)
    if len(points) == 0:
        raise ParseError(path, "No points found")
    return points


def read_triangles(path: Path | str) -> tuple[FloatArray, IntArray]:
    """Read a triangle soup from OBJ or PLY; larger faces are fan-triangulated.

    Returns:
        (vertices (V, 3), triangles (F, 3)); F may be 0.
    """
    suffix = _suffix(path)
    if suffix == ".obj":
        vertices, triangles, _ = _read_obj(path)
    elif suffix == ".ply":
        if _is_binary_ply(path):
            vertices, triangles = _trimesh_load(path)
        else:
            elements = _read_ascii_ply(path)
            if "vertex" not in elements:
                raise ParseError(path, "No vertex element")
            vertices = _ply_columns(path, elements["vertex"], ["x", "y", "z"])
            triangles = (
                _ply_faces(path, elements["face"])
                if "face" in elements
                else np.zeros((0, 3), dtype=np.int64)
            )
    elif suffix in TRIMESH_SUFFIXES:
        vertices, triangles = _trimesh_load(path)
    else:
        raise ParseError(path, f"Unsupported triangle soup format {suffix!r}")
    if len(triangles) and (triangles.min() < 0 or triangles.max() >= len(vertices)):
        raise ParseError(path, "Face index out of range")
    return vertices, triangles


def read_mesh(path: Path | str) -> MixedMesh:
    """Read a mixed mesh (triangles + segments) from OBJ or PLY."""
    suffix = _suffix(path)
    if suffix == ".obj":
        vertices, triangles, segments = _read_obj(path)
        return MixedMesh(vertices=vertices, triangles=triangles, segments=segments)
    if suffix in TRIMESH_SUFFIXES:
        vertices, triangles = _trimesh_load(path)
        return MixedMesh(vertices, triangles, np.zeros((0, 2), dtype=np.int64))
    if suffix != ".ply":
        raise ParseError(path, f"Unsupported mesh format {suffix!r}")
    if _is_binary_ply(path):
        vertices, triangles = _trimesh_load(path)
        return MixedMesh(vertices, triangles, np.zeros((0, 2), dtype=np.int64))
    elements = _read_ascii_ply(path)
    if "vertex" not in elements:
        raise ParseError(path, "No vertex element")
    vertex = elements["vertex"]
    vertices = _ply_columns(path, vertex, ["x", "y", "z"])
    radii = _ply_columns(path, vertex, ["radius"])[:, 0] if "radius" in vertex.properties else None
    triangles = (
        _ply_faces(path, elements["face"]) if "face" in elements else np.zeros((0, 3), dtype=np.int64)
    )
    segments = (
        _ply_columns(path, elements["edge"], ["vertex1", "vertex2"]).astype(np.int64)
        if "edge" in elements
        else np.zeros((0, 2), dtype=np.int64)
    )
    return MixedMesh(vertices=vertices, triangles=triangles, segments=segments, radii=radii)


# --- grids --------------------------------------------------------------------


def read_grid(
    path: Path | str,
) -> tuple[FloatArray, tuple[float, float, float], tuple[float, float, float]]:
    """Read a UDFGRID file.

    Format: four ascii header lines (magic, dims, origin, spacing) followed by
    nx*ny*nz little-endian float32 values, x fastest.

    Returns:
        (values (nx, ny, nz), origin, spacing).

    Raises:
        FormatError: If the header is malformed or the payload size is wrong.
    """
    try:
        data = Path(path).read_bytes()
    except FileNotFoundError as e:
        raise ParseError(path, "File not found") from e

    header: list[list[str]] = []
    cursor = 0
    for line_no in range(1, 5):
        end = data.find(b"\n", cursor)
        if end < 0:
            raise FormatError(path, "Truncated header", line_no)
        try:
            header.append(data[cursor:end].decode("ascii").split())
        except UnicodeDecodeError as e:
            raise FormatError(path, "Header is not ascii", line_no) from e
        cursor = end + 1

    if " ".join(header[0]) != GRID_MAGIC:
        raise FormatError(path, f"Expected {GRID_MAGIC!r}", 1)
    expected_keys = ("dims", "origin", "spacing")
    for line_no, (tokens, key) in enumerate(zip(header[1:], expected_keys, strict=True), start=2):
        if len(tokens) != 4 or tokens[0] != key:
            raise FormatError(path, f"Expected '{key} a b c'", line_no)
    try:
        dims = tuple(int(t) for t in header[1][1:])
        origin = tuple(float(t) for t in header[2][1:])
        spacing = tuple(float(t) for t in header[3][1:])
    except ValueError as e:
        raise FormatError(path, "Malformed header number") from e
    if any(d < 1 for d in dims):
        raise FormatError(path, f"Dimensions must be positive, got {dims}", 2)

    payload = data[cursor:]
    count = dims[0] * dims[1] * dims[2]
    if len(payload) != 4 * count:
        raise FormatError(
            path, f"Header declares {count} values but payload holds {len(payload) / 4:g}"
        )
    flat = np.frombuffer(payload, dtype="<f4").astype(np.float64)
    values = flat.reshape(dims[2], dims[1], dims[0]).transpose(2, 1, 0)
    return np.ascontiguousarray(values), origin, spacing  # type: ignore[return-value]


def write_grid(
    path: Path | str,
    values: FloatArray,
    origin: tuple[float, ...],
    spacing: tuple[float, ...],
) -> None:
    """Write a UDFGRID file (see read_grid)."""
    nx, ny, nz = values.shape
    header = (
        f"{GRID_MAGIC}\n"
        f"dims {nx} {ny} {nz}\n"
        f"origin {' '.join(_fmt(o) for o in origin)}\n"
        f"spacing {' '.join(_fmt(s) for s in spacing)}\n"
    )
    payload = np.ascontiguousarray(values.transpose(2, 1, 0)).astype("<f4").tobytes()
    with Path(path).open("wb") as f:
        f.write(header.encode("ascii"))
        f.write(payload)


# --- meshes -------------------------------------------------------------------


def write_obj(path: Path | str, mesh: MixedMesh) -> None:
    """Write `v`, `f` and `l` records (1-based indices)."""
    lines = [f"v {_fmt(x)} {_fmt(y)} {_fmt(z)}" for x, y, z in mesh.vertices.tolist()]
    lines += [f"f {a + 1} {b + 1} {c + 1}" for a, b, c in mesh.triangles.tolist()]
    lines += [f"l {a + 1} {b + 1}" for a, b in mesh.segments.tolist()]
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""), encoding="ascii")


def write_ply(path: Path | str, mesh: MixedMesh) -> None:
    """Write an ascii PLY with vertex (x, y, z, radius), face and edge elements."""
    radii = mesh.radii if mesh.radii is not None else np.zeros(len(mesh.vertices))
    header = [
        "ply",
        "format ascii 1.0",
        f"element vertex {len(mesh.vertices)}",
        "property float x",
        "property float y",
        "property float z",
        "property float radius",
        f"element face {len(mesh.triangles)}",
        "property list uchar int vertex_indices",
        f"element edge {len(mesh.segments)}",
        "property int vertex1",
        "property int vertex2",
        "end_header",
    ]
    body = [
        f"{_fmt(x)} {_fmt(y)} {_fmt(z)} {_fmt(r)}"
        for (x, y, z), r in zip(mesh.vertices.tolist(), radii.tolist(), strict=True)
    ]
    body += [f"3 {a} {b} {c}" for a, b, c in mesh.triangles.tolist()]
    body += [f"{a} {b}" for a, b in mesh.segments.tolist()]
    Path(path).write_text("\n".join(header + body) + "\n", encoding="ascii")


# --- debug dumps --------------------------------------------------------------

_SAMPLE_PROPERTIES = ["x", "y", "z", "nx", "ny", "nz", "gx", "gy", "gz", "weight"]


def write_samples_ply(path: Path | str, samples: SampleSet) -> None:
    """Dump oriented samples as an ascii PLY with normal properties."""
    header = ["ply", "format ascii 1.0", f"element vertex {len(samples)}"]
    header += [f"property float {p}" for p in _SAMPLE_PROPERTIES]
    header.append("end_header")
    table = np.hstack(
        [samples.positions, samples.normals, samples.gradients, samples.weights[:, None]]
    )
    body = [" ".join(_fmt(v) for v in row) for row in table.tolist()]
    Path(path).write_text("\n".join(header + body) + "\n", encoding="ascii")


def read_samples_ply(path: Path | str) -> SampleSet:
    """Read a sample dump written by write_samples_ply.

    Files lacking gradient or weight properties get the normals and unit
    weights instead.
    """
    elements = _read_ascii_ply(path)
    if "vertex" not in elements:
        raise ParseError(path, "No vertex element")
    vertex = elements["vertex"]
    positions = _ply_columns(path, vertex, ["x", "y", "z"])
    normals = _ply_columns(path, vertex, ["nx", "ny", "nz"])
    gradients = (
        _ply_columns(path, vertex, ["gx", "gy", "gz"]) if "gx" in vertex.properties else normals.copy()
    )
    weights = (
        _ply_columns(path, vertex, ["weight"])[:, 0]
        if "weight" in vertex.properties
        else np.ones(len(positions))
    )
    return SampleSet(positions=positions, normals=normals, gradients=gradients, weights=weights)


def write_spheres(path: Path | str, centers: FloatArray, radii: FloatArray) -> None:
    """Dump spheres as `c_x c_y c_z r` lines."""
    lines = [
        f"{_fmt(c[0])} {_fmt(c[1])} {_fmt(c[2])} {_fmt(r)}"
        for c, r in zip(centers.tolist(), radii.tolist(), strict=True)
    ]
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""), encoding="ascii")


def read_spheres(path: Path | str) -> tuple[FloatArray, FloatArray]:
    """Read a sphere dump; returns (centers (M, 3), radii (M,))."""
    rows = []
    for line_no, line in enumerate(_read_lines(path), start=1):
        tokens = line.split()
        if not tokens or tokens[0].startswith("#"):
            continue
        rows.append(_parse_floats(path, line_no, tokens, 4))
    table = np.array(rows, dtype=np.float64).reshape(-1, 4)
    return table[:, :3], table[:, 3]


def write_energy_log(path: Path | str, rows: list[tuple[int, float, int, int]]) -> None:
    """Write the per-iteration optimizer log as CSV."""
    with Path(path).open("w", newline="", encoding="ascii") as f:
        writer = csv.writer(f)
        writer.writerow(["iter", "total_energy", "changed_assignments", "active_spheres"])
        for it, energy, changed, active in rows:
            writer.writerow([it, repr(float(energy)), changed, active])
