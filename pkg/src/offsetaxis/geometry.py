"""Vectorized distance kernels for points, segments and triangles."""

import numpy as np

from offsetaxis.models import FloatArray, IntArray

# Squared double-area below which a triangle is treated as a segment/point
DEGENERATE_AREA2 = 1e-24


def _dot(u: FloatArray, v: FloatArray) -> FloatArray:
    return np.einsum("ij,ij->i", u, v)


def closest_points_on_segments(
    points: FloatArray, a: FloatArray, b: FloatArray
) -> FloatArray:
    """Closest point on segment [a_i, b_i] to points_i, row by row.

    Zero-length segments collapse to their endpoint.
    """
    ab = b - a
    denom = _dot(ab, ab)
    t = np.divide(_dot(points - a, ab), denom, out=np.zeros_like(denom), where=denom > 0)
    t = np.clip(t, 0.0, 1.0)
    result: FloatArray = a + t[:, None] * ab
    return result


def closest_points_on_triangles(
    points: FloatArray, a: FloatArray, b: FloatArray, c: FloatArray
) -> FloatArray:
    """Closest point on triangle (a_i, b_i, c_i) to points_i, row by row.

    Voronoi-region classification of the query against vertices, edges and
    the face interior. Degenerate triangles fall back to the nearest of
    their three edges.

    Args:
        points: Query points, shape (N, 3).
        a: First vertices, shape (N, 3).
        b: Second vertices, shape (N, 3).
        c: Third vertices, shape (N, 3).

    Returns:
        Closest points, shape (N, 3).
    """
    points = np.asarray(points, dtype=np.float64)
    n = len(points)
    result = np.empty((n, 3))
    done = np.zeros(n, dtype=bool)

    ab = b - a
    ac = c - a
    normal = np.cross(ab, ac)
    degenerate = _dot(normal, normal) <= DEGENERATE_AREA2
    if degenerate.any():
        idx = np.flatnonzero(degenerate)
        p = points[idx]
        candidates = np.stack(
            [
                closest_points_on_segments(p, a[idx], b[idx]),
                closest_points_on_segments(p, b[idx], c[idx]),
                closest_points_on_segments(p, a[idx], c[idx]),
            ],
            axis=1,
        )
        d2 = np.sum((candidates - p[:, None, :]) ** 2, axis=2)
        best = np.argmin(d2, axis=1)
        result[idx] = candidates[np.arange(len(idx)), best]
        done[idx] = True

    ap = points - a
    d1 = _dot(ab, ap)
    d2 = _dot(ac, ap)
    m = ~done & (d1 <= 0) & (d2 <= 0)
    result[m] = a[m]
    done |= m

    bp = points - b
    d3 = _dot(ab, bp)
    d4 = _dot(ac, bp)
    m = ~done & (d3 >= 0) & (d4 <= d3)
    result[m] = b[m]
    done |= m

    vc = d1 * d4 - d3 * d2
    m = ~done & (vc <= 0) & (d1 >= 0) & (d3 <= 0)
    if m.any():
        v = d1[m] / (d1[m] - d3[m])
        result[m] = a[m] + v[:, None] * ab[m]
    done |= m

    cp = points - c
    d5 = _dot(ab, cp)
    d6 = _dot(ac, cp)
    m = ~done & (d6 >= 0) & (d5 <= d6)
    result[m] = c[m]
    done |= m

    vb = d5 * d2 - d1 * d6
    m = ~done & (vb <= 0) & (d2 >= 0) & (d6 <= 0)
    if m.any():
        w = d2[m] / (d2[m] - d6[m])
        result[m] = a[m] + w[:, None] * ac[m]
    done |= m

    va = d3 * d6 - d5 * d4
    m = ~done & (va <= 0) & ((d4 - d3) >= 0) & ((d5 - d6) >= 0)
    if m.any():
        w = (d4[m] - d3[m]) / ((d4[m] - d3[m]) + (d5[m] - d6[m]))
        result[m] = b[m] + w[:, None] * (c[m] - b[m])
    done |= m

    m = ~done
    if m.any():
        denom = 1.0 / (va[m] + vb[m] + vc[m])
        v = vb[m] * denom
        w = vc[m] * denom
        result[m] = a[m] + v[:, None] * ab[m] + w[:, None] * ac[m]
    return result


def point_triangle_distances(
    points: FloatArray, a: FloatArray, b: FloatArray, c: FloatArray
) -> FloatArray:
    """Row-wise Euclidean distance from points_i to triangle i."""
    closest = closest_points_on_triangles(points, a, b, c)
    distances: FloatArray = np.linalg.norm(points - closest, axis=1)
    return distances


def triangle_areas(vertices: FloatArray, triangles: IntArray) -> FloatArray:
    """Area of every triangle of an indexed mesh."""
    if len(triangles) == 0:
        return np.zeros(0)
    a = vertices[triangles[:, 0]]
    b = vertices[triangles[:, 1]]
    c = vertices[triangles[:, 2]]
    areas: FloatArray = 0.5 * np.linalg.norm(np.cross(b - a, c - a), axis=1)
    return areas
