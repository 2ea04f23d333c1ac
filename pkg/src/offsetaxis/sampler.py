"""Oriented sampling of the alpha level set of a distance field.

Random rays are sphere-traced through the expanded bounding box, every
crossing of phi = alpha is kept, the hits are Poisson-disk thinned, and
normals are fitted over a gradient-filtered kNN graph.
"""

import logging
import math

import numpy as np
from scipy.spatial import cKDTree

from offsetaxis.errors import EmptyResultError, InvalidInputError, ParameterError
from offsetaxis.field import DistanceField
from offsetaxis.models import BoundingBox, FloatArray, IntArray, SampleGraph, SampleSet
from offsetaxis.parallel import map_items

logger = logging.getLogger(__name__)

DEFAULT_K = 10
DEFAULT_ANGLE_THRESHOLD_DEG = 60.0
DEFAULT_N_RAYS = 200_000

MARCH_SAFETY = 0.9
BISECTION_STEPS = 20
MAX_MARCH_STEPS = 50_000
RAY_BATCH = 1000
SATURATION_BATCHES = 10


def hit_tolerance(alpha: float) -> float:
    """Allowed |phi - alpha| at an accepted hit."""
    return alpha * 1e-3


def march_rays(
    field: DistanceField,
    alpha: float,
    origins: FloatArray,
    directions: FloatArray,
    lengths: FloatArray,
) -> tuple[FloatArray, IntArray]:
    """Find every crossing of phi = alpha along a set of rays.

    All rays march together. Steps are max(0.9 |f|, eps/2) with f = phi - alpha;
    a hit is recorded when |f| <= eps, or when f changes sign between two
    steps (then refined by bisection). After a hit the ray keeps marching and
    may only record again once it has left the tolerance band.

    Args:
        field: Distance field.
        alpha: Offset level.
        origins: Ray origins, shape (R, 3).
        directions: Unit directions, shape (R, 3).
        lengths: Ray lengths, shape (R,).

    Returns:
        (hit points (H, 3), ray index per hit (H,)), ordered by ray then
        distance along the ray.
    """
    if not alpha > 0:
        raise ParameterError("alpha", alpha, "must be > 0")
    eps = hit_tolerance(alpha)
    s_min = eps / 2
    origins = np.asarray(origins, dtype=np.float64).reshape(-1, 3)
    directions = np.asarray(directions, dtype=np.float64).reshape(-1, 3)
    lengths = np.asarray(lengths, dtype=np.float64).reshape(-1)

    n = len(origins)
    t = np.zeros(n)
    f = field.query(origins) - alpha if n else np.zeros(0)
    armed = np.abs(f) > eps
    active = lengths > 0

    hit_rays: list[IntArray] = []
    hit_ts: list[FloatArray] = []

    def at(rays: IntArray, ts: FloatArray) -> FloatArray:
        result: FloatArray = origins[rays] + ts[:, None] * directions[rays]
        return result

    steps = 0
    while active.any():
        steps += 1
        if steps > MAX_MARCH_STEPS:
            logger.warning("Dropped %d rays that did not finish marching", int(active.sum()))
            break
        idx = np.flatnonzero(active)
        f_old = f[idx]
        t_old = t[idx]
        t_new = np.minimum(t_old + np.maximum(MARCH_SAFETY * np.abs(f_old), s_min), lengths[idx])
        f_new = field.query(at(idx, t_new)) - alpha

        was_armed = armed[idx]
        cross = was_armed & (f_old != 0) & (np.sign(f_new) != np.sign(f_old)) & (np.abs(f_new) > eps)
        band = was_armed & ~cross & (np.abs(f_new) <= eps)

        t_next = t_new.copy()
        f_next = f_new.copy()
        disarm = band.copy()

        if band.any():
            hit_rays.append(idx[band])
            hit_ts.append(t_new[band])

        if cross.any():
            rays = idx[cross]
            lo, hi, f_lo = t_old[cross], t_new[cross], f_old[cross]
            for _ in range(BISECTION_STEPS):
                mid = 0.5 * (lo + hi)
                f_mid = field.query(at(rays, mid)) - alpha
                same = np.sign(f_mid) == np.sign(f_lo)
                lo = np.where(same, mid, lo)
                f_lo = np.where(same, f_mid, f_lo)
                hi = np.where(same, hi, mid)
            t_hit = 0.5 * (lo + hi)
            f_hit = field.query(at(rays, t_hit)) - alpha
            good = np.abs(f_hit) <= eps
            if (~good).any():
                logger.debug("Discarded %d unresolved crossings", int((~good).sum()))
            hit_rays.append(rays[good])
            hit_ts.append(t_hit[good])
            # Resume from the crossing; the next step moves past it
            t_next[cross] = t_hit
            f_next[cross] = f_hit
            disarm |= cross

        t[idx] = t_next
        f[idx] = f_next
        armed[idx] = np.where(disarm, False, was_armed | (np.abs(f_next) > eps))
        active[idx] = t_next < lengths[idx]

    if not hit_rays:
        return np.zeros((0, 3)), np.zeros(0, dtype=np.int64)
    rays = np.concatenate(hit_rays)
    ts = np.concatenate(hit_ts)
    order = np.lexsort((ts, rays))
    return at(rays[order], ts[order]), rays[order].astype(np.int64)


def _random_box_points(rng: np.random.Generator, box: BoundingBox, count: int) -> FloatArray:
    """Area-uniform random points on the surface of a box."""
    lo, ext = box.lower_array, box.extent
    areas = np.array([ext[1] * ext[2], ext[0] * ext[2], ext[0] * ext[1]] * 2)
    faces = rng.choice(6, size=count, p=areas / areas.sum())
    points = lo + rng.random((count, 3)) * ext
    axis = faces % 3
    upper = faces >= 3
    rows = np.arange(count)
    points[rows, axis] = np.where(upper, lo[axis] + ext[axis], lo[axis])
    return points


def cast_rays(
    field: DistanceField,
    alpha: float,
    n_rays: int,
    rng_seed: int,
    r: float | None = None,
    threads: int = 1,
) -> FloatArray:
    """Cast random rays through the expanded bounding box and collect hits.

    Rays join two area-uniform random points on the faces of the bounding
    box grown by 2 alpha. They are cast in batches of 1000 with one random
    stream per batch; casting stops early once 10 consecutive batches add no
    hit in an unoccupied cell of side r/2.

    Args:
        field: Distance field.
        alpha: Offset level.
        n_rays: Maximum number of rays.
        rng_seed: Seed; identical seeds give identical hits.
        r: Poisson radius driving the saturation test (defaults to alpha).
        threads: Worker cap; the output does not depend on it.

    Returns:
        Hit points, shape (H, 3).

    Raises:
        ParameterError: If alpha <= 0 or n_rays < 1.
    """
    if not alpha > 0:
        raise ParameterError("alpha", alpha, "must be > 0")
    if n_rays < 1:
        raise ParameterError("n_rays", n_rays, "must be >= 1")
    box = field.bounding_box.expanded(2.0 * alpha)
    cell = (r if r is not None else alpha) / 2.0
    n_batches = math.ceil(n_rays / RAY_BATCH)

    def run_batch(batch: int) -> FloatArray:
        rng = np.random.default_rng([rng_seed, batch])
        count = min(RAY_BATCH, n_rays - batch * RAY_BATCH)
        start = _random_box_points(rng, box, count)
        end = _random_box_points(rng, box, count)
        chord = end - start
        lengths = np.linalg.norm(chord, axis=1)
        directions = np.divide(
            chord, lengths[:, None], out=np.zeros_like(chord), where=lengths[:, None] > 0
        )
        points, _ = march_rays(field, alpha, start, directions, lengths)
        return points

    occupied: set[tuple[int, int, int]] = set()
    collected: list[FloatArray] = []
    quiet = 0
    done = False
    wave = max(1, threads)
    for first in range(0, n_batches, wave):
        batches = range(first, min(first + wave, n_batches))
        for points in map_items(run_batch, batches, threads):
            collected.append(points)
            keys = {tuple(k) for k in np.floor(points / cell).astype(np.int64).tolist()}
            fresh = keys - occupied
            occupied |= fresh
            quiet = 0 if fresh else quiet + 1
            if quiet >= SATURATION_BATCHES:
                done = True
                break
        if done:
            break

    hits = np.vstack(collected) if collected else np.zeros((0, 3))
    if len(hits) == 0:
        logger.warning("No ray hit the alpha=%g level set; the field may exceed alpha everywhere", alpha)
    else:
        logger.info("Cast %d ray batches, %d hits", len(collected), len(hits))
    return hits


def poisson_thin_indices(points: FloatArray, r: float) -> IntArray:
    """Indices kept by greedy Poisson-disk thinning in input order.

    Each kept point removes every later point within r of it, so kept points
    are more than r apart and every removed point is within r of a kept one.
    """
    if not r > 0:
        raise ParameterError("r", r, "must be > 0")
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    if len(pts) == 0:
        return np.zeros(0, dtype=np.int64)
    tree = cKDTree(pts)
    removed = np.zeros(len(pts), dtype=bool)
    kept: list[int] = []
    for i in range(len(pts)):
        if removed[i]:
            continue
        kept.append(i)
        removed[tree.query_ball_point(pts[i], r)] = True
    return np.asarray(kept, dtype=np.int64)


def poisson_thin(points: FloatArray, r: float, alpha: float | None = None) -> FloatArray:
    """Well-spaced subset of points with pairwise distances >= r.

    Args:
        points: Candidate points, shape (N, 3).
        r: Poisson disk radius.
        alpha: Offset level, only used to warn when r > alpha.

    Returns:
        Retained points, in input order.
    """
    if alpha is not None and r > alpha:
        logger.warning("Poisson radius r=%g exceeds alpha=%g", r, alpha)
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    kept: FloatArray = pts[poisson_thin_indices(pts, r)]
    return kept


def _unit(vectors: FloatArray) -> FloatArray:
    norms = np.linalg.norm(vectors, axis=1, keepdims=True)
    unit: FloatArray = np.divide(vectors, norms, out=np.zeros_like(vectors), where=norms > 0)
    return unit


def build_sample_graph(
    samples: SampleSet,
    field: DistanceField | None = None,
    k: int = DEFAULT_K,
    angle_threshold_deg: float = DEFAULT_ANGLE_THRESHOLD_DEG,
    h: float = 1e-4,
) -> SampleGraph:
    """kNN graph of the samples, keeping edges between similar gradients.

    Args:
        samples: Samples with raw gradients.
        field: If given, gradients are re-evaluated on it with step h.
        k: Neighbours per sample (all pairs when there are <= k samples).
        angle_threshold_deg: Maximum angle between endpoint gradients.
        h: Finite-difference step when `field` is given.

    Returns:
        Symmetric, simple graph with edges (i, j), i < j.

    Raises:
        InvalidInputError: With fewer than 2 samples.
        ParameterError: If k < 3.
    """
    n = len(samples)
    if n < 2:
        raise InvalidInputError(f"Need at least 2 samples to build a graph, got {n}")
    if k < 3:
        raise ParameterError("k", k, "must be >= 3")
    if field is not None:
        samples = SampleSet(
            positions=samples.positions,
            normals=samples.normals,
            gradients=_unit(field.gradient(samples.positions, h)),
            weights=samples.weights,
        )

    if n <= k:
        i, j = np.triu_indices(n, k=1)
    else:
        _, nbrs = cKDTree(samples.positions).query(samples.positions, k=k + 1)
        i = np.repeat(np.arange(n), k + 1)
        j = nbrs.ravel()
        keep = i != j
        i, j = i[keep], j[keep]

    grads = _unit(samples.gradients)
    cos_limit = math.cos(math.radians(angle_threshold_deg))
    cosines = np.einsum("ij,ij->i", grads[i], grads[j])
    valid = (np.linalg.norm(grads[i], axis=1) > 0) & (np.linalg.norm(grads[j], axis=1) > 0)
    keep = valid & (cosines > cos_limit)
    pairs = np.sort(np.stack([i[keep], j[keep]], axis=1), axis=1)
    edges = np.unique(pairs, axis=0) if len(pairs) else np.zeros((0, 2), dtype=np.int64)
    return SampleGraph(samples=samples, edges=edges.astype(np.int64), k=k)


def estimate_normals(graph: SampleGraph) -> SampleSet:
    """Fit a plane to each sample and its graph neighbours.

    The normal is the eigenvector of the smallest eigenvalue of the
    neighbourhood covariance, signed to agree with the raw gradient. Samples
    with fewer than 2 neighbours keep their normalized gradient.

    Returns:
        A new SampleSet with updated normals.
    """
    samples = graph.samples
    n = len(samples)
    pos = samples.positions
    grads = _unit(samples.gradients)

    src = np.concatenate([graph.edges[:, 0], graph.edges[:, 1]])
    dst = np.concatenate([graph.edges[:, 1], graph.edges[:, 0]])
    offsets = pos[dst] - pos[src]
    count = np.bincount(src, minlength=n).astype(np.float64) + 1.0
    first = np.zeros((n, 3))
    second = np.zeros((n, 3, 3))
    np.add.at(first, src, offsets)
    np.add.at(second, src, offsets[:, :, None] * offsets[:, None, :])
    mean = first / count[:, None]
    cov = second / count[:, None, None] - mean[:, :, None] * mean[:, None, :]

    _, vectors = np.linalg.eigh(cov)
    normals = vectors[:, :, 0]
    flip = np.einsum("ij,ij->i", normals, grads) < 0
    normals[flip] *= -1.0

    sparse = count < 3.0
    has_grad = np.linalg.norm(grads, axis=1) > 0
    normals[sparse & has_grad] = grads[sparse & has_grad]
    normals = _unit(normals)
    return SampleSet(
        positions=pos.copy(),
        normals=normals,
        gradients=samples.gradients.copy(),
        weights=samples.weights.copy(),
    )


def sample_offset_surface(
    field: DistanceField,
    alpha: float,
    r: float,
    n_rays: int = DEFAULT_N_RAYS,
    seed: int = 0,
    k: int = DEFAULT_K,
    angle_threshold_deg: float = DEFAULT_ANGLE_THRESHOLD_DEG,
    threads: int = 1,
) -> SampleGraph:
    """Cast, thin, connect and orient: the full sampling stage.

    Returns:
        Sample graph whose samples carry fitted normals.

    Raises:
        EmptyResultError: If no ray reaches the level set.
    """
    hits = cast_rays(field, alpha, n_rays, seed, r=r, threads=threads)
    if len(hits) == 0:
        raise EmptyResultError(
            f"No samples on the alpha={alpha:g} level set; raise alpha or check the field"
        )
    points = poisson_thin(hits, r, alpha)
    gradients = field.gradient(points, alpha / 100.0)
    samples = SampleSet.from_positions(points, gradients)
    graph = build_sample_graph(samples, k=k, angle_threshold_deg=angle_threshold_deg)
    oriented = estimate_normals(graph)
    logger.info("Sampled %d points, %d graph edges", len(oriented), len(graph.edges))
    return SampleGraph(samples=oriented, edges=graph.edges, k=graph.k)
