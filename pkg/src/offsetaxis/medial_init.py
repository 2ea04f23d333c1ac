"""Initial medial spheres: shrinking balls and greedy coverage selection."""

import logging
from collections import deque

import numpy as np
from scipy.spatial import cKDTree

from offsetaxis.errors import InvalidInputError, ParameterError
from offsetaxis.models import (
    BoolArray,
    BoundingBox,
    CoverageResult,
    FloatArray,
    IntArray,
    MedialSphere,
    SampleGraph,
    SampleSet,
)
from offsetaxis.parallel import map_chunks

logger = logging.getLogger(__name__)

MAX_SHRINK_ITERATIONS = 30
SHRINK_SLACK = 1e-4


def default_initial_radius(samples: SampleSet) -> float:
    """Bounding-box diagonal of the samples (at least a tiny positive value)."""
    if len(samples) == 0:
        return 1.0
    return max(BoundingBox.from_points(samples.positions).diagonal, 1e-12)


def _shrink_rows(
    rows: IntArray,
    samples: SampleSet,
    tree: cKDTree,
    r_init: float,
) -> tuple[FloatArray, IntArray, BoolArray]:
    """Shrinking-ball iterations for the given sample rows, vectorized.

    Returns:
        (radii, partner sample per row or -1, converged flag per row).
    """
    n_total = len(samples)
    x = samples.positions[rows]
    normals = samples.normals[rows]
    slack = SHRINK_SLACK * r_init

    radius = np.full(len(rows), r_init)
    partner = np.full(len(rows), -1, dtype=np.int64)
    converged = np.zeros(len(rows), dtype=bool)
    active = np.ones(len(rows), dtype=bool)

    for _ in range(MAX_SHRINK_ITERATIONS):
        if not active.any():
            break
        idx = np.flatnonzero(active)
        centers = x[idx] - radius[idx, None] * normals[idx]
        dists, nbrs = tree.query(centers, k=2)
        take_second = nbrs[:, 0] == rows[idx]
        other = np.where(take_second, nbrs[:, 1], nbrs[:, 0])
        dist = np.where(take_second, dists[:, 1], dists[:, 0])

        # The only sample left is the ball's own: nothing else to touch
        missing = other >= n_total
        done = missing | (dist >= radius[idx] - slack)
        converged[idx[done]] = True
        active[idx[done]] = False

        move = idx[~done]
        if len(move) == 0:
            continue
        q = samples.positions[other[~done]]
        diff = x[move] - q
        denom = 2.0 * np.einsum("ij,ij->i", normals[move], diff)
        flat = denom <= 0
        # Locally flat: keep the last ball
        converged[move[flat]] = True
        active[move[flat]] = False

        update = move[~flat]
        radius[update] = np.einsum("ij,ij->i", diff[~flat], diff[~flat]) / denom[~flat]
        partner[update] = other[~done][~flat]

    return radius, partner, converged


def _make_spheres(
    rows: IntArray,
    samples: SampleSet,
    radius: FloatArray,
    partner: IntArray,
    converged: BoolArray,
    alpha: float,
) -> list[MedialSphere]:
    spheres = []
    for k, i in enumerate(rows.tolist()):
        x, n = samples.positions[i], samples.normals[i]
        flagged = bool(not converged[k] or partner[k] < 0)
        r = alpha if flagged else float(radius[k])
        seeds = (i, i) if flagged else (i, int(partner[k]))
        spheres.append(
            MedialSphere(center=x - r * n, radius=r, seed_samples=seeds, flagged=flagged)
        )
    return spheres


def shrinking_ball(
    index: int,
    samples: SampleSet,
    tree: cKDTree,
    r_init: float,
    alpha: float,
) -> MedialSphere:
    """Maximal ball tangent to one sample along its inward normal.

    Starting from radius r_init, the ball centered at x - r n shrinks to pass
    through the nearest other sample q until no sample lies inside it.

    Args:
        index: Sample index.
        samples: All samples (unit normals).
        tree: kd-tree over samples.positions.
        r_init: Starting radius, at least the sample-set diameter.
        alpha: Radius used when the ball is flagged.

    Returns:
        The ball, with seed_samples (index, q). Balls that never touched a
        second sample or did not converge are flagged and clamped to radius
        alpha with seed_samples (index, index).
    """
    rows = np.asarray([index], dtype=np.int64)
    radius, partner, converged = _shrink_rows(rows, samples, tree, r_init)
    return _make_spheres(rows, samples, radius, partner, converged, alpha)[0]


def shrink_all(
    samples: SampleSet,
    alpha: float,
    r_init: float | None = None,
    threads: int = 1,
) -> list[MedialSphere]:
    """One shrinking-ball candidate per sample, in sample order.

    Args:
        samples: Oriented samples.
        alpha: Offset level (radius of flagged balls).
        r_init: Starting radius; defaults to the bounding-box diagonal.
        threads: Worker cap.

    Returns:
        Candidates, candidate i belonging to sample i.
    """
    if not alpha > 0:
        raise ParameterError("alpha", alpha, "must be > 0")
    if len(samples) == 0:
        return []
    start = r_init if r_init is not None else default_initial_radius(samples)
    tree = cKDTree(samples.positions)

    def run(chunk: slice) -> list[MedialSphere]:
        rows = np.arange(chunk.start, chunk.stop, dtype=np.int64)
        radius, partner, converged = _shrink_rows(rows, samples, tree, start)
        return _make_spheres(rows, samples, radius, partner, converged, alpha)

    candidates = [s for part in map_chunks(run, len(samples), threads) for s in part]
    flagged = sum(1 for s in candidates if s.flagged)
    if flagged:
        logger.warning("%d of %d shrinking balls did not settle; clamped to alpha", flagged, len(candidates))
    return candidates


def select_spheres(
    candidates: list[MedialSphere],
    graph: SampleGraph,
    delta: float,
) -> CoverageResult:
    """Greedy coverage of the samples by dilated candidate spheres.

    Candidates are visited by decreasing radius (ties: lower sample index).
    A candidate whose own sample is still uncovered is selected; it covers
    every sample within radius + delta reachable by flood fill over the
    sample graph from its seed samples. Each selection covers at least its
    own sample, so the loop always terminates with every sample owned.

    Args:
        candidates: One candidate per sample.
        graph: Filtered sample graph.
        delta: Dilation added to the radius during coverage.

    Returns:
        Selected spheres (clusters filled with the samples they own) and the
        owning sphere of every sample.
    """
    if not delta > 0:
        raise ParameterError("delta", delta, "must be > 0")
    samples = graph.samples
    n = len(samples)
    if len(candidates) != n:
        raise InvalidInputError(f"Expected {n} candidates, got {len(candidates)}")

    indptr, indices = graph.neighbors()
    positions = samples.positions
    owner = np.full(n, -1, dtype=np.int64)
    covered = np.zeros(n, dtype=bool)
    order = sorted(range(n), key=lambda i: (-candidates[i].radius, i))
    selected: list[MedialSphere] = []

    for i in order:
        if covered[i]:
            continue
        candidate = candidates[i]
        number = len(selected)
        reach = candidate.radius + delta
        seeds = list(dict.fromkeys([i, *candidate.seed_samples]))
        visited = set(seeds)
        queue = deque(seeds)
        cluster: set[int] = set()
        while queue:
            u = queue.popleft()
            covered[u] = True
            if owner[u] < 0:
                owner[u] = number
                cluster.add(u)
            for v in indices[indptr[u] : indptr[u + 1]].tolist():
                if v in visited:
                    continue
                if np.linalg.norm(positions[v] - candidate.center) <= reach:
                    visited.add(v)
                    queue.append(v)
        selected.append(
            MedialSphere(
                center=candidate.center.copy(),
                radius=candidate.radius,
                seed_samples=candidate.seed_samples,
                cluster=cluster,
                flagged=candidate.flagged,
            )
        )

    logger.info("Selected %d spheres covering %d samples", len(selected), n)
    return CoverageResult(selected=selected, owner=owner)
