"""Alternating sphere/cluster optimization of the SQEM + line-quadric energy.

For a sample (x, n) and a sphere s = (c, r) the per-sample energy is

    (n . (x - c) - r)^2 + mu * |(I - n n^T)(c - x)|^2

written as the quadric 1/2 s^T A s - b^T s + c. Quadrics of a cluster add
up, so the best sphere of a cluster is a single 4x4 solve.
"""

import logging
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
from scipy.spatial import cKDTree

from offsetaxis import formats
from offsetaxis.errors import InvalidInputError, OptimizationError, ParameterError
from offsetaxis.models import (
    BoolArray,
    CoverageResult,
    Edge,
    FitStatus,
    FloatArray,
    IntArray,
    MedialSphere,
    OrientedSample,
    SampleGraph,
    SampleSet,
    SphereState,
)
from offsetaxis.parallel import map_chunks

logger = logging.getLogger(__name__)

DEFAULT_MU = 0.2
DEFAULT_TOL = 1e-10
DEFAULT_MAX_ITERS = 150
RADIUS_BOUND_FACTOR = 1.5
RANK_TOLERANCE = 1e-10
ENERGY_INCREASE_LIMIT = 1e-6

EnergyRow = tuple[int, float, int, int]


@dataclass(frozen=True, eq=False)
class QuadricSystem:
    """Quadric energy 1/2 s^T A s - b^T s + c over spheres s = (c_x, c_y, c_z, r)."""

    A: FloatArray
    b: FloatArray
    c: float

    @classmethod
    def zero(cls) -> "QuadricSystem":
        """The quadric that is zero everywhere."""
        return cls(A=np.zeros((4, 4)), b=np.zeros(4), c=0.0)

    def __add__(self, other: "QuadricSystem") -> "QuadricSystem":
        return QuadricSystem(A=self.A + other.A, b=self.b + other.b, c=self.c + other.c)

    def scaled(self, factor: float) -> "QuadricSystem":
        """The quadric multiplied by a scalar."""
        return QuadricSystem(A=self.A * factor, b=self.b * factor, c=self.c * factor)

    def energy(self, center: FloatArray, radius: float) -> float:
        """Energy of the sphere (center, radius)."""
        s = np.append(np.asarray(center, dtype=np.float64), radius)
        return float(0.5 * s @ self.A @ s - self.b @ s + self.c)


def _sample_arrays(sample: OrientedSample) -> tuple[FloatArray, FloatArray]:
    return np.asarray(sample.position, dtype=np.float64), np.asarray(sample.normal, dtype=np.float64)


def sqem_term(sample: OrientedSample) -> QuadricSystem:
    """Squared distance from a sphere to the sample's tangent plane.

    With n~ = [n, 1]: A = 2 n~ n~^T, b = 2 (n . x) n~, c = (n . x)^2.
    """
    x, n = _sample_arrays(sample)
    n_tilde = np.append(n, 1.0)
    nx = float(n @ x)
    return QuadricSystem(A=2.0 * np.outer(n_tilde, n_tilde), b=2.0 * nx * n_tilde, c=nx * nx)


def line_term(sample: OrientedSample) -> QuadricSystem:
    """Squared distance from a sphere center to the sample's normal line.

    The radius row and column are zero, so the term ignores r.
    """
    x, n = _sample_arrays(sample)
    projector = np.eye(3) - np.outer(n, n)
    A = np.zeros((4, 4))
    A[:3, :3] = 2.0 * projector
    b = np.zeros(4)
    b[:3] = 2.0 * projector @ x
    return QuadricSystem(A=A, b=b, c=float(x @ projector @ x))


def sample_quadric(sample: OrientedSample, mu: float) -> QuadricSystem:
    """Weighted SQEM plus mu times the line quadric of one sample."""
    return (sqem_term(sample) + line_term(sample).scaled(mu)).scaled(sample.weight)


@dataclass(eq=False)
class ClusterQuadrics:
    """Per-sphere sums of the sample quadrics, stacked.

    A has shape (M, 4, 4), b (M, 4), c (M,). The weighted position and
    normal sums feed the degenerate fallback.
    """

    A: FloatArray
    b: FloatArray
    c: FloatArray
    weight: FloatArray
    weighted_positions: FloatArray
    weighted_normals: FloatArray

    def __getitem__(self, index: int) -> QuadricSystem:
        return QuadricSystem(A=self.A[index], b=self.b[index], c=float(self.c[index]))

    def energies(self, centers: FloatArray, radii: FloatArray) -> FloatArray:
        """Energy of sphere i under quadric i, for every i."""
        s = np.concatenate([centers, radii[:, None]], axis=1)
        quad = 0.5 * np.einsum("mi,mij,mj->m", s, self.A, s)
        result: FloatArray = quad - np.einsum("mi,mi->m", self.b, s) + self.c
        return result


def accumulate_quadrics(
    samples: SampleSet,
    assignment: IntArray,
    num_spheres: int,
    mu: float,
) -> ClusterQuadrics:
    """Sum the weighted sample quadrics of each cluster.

    Args:
        samples: Oriented samples with weights.
        assignment: Sphere index per sample.
        num_spheres: Number of spheres M.
        mu: Line-quadric weight.

    Returns:
        Stacked per-sphere quadrics.
    """
    x, n, w = samples.positions, samples.normals, samples.weights
    nx = np.einsum("ij,ij->i", n, x)
    n_tilde = np.concatenate([n, np.ones((len(n), 1))], axis=1)

    outer_nn = n[:, :, None] * n[:, None, :]
    per_A = 2.0 * n_tilde[:, :, None] * n_tilde[:, None, :]
    per_A[:, :3, :3] += 2.0 * mu * (np.eye(3)[None, :, :] - outer_nn)
    per_b = 2.0 * nx[:, None] * n_tilde
    per_b[:, :3] += 2.0 * mu * (x - n * nx[:, None])
    per_c = nx * nx + mu * (np.einsum("ij,ij->i", x, x) - nx * nx)

    A = np.zeros((num_spheres, 4, 4))
    b = np.zeros((num_spheres, 4))
    c = np.zeros(num_spheres)
    weight = np.zeros(num_spheres)
    wx = np.zeros((num_spheres, 3))
    wn = np.zeros((num_spheres, 3))
    np.add.at(A, assignment, w[:, None, None] * per_A)
    np.add.at(b, assignment, w[:, None] * per_b)
    np.add.at(c, assignment, w * per_c)
    np.add.at(weight, assignment, w)
    np.add.at(wx, assignment, w[:, None] * x)
    np.add.at(wn, assignment, w[:, None] * n)
    return ClusterQuadrics(A=A, b=b, c=c, weight=weight, weighted_positions=wx, weighted_normals=wn)


def _solve_symmetric(A: FloatArray, b: FloatArray) -> tuple[FloatArray, BoolArray]:
    """Batched solve of symmetric PSD systems through an eigendecomposition.

    Returns:
        (solutions, full-rank flag). Rank-deficient systems get the
        pseudo-inverse solution and a False flag.
    """
    w, V = np.linalg.eigh(A)
    scale = np.abs(w).max(axis=1)
    cutoff = RANK_TOLERANCE * np.maximum(scale, np.finfo(np.float64).tiny)
    keep = w > cutoff[:, None]
    full_rank = keep.all(axis=1) & (scale > 0)
    coeffs = np.einsum("mji,mj->mi", V, b)
    coeffs = np.divide(coeffs, w, out=np.zeros_like(coeffs), where=keep)
    solutions: FloatArray = np.einsum("mij,mj->mi", V, coeffs)
    return solutions, full_rank


@dataclass(eq=False)
class BatchFit:
    """Per-sphere result of one fitting pass."""

    centers: FloatArray
    radii: FloatArray
    status: list[FitStatus]


def fit_quadrics(
    quadrics: ClusterQuadrics,
    r_prev: FloatArray,
    r_bar: FloatArray,
) -> BatchFit:
    """Closed-form sphere update for every cluster quadric.

    The free solve s = A^-1 b is accepted when A has full rank and
    0 < r <= r_bar. Otherwise the radius stays at r_prev and the center
    solves A_cc c = b_c - a_cr r_prev. If A_cc is rank-deficient too, the
    sphere falls back to the weighted centroid pushed inward by r_prev.
    """
    m = len(r_prev)
    free, free_ok = _solve_symmetric(quadrics.A, quadrics.b)
    radius_ok = (free[:, 3] > 0) & (free[:, 3] <= r_bar)
    accept_free = free_ok & radius_ok

    A_cc = quadrics.A[:, :3, :3]
    rhs = quadrics.b[:, :3] - quadrics.A[:, :3, 3] * r_prev[:, None]
    fixed, fixed_ok = _solve_symmetric(A_cc, rhs)

    weight = np.maximum(quadrics.weight, np.finfo(np.float64).tiny)
    centroid = quadrics.weighted_positions / weight[:, None]
    mean_normal = quadrics.weighted_normals
    norms = np.linalg.norm(mean_normal, axis=1, keepdims=True)
    mean_normal = np.divide(mean_normal, norms, out=np.zeros_like(mean_normal), where=norms > 0)
    fallback = centroid - mean_normal * r_prev[:, None]

    centers = np.where(accept_free[:, None], free[:, :3], np.where(fixed_ok[:, None], fixed, fallback))
    radii = np.where(accept_free, free[:, 3], r_prev)
    status = [
        FitStatus.FREE_RADIUS if accept_free[i] else FitStatus.FIXED_RADIUS if fixed_ok[i] else FitStatus.DEGENERATE
        for i in range(m)
    ]
    return BatchFit(centers=centers, radii=radii, status=status)


def fit_sphere(
    cluster: list[OrientedSample] | SampleSet,
    mu: float,
    r_prev: float,
    r_bar: float,
) -> tuple[MedialSphere, FitStatus]:
    """Best sphere for one cluster of samples.

    Args:
        cluster: Non-empty cluster.
        mu: Line-quadric weight (>= 0).
        r_prev: Radius kept when the free solve is rejected.
        r_bar: Upper bound on an accepted free radius (> 0).

    Returns:
        The fitted sphere and the branch that produced it.

    Raises:
        InvalidInputError: If the cluster is empty.
        ParameterError: If mu < 0 or r_bar <= 0.
    """
    samples = cluster if isinstance(cluster, SampleSet) else SampleSet.from_samples(cluster)
    if len(samples) == 0:
        raise InvalidInputError("Cannot fit a sphere to an empty cluster")
    if mu < 0:
        raise ParameterError("mu", mu, "must be >= 0")
    if not r_bar > 0:
        raise ParameterError("r_bar", r_bar, "must be > 0")
    quadrics = accumulate_quadrics(samples, np.zeros(len(samples), dtype=np.int64), 1, mu)
    result = fit_quadrics(quadrics, np.array([r_prev]), np.array([r_bar]))
    sphere = MedialSphere(
        center=result.centers[0],
        radius=float(result.radii[0]),
        seed_samples=(-1, -1),
        cluster=set(range(len(samples))),
    )
    return sphere, result.status[0]


def radius_bounds(centers: FloatArray, radii: FloatArray, alive: BoolArray | None = None) -> FloatArray:
    """1.5 times the radius of the nearest-center other alive sphere, per sphere.

    With a single alive sphere its own radius is used. Dead spheres get inf.
    """
    m = len(centers)
    alive = np.ones(m, dtype=bool) if alive is None else alive
    bounds = np.full(m, np.inf)
    live = np.flatnonzero(alive)
    if len(live) == 1:
        bounds[live] = RADIUS_BOUND_FACTOR * radii[live]
    elif len(live) > 1:
        _, nbrs = cKDTree(centers[live]).query(centers[live], k=2)
        own = np.arange(len(live))
        nearest = np.where(nbrs[:, 0] == own, nbrs[:, 1], nbrs[:, 0])
        bounds[live] = RADIUS_BOUND_FACTOR * radii[live[nearest]]
    return bounds


def radius_bound(sphere_index: int, spheres: list[MedialSphere]) -> float:
    """Radius bound of one sphere among a list of spheres."""
    centers = np.array([s.center for s in spheres], dtype=np.float64).reshape(-1, 3)
    radii = np.array([s.radius for s in spheres], dtype=np.float64)
    alive = np.array([s.alive for s in spheres], dtype=bool)
    alive[sphere_index] = True
    return float(radius_bounds(centers, radii, alive)[sphere_index])


def sample_sphere_energies(
    positions: FloatArray,
    normals: FloatArray,
    weights: FloatArray,
    centers: FloatArray,
    radii: FloatArray,
    mu: float,
) -> FloatArray:
    """Per-pair energy d(v_j, m_i) for row-aligned samples and spheres."""
    diff = centers - positions
    along = np.einsum("ij,ij->i", normals, diff)
    sqem = (along + radii) ** 2
    line = np.einsum("ij,ij->i", diff, diff) - along * along
    result: FloatArray = weights * (sqem + mu * np.maximum(line, 0.0))
    return result


def rebuild_adjacency(assignment: IntArray, graph: SampleGraph) -> set[Edge]:
    """Sphere pairs joined by at least one sample-graph edge."""
    if len(graph.edges) == 0:
        return set()
    a = assignment[graph.edges[:, 0]]
    b = assignment[graph.edges[:, 1]]
    cross = a != b
    pairs = np.sort(np.stack([a[cross], b[cross]], axis=1), axis=1)
    if len(pairs) == 0:
        return set()
    return {(int(p), int(q)) for p, q in np.unique(pairs, axis=0).tolist()}


def _full_assignment(
    state: SphereState, samples: SampleSet, mu: float, threads: int
) -> IntArray:
    live = np.flatnonzero(state.alive)
    centers, radii = state.centers[live], state.radii[live]
    chunk = max(1, (1 << 20) // max(len(live), 1))

    def run(rows: slice) -> IntArray:
        x = samples.positions[rows]
        n = samples.normals[rows]
        diff = centers[None, :, :] - x[:, None, :]
        along = np.einsum("sj,smj->sm", n, diff)
        line = np.einsum("smj,smj->sm", diff, diff) - along * along
        energy = (along + radii[None, :]) ** 2 + mu * np.maximum(line, 0.0)
        best: IntArray = live[np.argmin(energy, axis=1)]
        return best

    parts = map_chunks(run, len(samples), threads, chunk_size=chunk)
    return np.concatenate(parts) if parts else np.zeros(0, dtype=np.int64)


def _local_assignment(state: SphereState, samples: SampleSet, mu: float) -> IntArray:
    m = state.num_spheres
    neighbours: list[list[int]] = [[i] for i in range(m)]
    for i, j in sorted(state.adjacency):
        neighbours[i].append(j)
        neighbours[j].append(i)
    lengths = np.array([len(v) for v in neighbours], dtype=np.int64)
    flat = np.array([s for v in neighbours for s in v], dtype=np.int64)
    starts = np.concatenate([[0], np.cumsum(lengths)[:-1]])

    current = state.assignment
    counts = lengths[current]
    sample_of_pair = np.repeat(np.arange(len(current)), counts)
    offsets = np.arange(counts.sum()) - np.repeat(np.cumsum(counts) - counts, counts)
    sphere_of_pair = flat[starts[current][sample_of_pair] + offsets]

    energy = sample_sphere_energies(
        samples.positions[sample_of_pair],
        samples.normals[sample_of_pair],
        np.ones(len(sample_of_pair)),
        state.centers[sphere_of_pair],
        state.radii[sphere_of_pair],
        mu,
    )
    energy = np.where(state.alive[sphere_of_pair], energy, np.inf)
    order = np.lexsort((sphere_of_pair, energy, sample_of_pair))
    first = np.ones(len(order), dtype=bool)
    first[1:] = sample_of_pair[order][1:] != sample_of_pair[order][:-1]
    best = np.empty(len(current), dtype=np.int64)
    best[sample_of_pair[order][first]] = sphere_of_pair[order][first]
    return best


def assign_clusters(
    state: SphereState,
    samples: SampleSet,
    graph: SampleGraph,
    mu: float,
    full: bool,
    threads: int = 1,
) -> SphereState:
    """Move every sample to its cheapest sphere.

    A full pass compares each sample with every alive sphere; a local pass
    only with its current sphere and that sphere's adjacent spheres. Ties go
    to the lower sphere index. Spheres left without samples are deactivated
    and the adjacency is rebuilt from the sample graph.

    Returns:
        A new state with the updated assignment, alive flags and adjacency.
    """
    if state.active_spheres == 0:
        raise InvalidInputError("No alive spheres to assign samples to")
    if full:
        assignment = _full_assignment(state, samples, mu, threads)
    else:
        assignment = _local_assignment(state, samples, mu)

    used = np.bincount(assignment, minlength=state.num_spheres) > 0
    emptied = state.alive & ~used
    if emptied.any():
        logger.warning("Deactivated %d spheres that lost all samples", int(emptied.sum()))
    return replace(
        state,
        assignment=assignment,
        alive=state.alive & used,
        adjacency=rebuild_adjacency(assignment, graph),
    )


def total_energy(state: SphereState, samples: SampleSet, mu: float) -> float:
    """Sum over samples of the energy to their assigned sphere."""
    a = state.assignment
    per_sample = sample_sphere_energies(
        samples.positions, samples.normals, samples.weights, state.centers[a], state.radii[a], mu
    )
    return float(per_sample.sum())


def initial_state(coverage: CoverageResult, graph: SampleGraph) -> SphereState:
    """Optimizer state seeded by the coverage selection."""
    spheres = coverage.selected
    if not spheres:
        raise InvalidInputError("Coverage selected no spheres")
    assignment = coverage.owner.astype(np.int64)
    return SphereState(
        centers=np.array([s.center for s in spheres], dtype=np.float64),
        radii=np.array([s.radius for s in spheres], dtype=np.float64),
        alive=np.bincount(assignment, minlength=len(spheres)) > 0,
        assignment=assignment,
        adjacency=rebuild_adjacency(assignment, graph),
    )


def fit_all(state: SphereState, samples: SampleSet, mu: float) -> tuple[SphereState, list[FitStatus]]:
    """Refit every alive sphere to its cluster.

    A degenerate fallback that would raise the cluster energy keeps the
    previous sphere instead.
    """
    quadrics = accumulate_quadrics(samples, state.assignment, state.num_spheres, mu)
    r_bar = radius_bounds(state.centers, state.radii, state.alive)
    result = fit_quadrics(quadrics, state.radii, r_bar)

    degenerate = np.array([s is FitStatus.DEGENERATE for s in result.status], dtype=bool)
    worse = quadrics.energies(result.centers, result.radii) > quadrics.energies(state.centers, state.radii)
    keep_old = ~state.alive | (degenerate & worse)
    centers = np.where(keep_old[:, None], state.centers, result.centers)
    radii = np.where(keep_old, state.radii, result.radii)
    return replace(state, centers=centers, radii=radii), result.status


def optimize(
    state: SphereState,
    samples: SampleSet,
    graph: SampleGraph,
    mu: float = DEFAULT_MU,
    tol: float = DEFAULT_TOL,
    max_iters: int = DEFAULT_MAX_ITERS,
    threads: int = 1,
    energy_log: Path | str | None = None,
) -> SphereState:
    """Alternate cluster assignment and sphere fitting until the energy settles.

    The first assignment pass is full, later ones local. Iteration stops when
    the total energy changes by less than tol or after max_iters iterations.

    Args:
        state: Initial state (from `initial_state`).
        samples: Oriented samples.
        graph: Sample graph (for adjacency).
        mu: Line-quadric weight.
        tol: Absolute energy-change tolerance.
        max_iters: Iteration cap.
        threads: Worker cap for the full assignment pass.
        energy_log: Optional CSV path for per-iteration energies.

    Returns:
        The converged state with its energy history.

    Raises:
        OptimizationError: If the energy rises by more than 1e-6.
    """
    if mu < 0:
        raise ParameterError("mu", mu, "must be >= 0")
    if max_iters < 1:
        raise ParameterError("max_iters", max_iters, "must be >= 1")

    history: list[float] = []
    rows: list[EnergyRow] = []
    previous: float | None = None
    iteration = 0
    for iteration in range(1, max_iters + 1):
        before = state.assignment
        state = assign_clusters(state, samples, graph, mu, full=iteration == 1, threads=threads)
        changed = int(np.count_nonzero(state.assignment != before))
        state, status = fit_all(state, samples, mu)
        energy = total_energy(state, samples, mu)
        history.append(energy)
        rows.append((iteration, energy, changed, state.active_spheres))
        logger.debug(
            "iter %d: energy=%.12g changed=%d active=%d fixed=%d",
            iteration,
            energy,
            changed,
            state.active_spheres,
            sum(1 for s in status if s is FitStatus.FIXED_RADIUS),
        )
        if previous is not None:
            if energy > previous + ENERGY_INCREASE_LIMIT:
                raise OptimizationError(iteration, previous, energy)
            if abs(previous - energy) < tol:
                break
        previous = energy
    else:
        logger.info("Optimizer stopped at the iteration cap (%d)", max_iters)

    if energy_log is not None:
        formats.write_energy_log(energy_log, rows)
    logger.info("Optimized %d spheres in %d iterations", state.active_spheres, iteration)
    return replace(state, iteration=iteration, energy_history=history)
