"""Tests for shrinking balls and greedy coverage."""

import numpy as np
import pytest
from scipy.spatial import cKDTree

from offsetaxis.errors import InvalidInputError, ParameterError
from offsetaxis.medial_init import (
    default_initial_radius,
    select_spheres,
    shrink_all,
    shrinking_ball,
)
from offsetaxis.models import MedialSphere, SampleGraph, SampleSet
from offsetaxis.sampler import build_sample_graph


def make_slab(n: int = 5, spacing: float = 0.05, half: float = 0.1) -> SampleSet:
    """Create samples on both sides of a slab, normals pointing outward."""
    u = (np.arange(n) - (n - 1) / 2) * spacing
    xx, yy = np.meshgrid(u, u, indexing="ij")
    sheet = np.stack([xx.ravel(), yy.ravel()], axis=1)
    top = np.column_stack([sheet, np.full(n * n, half)])
    bottom = np.column_stack([sheet, np.full(n * n, -half)])
    normals = np.vstack([np.tile([0.0, 0.0, 1.0], (n * n, 1)), np.tile([0.0, 0.0, -1.0], (n * n, 1))])
    return SampleSet.from_positions(np.vstack([top, bottom]), normals)


def make_line_graph() -> SampleGraph:
    """Create five samples on the x axis joined as a path."""
    positions = np.stack([np.arange(5) * 0.1, np.zeros(5), np.zeros(5)], axis=1)
    samples = SampleSet.from_positions(positions, np.tile([0.0, 0.0, 1.0], (5, 1)))
    return SampleGraph(samples, np.array([[0, 1], [1, 2], [2, 3], [3, 4]]), k=10)


def make_candidate(center: list[float], radius: float, index: int) -> MedialSphere:
    """Create a candidate sphere owned by one sample."""
    return MedialSphere(center=np.array(center), radius=radius, seed_samples=(index, index))


class TestShrinkingBall:
    """Tests for shrinking_ball."""

    def test_symmetric_pair(self) -> None:
        """Test two facing samples give the ball between them."""
        samples = SampleSet.from_positions(
            np.array([[0.0, 0.0, 0.1], [0.0, 0.0, -0.1]]),
            np.array([[0.0, 0.0, 1.0], [0.0, 0.0, -1.0]]),
        )
        tree = cKDTree(samples.positions)
        ball = shrinking_ball(0, samples, tree, default_initial_radius(samples), alpha=0.05)
        np.testing.assert_allclose(ball.center, [0.0, 0.0, 0.0], atol=1e-12)
        assert ball.radius == pytest.approx(0.1)
        assert ball.seed_samples == (0, 1)
        assert not ball.flagged

    def test_lone_sample_is_flagged(self) -> None:
        """Test a ball with nothing to touch is clamped to alpha."""
        samples = SampleSet.from_positions(np.array([[1.0, 2.0, 3.0]]), np.array([[0.0, 1.0, 0.0]]))
        ball = shrinking_ball(0, samples, cKDTree(samples.positions), 1.0, alpha=0.05)
        assert ball.flagged
        assert ball.radius == 0.05
        assert ball.seed_samples == (0, 0)
        np.testing.assert_allclose(ball.center, [1.0, 1.95, 3.0])


class TestShrinkAll:
    """Tests for shrink_all."""

    def test_slab_balls_fill_the_slab(self) -> None:
        """Test every slab sample gets the mid-slab ball."""
        candidates = shrink_all(make_slab(), alpha=0.05)
        assert len(candidates) == 50
        radii = np.array([c.radius for c in candidates])
        centers = np.array([c.center for c in candidates])
        np.testing.assert_allclose(radii, 0.1, atol=1e-9)
        np.testing.assert_allclose(centers[:, 2], 0.0, atol=1e-9)
        assert not any(c.flagged for c in candidates)

    def test_thread_count_does_not_matter(self) -> None:
        """Test chunked execution is deterministic."""
        samples = make_slab()
        one = shrink_all(samples, alpha=0.05, threads=1)
        many = shrink_all(samples, alpha=0.05, threads=4)
        np.testing.assert_array_equal([c.radius for c in one], [c.radius for c in many])

    def test_empty(self) -> None:
        """Test no samples gives no candidates."""
        assert shrink_all(SampleSet.from_samples([]), alpha=0.05) == []

    def test_bad_alpha(self) -> None:
        """Test alpha <= 0 is rejected."""
        with pytest.raises(ParameterError):
            shrink_all(make_slab(), alpha=0.0)


class TestSelectSpheres:
    """Tests for select_spheres."""

    def make_candidates(self) -> list[MedialSphere]:
        """Create one large candidate in the middle of the path."""
        candidates = [make_candidate([0.1 * i, 0.0, 0.0], 0.05, i) for i in range(5)]
        candidates[2] = make_candidate([0.2, 0.0, 0.0], 0.15, 2)
        return candidates

    def test_small_delta(self) -> None:
        """Test the large sphere covers its neighbours, the ends need their own."""
        result = select_spheres(self.make_candidates(), make_line_graph(), delta=0.01)
        assert [s.radius for s in result.selected] == [0.15, 0.05, 0.05]
        assert result.owner.tolist() == [1, 0, 0, 0, 2]
        assert [s.cluster for s in result.selected] == [{1, 2, 3}, {0}, {4}]

    def test_large_delta(self) -> None:
        """Test a wide dilation lets one sphere cover everything."""
        result = select_spheres(self.make_candidates(), make_line_graph(), delta=0.06)
        assert len(result.selected) == 1
        assert result.owner.tolist() == [0, 0, 0, 0, 0]

    def test_coverage_follows_graph(self) -> None:
        """Test samples outside the graph component stay for later spheres."""
        graph = make_line_graph()
        graph = SampleGraph(graph.samples, np.array([[0, 1], [1, 2], [3, 4]]), k=10)
        result = select_spheres(self.make_candidates(), graph, delta=0.06)
        assert result.owner.tolist() == [0, 0, 0, 1, 1]

    def test_slab_partition(self) -> None:
        """Test clusters partition the samples and owners agree."""
        samples = make_slab()
        graph = build_sample_graph(samples, k=10)
        result = select_spheres(shrink_all(samples, alpha=0.05), graph, delta=0.02)
        assert np.all(result.owner >= 0)
        clusters = [s.cluster for s in result.selected]
        assert sum(len(c) for c in clusters) == len(samples)
        for number, cluster in enumerate(clusters):
            assert all(result.owner[i] == number for i in cluster)

    def test_huge_delta_single_sphere(self) -> None:
        """Test seeds reach both sheets, so one sphere can cover the slab."""
        samples = make_slab()
        graph = build_sample_graph(samples, k=10)
        result = select_spheres(shrink_all(samples, alpha=0.05), graph, delta=1.0)
        assert len(result.selected) == 1

    def test_bad_delta(self) -> None:
        """Test delta <= 0 is rejected."""
        with pytest.raises(ParameterError):
            select_spheres(self.make_candidates(), make_line_graph(), delta=0.0)

    def test_candidate_count(self) -> None:
        """Test one candidate per sample is required."""
        with pytest.raises(InvalidInputError):
            select_spheres(self.make_candidates()[:3], make_line_graph(), delta=0.01)


def make_shell_samples(count: int = 4000) -> SampleSet:
    """Samples on both level sets of the unit sphere at alpha = 0.1, first one at (1.1, 0, 0).

    Normals point out of the offset shell: away from the origin outside,
    towards it inside.
    """
    i = np.arange(count) + 0.5
    z = 1 - 2 * i / count
    theta = np.pi * (1 + 5**0.5) * i
    rho = np.sqrt(1 - z * z)
    directions = np.stack([rho * np.cos(theta), rho * np.sin(theta), z], axis=1)
    positions = np.vstack([[[1.1, 0.0, 0.0]], 1.1 * directions, 0.9 * directions])
    normals = np.vstack([[[1.0, 0.0, 0.0]], directions, -directions])
    return SampleSet.from_positions(positions, normals)


def exhaustive_coverage(candidates: list[MedialSphere], positions: np.ndarray, delta: float) -> list[int]:
    """Greedy selection where a sphere covers every sample within reach, graph or not."""
    n = len(candidates)
    owner = [-1] * n
    number = 0
    for i in sorted(range(n), key=lambda j: (-candidates[j].radius, j)):
        if owner[i] >= 0:
            continue
        candidate = candidates[i]
        reach = np.linalg.norm(positions - candidate.center, axis=1) <= candidate.radius + delta
        reach[i] = True
        for j in np.flatnonzero(reach).tolist():
            if owner[j] < 0:
                owner[j] = number
        number += 1
    return owner


class TestShellBall:
    """Tests for shrinking balls on a densely sampled sphere shell."""

    def test_ball_sits_on_the_medial_sphere(self) -> None:
        """Test the ball from (1.1, 0, 0) is centered near (1, 0, 0) with radius near 0.1."""
        samples = make_shell_samples()
        tree = cKDTree(samples.positions)
        ball = shrinking_ball(0, samples, tree, default_initial_radius(samples), alpha=0.1)
        assert not ball.flagged
        np.testing.assert_allclose(ball.center, [1.0, 0.0, 0.0], atol=0.01)
        assert ball.radius == pytest.approx(0.1, abs=0.01)


class TestCoverageOracle:
    """Tests of select_spheres against exhaustive distance checks."""

    def test_complete_graph_matches_exhaustive(self) -> None:
        """Test flood fill on a complete graph equals covering by distance alone."""
        rng = np.random.default_rng(8)
        positions = rng.uniform(0, 1, size=(40, 3))
        normals = np.tile([0.0, 0.0, 1.0], (40, 1))
        samples = SampleSet.from_positions(positions, normals)
        edges = np.array([(i, j) for i in range(40) for j in range(i + 1, 40)])
        graph = SampleGraph(samples, edges, k=40)
        candidates = [
            make_candidate((positions[i] + rng.normal(scale=0.05, size=3)).tolist(), float(r), i)
            for i, r in enumerate(rng.uniform(0.05, 0.2, size=40))
        ]
        result = select_spheres(candidates, graph, delta=0.05)
        assert result.owner.tolist() == exhaustive_coverage(candidates, positions, delta=0.05)

    def test_disconnected_graph_still_covers_everything(self) -> None:
        """Test an edgeless graph gives one sphere per sample but leaves none uncovered."""
        graph = make_line_graph()
        graph = SampleGraph(graph.samples, np.zeros((0, 2), dtype=np.int64), k=10)
        candidates = [make_candidate([0.1 * i, 0.0, 0.0], 0.5, i) for i in range(5)]
        result = select_spheres(candidates, graph, delta=0.5)
        assert exhaustive_coverage(candidates, graph.samples.positions, delta=0.5) == [0] * 5
        assert result.owner.tolist() == [0, 1, 2, 3, 4]


class TestDilation:
    """Tests for the effect of delta on the selection."""

    def test_count_shrinks_as_delta_grows(self) -> None:
        """Test a wider dilation never needs more spheres."""
        samples = make_slab()
        graph = build_sample_graph(samples, k=10)
        candidates = shrink_all(samples, alpha=0.05)
        counts = [len(select_spheres(candidates, graph, delta).selected) for delta in (0.005, 0.03, 0.08, 1.0)]
        assert counts[0] == 25
        assert counts[-1] == 1
        assert counts == sorted(counts, reverse=True)
