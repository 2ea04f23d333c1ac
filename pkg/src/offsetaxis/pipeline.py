"""End-to-end reconstruction: field, samples, spheres, mesh, report."""

import logging
import time
from collections.abc import Iterator
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path

from offsetaxis import formats
from offsetaxis.config import InputSpec, RunConfig, parse_input
from offsetaxis.errors import OffsetAxisError, ParseError, PipelineError
from offsetaxis.field import (
    AnalyticField,
    DistanceField,
    load_grid,
    load_point_cloud,
    load_quasi_medial,
    load_triangle_soup,
    make_analytic,
)
from offsetaxis.medial_init import select_spheres, shrink_all
from offsetaxis.mesher import build_complex, cleanup, thin, write_mesh
from offsetaxis.metrics import build_report, write_report_json
from offsetaxis.models import InputKind, MeshReport, MixedMesh, SampleGraph, SphereState
from offsetaxis.optimizer import initial_state, optimize
from offsetaxis.sampler import build_sample_graph, sample_offset_surface

logger = logging.getLogger(__name__)

STAGES = ("load", "sample", "init", "optimize", "mesh", "metrics")


class StageTimer:
    """Wall-clock seconds per named stage; failures are tagged with the stage."""

    def __init__(self) -> None:
        self.seconds: dict[str, float] = {}

    @contextmanager
    def stage(self, name: str) -> Iterator[None]:
        """Time a block and wrap library or I/O errors in PipelineError."""
        start = time.perf_counter()
        try:
            yield
        except PipelineError:
            raise
        except (OffsetAxisError, OSError) as e:
            raise PipelineError(name, e) from e
        finally:
            self.seconds[name] = self.seconds.get(name, 0.0) + time.perf_counter() - start
        logger.info("Stage %s finished in %.2fs", name, self.seconds[name])


@dataclass(eq=False)
class RunResult:
    """Everything a reconstruction run produced."""

    mesh: MixedMesh
    report: MeshReport
    field: DistanceField
    graph: SampleGraph
    state: SphereState
    stage_seconds: dict[str, float] = field(default_factory=dict)


def load_field(spec: InputSpec | str) -> DistanceField:
    """Build the distance field named by an input spec.

    Inferred mesh inputs without faces are loaded as point clouds.
    """
    spec = parse_input(spec) if isinstance(spec, str) else spec
    if spec.kind is InputKind.ANALYTIC:
        return make_analytic(spec.shape, **dict(spec.params))
    if spec.kind is InputKind.POINTS:
        return load_point_cloud(spec.path)
    if spec.kind is InputKind.GRID:
        return load_grid(spec.path)
    if spec.kind is InputKind.QMDF:
        return load_quasi_medial(spec.paths[0], spec.paths[1])
    try:
        return load_triangle_soup(spec.path)
    except ParseError:
        if not spec.inferred:
            raise
        logger.info("%s has no faces; using its vertices as a point cloud", spec.path)
        return load_point_cloud(spec.path)


def reference_mesh(
    field_: DistanceField, reference: Path | None = None
) -> MixedMesh | None:
    """Ground-truth mesh in the field's frame, if one is available.

    An explicit reference file wins; analytic fields fall back to their own
    tessellation.
    """
    if reference is not None:
        mesh = formats.read_mesh(reference)
        return MixedMesh(
            vertices=field_.transform.apply(mesh.vertices),
            triangles=mesh.triangles,
            segments=mesh.segments,
        )
    if isinstance(field_, AnalyticField):
        return field_.surface_mesh()
    return None


def run(config: RunConfig) -> RunResult:
    """Run the whole reconstruction for a configuration.

    Writes the mesh, report and any requested dumps.

    Raises:
        ParameterError: If the configuration is invalid (before any work).
        PipelineError: If a stage fails.
    """
    config.validate()
    timer = StageTimer()

    with timer.stage("load"):
        field_ = load_field(config.input)

    with timer.stage("sample"):
        graph = sample_offset_surface(
            field_,
            config.alpha,
            config.r,
            n_rays=config.n_rays,
            seed=config.seed,
            k=config.k,
            angle_threshold_deg=config.angle_threshold_deg,
            threads=config.threads,
        )
        if config.dump_samples is not None:
            formats.write_samples_ply(config.dump_samples, graph.samples)

    with timer.stage("init"):
        candidates = shrink_all(graph.samples, config.alpha, threads=config.threads)
        coverage = select_spheres(candidates, graph, config.delta)
        state = initial_state(coverage, graph)

    with timer.stage("optimize"):
        state = optimize(
            state,
            graph.samples,
            graph,
            mu=config.mu,
            tol=config.tol,
            max_iters=config.max_iters,
            threads=config.threads,
            energy_log=config.energy_log,
        )
        if config.dump_spheres is not None:
            live = state.alive
            formats.write_spheres(config.dump_spheres, state.centers[live], state.radii[live])

    with timer.stage("mesh"):
        complex_ = build_complex(state)
        mesh = cleanup(thin(complex_, field_, config.alpha, check=config.check_thinning))
        if config.output is not None:
            write_mesh(mesh, config.output, transform=field_.transform)

    with timer.stage("metrics"):
        reference = reference_mesh(field_, config.reference)
        report = build_report(
            mesh,
            reference=reference,
            n_samples=config.n_eval_samples,
            seed=config.seed,
            sample_count=len(graph.samples),
            sphere_count=state.active_spheres,
            iterations=state.iteration,
        )

    report.stage_seconds = dict(timer.seconds)
    if config.report is not None:
        try:
            write_report_json(config.report, report)
        except OSError as e:
            raise PipelineError("metrics", e) from e
    return RunResult(
        mesh=mesh,
        report=report,
        field=field_,
        graph=graph,
        state=state,
        stage_seconds=dict(timer.seconds),
    )


def fit_samples(
    samples_path: Path | str,
    alpha: float,
    delta: float,
    mu: float = 0.2,
    k: int = 10,
    angle_threshold_deg: float = 60.0,
    tol: float = 1e-10,
    max_iters: int = 150,
    threads: int = 1,
    energy_log: Path | str | None = None,
) -> SphereState:
    """Optimizer-only run on a samples dump (as written by the sample stage).

    The dump already carries fitted normals, so only the graph is rebuilt.
    """
    samples = formats.read_samples_ply(samples_path)
    graph = build_sample_graph(samples, k=k, angle_threshold_deg=angle_threshold_deg)
    candidates = shrink_all(graph.samples, alpha, threads=threads)
    coverage = select_spheres(candidates, graph, delta)
    return optimize(
        initial_state(coverage, graph),
        graph.samples,
        graph,
        mu=mu,
        tol=tol,
        max_iters=max_iters,
        threads=threads,
        energy_log=energy_log,
    )


def evaluate(
    mesh_a_path: Path | str,
    mesh_b_path: Path | str,
    n_samples: int = 100_000,
    seed: int = 0,
) -> MeshReport:
    """Compare two mesh files and report accuracy, quality and topology of the first.

    Raises:
        ParseError: If a file cannot be read.
        InvalidInputError: If either mesh is empty.
    """
    mesh_a = formats.read_mesh(mesh_a_path)
    mesh_b = formats.read_mesh(mesh_b_path)
    return build_report(mesh_a, reference=mesh_b, n_samples=n_samples, seed=seed)
