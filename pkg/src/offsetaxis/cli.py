"""Click-based CLI for offset medial axis reconstruction."""

import logging
from collections.abc import Callable
from pathlib import Path
from typing import Any, NoReturn, TypeVar

import click
from click.core import ParameterSource
from rich.console import Console
from rich.logging import RichHandler

from offsetaxis import __version__, formats
from offsetaxis.config import PRESETS, InputSpec, RunConfig, load_config_file, parse_input
from offsetaxis.errors import InvalidInputError, OffsetAxisError, ParameterError
from offsetaxis.field import sample_to_grid
from offsetaxis.metrics import write_report_json
from offsetaxis.output import (
    print_error,
    print_evaluation,
    print_info,
    print_report,
    print_stage_times,
    print_warning,
    print_written,
)
from offsetaxis.pipeline import evaluate, fit_samples, load_field, run
from offsetaxis.sampler import sample_offset_surface

F = TypeVar("F", bound=Callable[..., Any])

LOG_LEVELS = (logging.WARNING, logging.INFO, logging.DEBUG)


def configure_logging(verbosity: int) -> None:
    """Route the package logger through rich at a level set by -v count.

    Args:
        verbosity: 0 for warnings, 1 for info, 2+ for debug.
    """
    logger = logging.getLogger("offsetaxis")
    logger.setLevel(LOG_LEVELS[min(verbosity, len(LOG_LEVELS) - 1)])
    if not any(isinstance(h, RichHandler) for h in logger.handlers):
        logger.addHandler(RichHandler(console=Console(stderr=True), show_path=False))
    logger.propagate = False


class InputSpecType(click.ParamType):
    """Click parameter type for field inputs."""

    name = "input"

    def convert(
        self,
        value: Any,
        param: click.Parameter | None,  # noqa: ARG002
        ctx: click.Context | None,  # noqa: ARG002
    ) -> InputSpec:
        """Convert string to InputSpec."""
        if isinstance(value, InputSpec):
            return value
        try:
            return parse_input(value)
        except InvalidInputError as e:
            raise click.BadParameter(str(e)) from e


INPUT = InputSpecType()


def _load_config(ctx: click.Context, param: click.Parameter, value: Path | None) -> None:  # noqa: ARG001
    """Eager callback: feed a config file into the command's default_map."""
    if value is None:
        return
    try:
        values = load_config_file(value)
    except OffsetAxisError as e:
        raise click.BadParameter(str(e), ctx=ctx, param=param) from e
    ctx.default_map = {**(ctx.default_map or {}), **values}


def config_option(f: F) -> F:
    """Add --config to a command."""
    return click.option(
        "--config",
        type=click.Path(exists=True, dir_okay=False, path_type=Path),
        is_eager=True,
        expose_value=False,
        callback=_load_config,
        help="Read defaults from a 'key = value' file; flags still win.",
    )(f)


def threads_option(f: F) -> F:
    """Add --threads (also read from OFFSETAXIS_THREADS)."""
    return click.option(
        "--threads",
        type=click.IntRange(min=1),
        default=1,
        show_default=True,
        envvar="OFFSETAXIS_THREADS",
        help="Worker cap; results do not depend on it.",
    )(f)


def sampling_options(f: F) -> F:
    """Add the sampling parameters."""
    options = [
        click.option("--alpha", type=float, default=0.05, show_default=True, help="Offset level."),
        click.option("--r", "r", type=float, default=0.03, show_default=True, help="Poisson radius (<= alpha)."),
        click.option("--k", "k", type=int, default=10, show_default=True, help="Neighbours in the sample graph."),
        click.option(
            "--angle-threshold-deg",
            type=float,
            default=60.0,
            show_default=True,
            help="Maximum gradient angle for graph edges.",
        ),
        click.option("--n-rays", type=int, default=200_000, show_default=True, help="Ray budget."),
        click.option("--seed", type=int, default=0, show_default=True, help="Random seed."),
    ]
    for option in reversed(options):
        f = option(f)
    return f


def optimizer_options(f: F) -> F:
    """Add the sphere selection and optimization parameters."""
    options = [
        click.option("--delta", type=float, default=0.02, show_default=True, help="Coverage dilation."),
        click.option("--mu", type=float, default=0.2, show_default=True, help="Line-quadric weight."),
        click.option("--tol", type=float, default=1e-10, show_default=True, help="Energy tolerance."),
        click.option("--max-iters", type=int, default=150, show_default=True, help="Iteration cap."),
        click.option(
            "--energy-log",
            type=click.Path(dir_okay=False, path_type=Path),
            default=None,
            help="Write per-iteration energies as CSV.",
        ),
    ]
    for option in reversed(options):
        f = option(f)
    return f


def _fail(error: OffsetAxisError) -> NoReturn:
    """Report a library error and exit non-zero."""
    if isinstance(error, ParameterError):
        raise click.BadParameter(str(error), param_hint=f"--{error.name.replace('_', '-')}")
    print_error(str(error))
    raise SystemExit(1)


@click.group()
@click.option("--verbose", "-v", count=True, help="More logging (-v info, -vv debug).")
@click.version_option(version=__version__, prog_name="offsetaxis")
def main(verbose: int) -> None:
    """Reconstruct mixed triangle/curve meshes from unsigned distance fields."""
    configure_logging(verbose)


@main.command()
@config_option
@click.option(
    "--input",
    "-i",
    "input",
    default="analytic:sphere",
    show_default=True,
    help="analytic:<name>[:k=v,..], points:, triangles:, grid:, qmdf:<mf>,<sdf> or a path.",
)
@sampling_options
@optimizer_options
@click.option(
    "--preset",
    type=click.Choice(sorted(PRESETS)),
    default=None,
    help="Take alpha, r and delta from a dataset preset.",
)
@threads_option
@click.option(
    "--output",
    "-o",
    type=click.Path(dir_okay=False, path_type=Path),
    default=Path("mesh.obj"),
    show_default=True,
    help="Mesh file (.obj or .ply).",
)
@click.option("--report", type=click.Path(dir_okay=False, path_type=Path), default=None, help="JSON report path.")
@click.option("--dump-samples", type=click.Path(dir_okay=False, path_type=Path), default=None, help="Samples PLY.")
@click.option("--dump-spheres", type=click.Path(dir_okay=False, path_type=Path), default=None, help="Spheres text file.")
@click.option(
    "--reference",
    type=click.Path(exists=True, dir_okay=False, path_type=Path),
    default=None,
    help="Ground-truth mesh for accuracy metrics.",
)
@click.option("--n-eval-samples", type=int, default=100_000, show_default=True, help="Points per mesh for CD/HD.")
@click.option(
    "--check-thinning",
    is_flag=True,
    default=False,
    help="Verify closure and Euler characteristic after every collapse (slow).",
)
@click.pass_context
def reconstruct(ctx: click.Context, preset: str | None, **options: Any) -> None:
    """Run the full pipeline and write a mesh.

    Example:
        offsetaxis reconstruct --input analytic:sphere --alpha 0.05 --r 0.03 --delta 0.02 --seed 1
    """
    try:
        parse_input(options["input"])
    except InvalidInputError as e:
        raise click.BadParameter(str(e), param_hint="--input") from e

    config = RunConfig(**options)
    if preset:
        explicit = {
            name: options[name]
            for name in ("alpha", "r", "delta")
            if ctx.get_parameter_source(name) is ParameterSource.COMMANDLINE
        }
        try:
            config = config.with_preset(preset).replace(**explicit)
        except InvalidInputError as e:
            raise click.BadParameter(str(e), param_hint="--preset") from e

    try:
        config.validate()
        result = run(config)
    except OffsetAxisError as e:
        _fail(e)

    print_report(result.report)
    if result.report.f_count == 0 and result.report.segment_count == 0:
        print_warning("The reconstructed mesh is empty; try a larger alpha or delta")
    print_stage_times(result.stage_seconds)
    print_written("Mesh", config.output)
    if config.report is not None:
        print_written("Report", config.report)


@main.command(name="evaluate")
@click.argument("mesh_a", type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.argument("mesh_b", type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--n-samples", type=int, default=100_000, show_default=True, help="Points per mesh.")
@click.option("--seed", type=int, default=0, show_default=True, help="Sampling seed.")
@click.option("--report", type=click.Path(dir_okay=False, path_type=Path), default=None, help="JSON report path.")
def evaluate_command(mesh_a: Path, mesh_b: Path, n_samples: int, seed: int, report: Path | None) -> None:
    """Compare MESH_A against MESH_B (CD, HD, quality, topology of MESH_A)."""
    try:
        result = evaluate(mesh_a, mesh_b, n_samples=n_samples, seed=seed)
        if report is not None:
            write_report_json(report, result)
    except OffsetAxisError as e:
        _fail(e)
    except OSError as e:
        print_error(str(e))
        raise SystemExit(1) from e
    print_evaluation(result)


@main.command()
@config_option
@click.option("--input", "-i", "input", type=INPUT, required=True, help="Field input spec.")
@sampling_options
@threads_option
@click.option(
    "--output",
    "-o",
    type=click.Path(dir_okay=False, path_type=Path),
    required=True,
    help="Samples PLY (positions, normals, gradients, weights).",
)
def sample(
    input: InputSpec,  # noqa: A002
    alpha: float,
    r: float,
    k: int,
    angle_threshold_deg: float,
    n_rays: int,
    seed: int,
    threads: int,
    output: Path,
) -> None:
    """Sample the alpha level set of a field and dump oriented samples."""
    try:
        RunConfig(alpha=alpha, r=r, k=k, angle_threshold_deg=angle_threshold_deg, n_rays=n_rays).validate()
        field = load_field(input)
        graph = sample_offset_surface(field, alpha, r, n_rays, seed, k, angle_threshold_deg, threads)
        formats.write_samples_ply(output, graph.samples)
    except OffsetAxisError as e:
        _fail(e)
    print_info(f"{len(graph.samples)} samples, {len(graph.edges)} graph edges")
    print_written("Samples", output)


@main.command()
@config_option
@click.argument("samples", type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--alpha", type=float, default=0.05, show_default=True, help="Offset level.")
@click.option("--k", "k", type=int, default=10, show_default=True, help="Neighbours in the sample graph.")
@click.option("--angle-threshold-deg", type=float, default=60.0, show_default=True, help="Graph angle filter.")
@optimizer_options
@threads_option
@click.option(
    "--output",
    "-o",
    type=click.Path(dir_okay=False, path_type=Path),
    required=True,
    help="Spheres file ('cx cy cz r' per line).",
)
def fit(
    samples: Path,
    alpha: float,
    k: int,
    angle_threshold_deg: float,
    delta: float,
    mu: float,
    tol: float,
    max_iters: int,
    energy_log: Path | None,
    threads: int,
    output: Path,
) -> None:
    """Fit medial spheres to a samples dump and write them."""
    try:
        RunConfig(alpha=alpha, r=alpha, delta=delta, mu=mu, k=k, tol=tol, max_iters=max_iters).validate()
        state = fit_samples(
            samples,
            alpha,
            delta,
            mu=mu,
            k=k,
            angle_threshold_deg=angle_threshold_deg,
            tol=tol,
            max_iters=max_iters,
            threads=threads,
            energy_log=energy_log,
        )
        formats.write_spheres(output, state.centers[state.alive], state.radii[state.alive])
    except OffsetAxisError as e:
        _fail(e)
    print_info(f"{state.active_spheres} spheres after {state.iteration} iterations")
    print_written("Spheres", output)


@main.command()
@click.option("--input", "-i", "input", type=INPUT, required=True, help="Field input spec.")
@click.option(
    "--dims",
    type=click.IntRange(min=2),
    nargs=3,
    default=(64, 64, 64),
    show_default=True,
    help="Grid nodes along x, y and z.",
)
@click.option("--margin", type=float, default=0.1, show_default=True, help="Box expansion on every side.")
@click.option(
    "--output",
    "-o",
    type=click.Path(dir_okay=False, path_type=Path),
    required=True,
    help="Grid file (UDFGRID format).",
)
def grid(input: InputSpec, dims: tuple[int, int, int], margin: float, output: Path) -> None:  # noqa: A002
    """Sample any field onto a regular grid file."""
    try:
        sampled = sample_to_grid(load_field(input), dims, margin)
        formats.write_grid(output, sampled.values, sampled.origin, sampled.spacing)
    except OffsetAxisError as e:
        _fail(e)
    print_written("Grid", output)


if __name__ == "__main__":
    main()
