"""Rich-based output formatting for CLI."""

from rich.console import Console
from rich.table import Table

from offsetaxis.models import MeshReport

console = Console()


def format_distance(value: float | None) -> str:
    """Format a distance in units of 1e-3, as accuracy tables do.

    Args:
        value: Distance in normalized units, or None.

    Returns:
        Formatted string like "1.234e-3", or "-" when missing.
    """
    if value is None:
        return "-"
    return f"{value * 1e3:.3f}e-3"


def format_seconds(seconds: float) -> str:
    """Format a duration as seconds with two decimals."""
    return f"{seconds:.2f}s"


def print_error(message: str) -> None:
    """Print an error message.

    Args:
        message: Error message to print.
    """
    console.print(f"Error: {message}", style="bold red", markup=False)


def print_warning(message: str) -> None:
    """Print a warning message.

    Args:
        message: Warning message to print.
    """
    console.print(f"Warning: {message}", style="yellow", markup=False)


def print_info(message: str) -> None:
    """Print an informational message.

    Args:
        message: Info message to print.
    """
    console.print(message, style="dim", markup=False)


def _report_table(report: MeshReport, title: str) -> Table:
    table = Table(title=title, show_header=True, header_style="bold")
    table.add_column("Metric")
    table.add_column("Value", justify="right")
    table.add_row("Vertices", str(report.v_count))
    table.add_row("Edges", str(report.e_count))
    table.add_row("Triangles", str(report.f_count))
    table.add_row("Curve segments", str(report.segment_count))
    table.add_row("Chamfer (CD)", format_distance(report.chamfer))
    table.add_row("Hausdorff (HD)", format_distance(report.hausdorff))
    quality = "-" if report.tri_quality_mean is None else f"{report.tri_quality_mean:.3f}"
    table.add_row("Triangle quality", quality)
    table.add_row("Euler characteristic", str(report.euler_char))
    table.add_row("Non-manifold edges", str(report.nm_edge_count))
    table.add_row("Boundary edges", str(report.boundary_edge_count))
    table.add_row("Manifold patches", str(report.patch_count))
    table.add_row("Components", str(report.component_count))
    return table


def print_report(report: MeshReport) -> None:
    """Print the reconstruction report with pipeline counts.

    Args:
        report: Report of a reconstruction run.
    """
    table = _report_table(report, "Reconstruction")
    table.add_row("Samples", str(report.sample_count))
    table.add_row("Spheres", str(report.sphere_count))
    table.add_row("Iterations", str(report.iterations))
    console.print()
    console.print(table)


def print_stage_times(stage_seconds: dict[str, float]) -> None:
    """Print wall time per pipeline stage and the total.

    Args:
        stage_seconds: Seconds keyed by stage name, in run order.
    """
    if not stage_seconds:
        return
    table = Table(title="Stage times", show_header=True, header_style="bold")
    table.add_column("Stage")
    table.add_column("Time", justify="right")
    for stage, seconds in stage_seconds.items():
        table.add_row(stage, format_seconds(seconds))
    table.add_row("total", format_seconds(sum(stage_seconds.values())), style="bold")
    console.print(table)


def print_evaluation(report: MeshReport) -> None:
    """Print the comparison of two meshes.

    Args:
        report: Report from an evaluation run.
    """
    console.print()
    console.print(_report_table(report, "Evaluation"))


def print_written(kind: str, path: object) -> None:
    """Print a confirmation that an artifact was written.

    Args:
        kind: What was written, e.g. "Mesh".
        path: Where it went.
    """
    console.print(f"{kind} written: {path}", style="green", markup=False)
