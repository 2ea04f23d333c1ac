"""Exception hierarchy for offsetaxis."""

from pathlib import Path


class OffsetAxisError(Exception):
    """Base class for all offsetaxis errors."""


class InvalidInputError(OffsetAxisError, ValueError):
    """Raised for non-finite coordinates or otherwise unusable inputs."""


class ParameterError(InvalidInputError):
    """Raised when a numeric parameter is outside its valid range."""

    def __init__(self, name: str, value: object, requirement: str) -> None:
        """Initialize with the offending parameter.

        Args:
            name: Parameter name (e.g. "alpha").
            value: The rejected value.
            requirement: Human-readable constraint, e.g. "must be > 0".
        """
        self.name = name
        self.value = value
        super().__init__(f"Invalid {name}={value!r}: {requirement}")


class ParseError(OffsetAxisError):
    """Raised when an input file cannot be parsed."""

    def __init__(self, path: Path | str, message: str, line: int | None = None) -> None:
        """Initialize with the file location of the problem.

        Args:
            path: File being parsed.
            message: What went wrong.
            line: 1-based line number, if known.
        """
        self.path = Path(path)
        self.line = line
        where = f"{self.path}:{line}" if line is not None else f"{self.path}"
        super().__init__(f"{where}: {message}")


class FormatError(ParseError):
    """Raised when a grid file header disagrees with its payload."""


class EmptyResultError(OffsetAxisError):
    """Raised when a stage produces nothing to work with."""


class OptimizationError(OffsetAxisError):
    """Raised when the alternating minimization increases the energy."""

    def __init__(self, iteration: int, previous: float, current: float) -> None:
        """Initialize with the offending iteration.

        Args:
            iteration: Iteration at which the increase was observed.
            previous: Energy after the previous iteration.
            current: Energy after this iteration.
        """
        self.iteration = iteration
        self.previous = previous
        self.current = current
        super().__init__(
            f"Energy increased at iteration {iteration}: "
            f"{previous:.12g} -> {current:.12g} (+{current - previous:.3g})"
        )


class PipelineError(OffsetAxisError):
    """Raised when a pipeline stage fails; tagged with the stage name."""

    def __init__(self, stage: str, cause: BaseException) -> None:
        """Initialize with the failing stage.

        Args:
            stage: Pipeline stage name (e.g. "sample").
            cause: The underlying exception.
        """
        self.stage = stage
        self.cause = cause
        super().__init__(f"[{stage}] {cause}")


class ThinningError(OffsetAxisError):
    """Raised by checked thinning when a collapse breaks closure or the Euler characteristic."""

    def __init__(self, step: int, message: str) -> None:
        """Initialize with the offending collapse.

        Args:
            step: 1-based index of the collapse that failed the check.
            message: What the check found.
        """
        self.step = step
        super().__init__(f"Thinning step {step}: {message}")
