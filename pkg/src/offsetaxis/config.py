"""Run configuration, parameter presets, config files and input specs."""

import dataclasses
from dataclasses import dataclass
from pathlib import Path
from typing import Any

from offsetaxis.errors import InvalidInputError, ParameterError, ParseError
from offsetaxis.models import InputKind

# (alpha, r, delta) triples tuned per dataset family
PRESETS: dict[str, tuple[float, float, float]] = {
    "deepfashion-fine": (0.002, 0.002, 0.01),
    "deepfashion-medium": (0.0015, 0.0015, 0.0075),
    "deepfashion-coarse": (0.001, 0.001, 0.005),
    "3dscene-fine": (0.0015, 0.001, 0.004),
    "3dscene-coarse": (0.0015, 0.0007, 0.0035),
    "shapenetcar-fine": (0.002, 0.001, 0.0075),
    "shapenetcar-coarse": (0.0015, 0.0008, 0.005),
}

_POINT_SUFFIXES = {".xyz", ".pts", ".txt"}
_MESH_SUFFIXES = {".obj", ".ply", ".off", ".stl"}
_GRID_SUFFIXES = {".grid", ".udf"}


@dataclass(frozen=True)
class InputSpec:
    """Parsed form of an --input argument."""

    kind: InputKind
    paths: tuple[Path, ...] = ()
    shape: str = ""
    params: tuple[tuple[str, float], ...] = ()
    inferred: bool = False

    @property
    def path(self) -> Path:
        """The single input path (first path for composite inputs)."""
        return self.paths[0]


def _parse_params(text: str) -> tuple[tuple[str, float], ...]:
    params = []
    for item in filter(None, (part.strip() for part in text.split(","))):
        key, sep, value = item.partition("=")
        if not sep:
            raise InvalidInputError(f"Expected key=value in analytic parameters, got {item!r}")
        try:
            params.append((key.strip(), float(value)))
        except ValueError as e:
            raise InvalidInputError(f"Parameter {key.strip()!r} is not a number: {value!r}") from e
    return tuple(params)


def parse_input(text: str) -> InputSpec:
    """Parse an input spec.

    Accepted forms: ``analytic:<name>[:k=v,...]``, ``points:<path>``,
    ``triangles:<path>``, ``grid:<path>``, ``qmdf:<medial>,<signed>``, or a
    bare path whose kind follows from its suffix.

    Raises:
        InvalidInputError: If the spec cannot be understood.
    """
    prefix, sep, rest = text.partition(":")
    if sep and prefix in {k.value for k in InputKind}:
        kind = InputKind(prefix)
        if not rest:
            raise InvalidInputError(f"Missing value after {prefix!r} in input {text!r}")
        if kind is InputKind.ANALYTIC:
            name, _, params = rest.partition(":")
            return InputSpec(kind=kind, shape=name, params=_parse_params(params))
        if kind is InputKind.QMDF:
            parts = [p for p in rest.split(",") if p]
            if len(parts) != 2:
                raise InvalidInputError(f"qmdf input needs two grid paths, got {rest!r}")
            return InputSpec(kind=kind, paths=(Path(parts[0]), Path(parts[1])))
        return InputSpec(kind=kind, paths=(Path(rest),))

    path = Path(text)
    suffix = path.suffix.lower()
    if suffix in _POINT_SUFFIXES:
        kind = InputKind.POINTS
    elif suffix in _MESH_SUFFIXES:
        kind = InputKind.TRIANGLES
    elif suffix in _GRID_SUFFIXES:
        kind = InputKind.GRID
    else:
        raise InvalidInputError(
            f"Cannot tell the kind of input {text!r}; use points:, triangles:, grid:, qmdf: or analytic:"
        )
    return InputSpec(kind=kind, paths=(path,), inferred=True)


@dataclass(frozen=True)
class RunConfig:
    """All parameters of a reconstruction run."""

    input: str = "analytic:sphere"
    alpha: float = 0.05
    r: float = 0.03
    delta: float = 0.02
    mu: float = 0.2
    k: int = 10
    angle_threshold_deg: float = 60.0
    tol: float = 1e-10
    max_iters: int = 150
    n_rays: int = 200_000
    seed: int = 0
    threads: int = 1
    output: Path | None = None
    report: Path | None = None
    dump_samples: Path | None = None
    dump_spheres: Path | None = None
    energy_log: Path | None = None
    reference: Path | None = None
    n_eval_samples: int = 100_000
    check_thinning: bool = False

    def validate(self) -> "RunConfig":
        """Check parameter ranges.

        Returns:
            self, for chaining.

        Raises:
            ParameterError: On the first out-of-range parameter.
        """
        if not self.alpha > 0:
            raise ParameterError("alpha", self.alpha, "must be > 0")
        if not 0 < self.r <= self.alpha:
            raise ParameterError("r", self.r, f"must satisfy 0 < r <= alpha ({self.alpha})")
        if not self.delta > 0:
            raise ParameterError("delta", self.delta, "must be > 0")
        if self.mu < 0:
            raise ParameterError("mu", self.mu, "must be >= 0")
        if self.k < 3:
            raise ParameterError("k", self.k, "must be >= 3")
        if not 0 < self.angle_threshold_deg <= 180:
            raise ParameterError("angle_threshold_deg", self.angle_threshold_deg, "must be in (0, 180]")
        if self.tol < 0:
            raise ParameterError("tol", self.tol, "must be >= 0")
        if self.max_iters < 1:
            raise ParameterError("max_iters", self.max_iters, "must be >= 1")
        if self.n_rays < 1:
            raise ParameterError("n_rays", self.n_rays, "must be >= 1")
        if self.threads < 1:
            raise ParameterError("threads", self.threads, "must be >= 1")
        if self.n_eval_samples < 1000:
            raise ParameterError("n_eval_samples", self.n_eval_samples, "must be >= 1000")
        return self

    def replace(self, **changes: Any) -> "RunConfig":
        """Copy with some fields changed."""
        return dataclasses.replace(self, **changes)

    def with_preset(self, name: str) -> "RunConfig":
        """Copy with (alpha, r, delta) taken from a named preset.

        Raises:
            InvalidInputError: If the preset is unknown.
        """
        if name not in PRESETS:
            known = ", ".join(sorted(PRESETS))
            raise InvalidInputError(f"Unknown preset {name!r} (known: {known})")
        alpha, r, delta = PRESETS[name]
        return self.replace(alpha=alpha, r=r, delta=delta)


CONFIG_KEYS = frozenset(f.name for f in dataclasses.fields(RunConfig)) | {"preset"}


def load_config_file(path: Path | str) -> dict[str, str]:
    """Read a ``key = value`` config file.

    Blank lines and ``#`` comments are ignored; dashes in keys become
    underscores. Later lines override earlier ones.

    Returns:
        Raw string values keyed by RunConfig field name.

    Raises:
        ParseError: On a malformed line or an unknown key.
    """
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as e:
        raise ParseError(path, f"Cannot read config file: {e}") from e
    values: dict[str, str] = {}
    for number, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ParseError(path, f"Expected 'key = value', got {raw.strip()!r}", number)
        key = key.strip().replace("-", "_")
        if key not in CONFIG_KEYS:
            raise ParseError(path, f"Unknown key {key!r}", number)
        values[key] = value.strip()
    return values
