"""Tests for run configuration, presets, config files and input specs."""

from pathlib import Path

import pytest

from offsetaxis.config import PRESETS, RunConfig, load_config_file, parse_input
from offsetaxis.errors import InvalidInputError, ParameterError, ParseError
from offsetaxis.models import InputKind


class TestRunConfigValidate:
    """Tests for RunConfig.validate."""

    def test_defaults_are_valid(self) -> None:
        """Test the default configuration passes."""
        config = RunConfig()
        assert config.validate() is config

    def test_r_above_alpha(self) -> None:
        """Test the Poisson radius may not exceed alpha."""
        with pytest.raises(ParameterError, match="r=0.1") as exc_info:
            RunConfig(alpha=0.05, r=0.1).validate()
        assert exc_info.value.name == "r"

    def test_r_equal_alpha(self) -> None:
        """Test r = alpha is allowed."""
        RunConfig(alpha=0.05, r=0.05).validate()

    @pytest.mark.parametrize(
        ("changes", "name"),
        [
            ({"alpha": 0.0}, "alpha"),
            ({"delta": -1.0}, "delta"),
            ({"mu": -0.1}, "mu"),
            ({"k": 2}, "k"),
            ({"angle_threshold_deg": 0.0}, "angle_threshold_deg"),
            ({"angle_threshold_deg": 181.0}, "angle_threshold_deg"),
            ({"tol": -1.0}, "tol"),
            ({"max_iters": 0}, "max_iters"),
            ({"n_rays": 0}, "n_rays"),
            ({"threads": 0}, "threads"),
            ({"n_eval_samples": 999}, "n_eval_samples"),
        ],
    )
    def test_out_of_range(self, changes: dict[str, float], name: str) -> None:
        """Test each range check names its parameter."""
        with pytest.raises(ParameterError) as exc_info:
            RunConfig().replace(**changes).validate()
        assert exc_info.value.name == name

    def test_mu_zero_allowed(self) -> None:
        """Test the line quadric can be switched off."""
        RunConfig(mu=0.0).validate()


class TestPresets:
    """Tests for parameter presets."""

    def test_every_preset_validates(self) -> None:
        """Test every preset gives a valid configuration."""
        for name in PRESETS:
            RunConfig().with_preset(name).validate()

    def test_with_preset(self) -> None:
        """Test a preset sets alpha, r and delta only."""
        config = RunConfig(seed=7).with_preset("deepfashion-fine")
        assert (config.alpha, config.r, config.delta) == (0.002, 0.002, 0.01)
        assert config.seed == 7

    def test_unknown_preset(self) -> None:
        """Test an unknown preset lists the known ones."""
        with pytest.raises(InvalidInputError, match="known: 3dscene-coarse"):
            RunConfig().with_preset("nope")


class TestLoadConfigFile:
    """Tests for load_config_file."""

    def test_values(self, tmp_path: Path) -> None:
        """Test keys, comments and dashed names."""
        path = tmp_path / "run.cfg"
        path.write_text("# sphere run\nalpha = 0.1\n\nn-rays = 5000  # fewer\nseed=3\nseed = 4\n")
        assert load_config_file(path) == {"alpha": "0.1", "n_rays": "5000", "seed": "4"}

    def test_preset_key(self, tmp_path: Path) -> None:
        """Test a preset may be named in a config file."""
        path = tmp_path / "run.cfg"
        path.write_text("preset = 3dscene-fine\n")
        assert load_config_file(path) == {"preset": "3dscene-fine"}

    def test_unknown_key(self, tmp_path: Path) -> None:
        """Test unknown keys report their line."""
        path = tmp_path / "run.cfg"
        path.write_text("alpha = 0.1\nbeta = 2\n")
        with pytest.raises(ParseError, match="beta") as exc_info:
            load_config_file(path)
        assert exc_info.value.line == 2

    def test_missing_equals(self, tmp_path: Path) -> None:
        """Test a line without '=' is rejected."""
        path = tmp_path / "run.cfg"
        path.write_text("alpha 0.1\n")
        with pytest.raises(ParseError) as exc_info:
            load_config_file(path)
        assert exc_info.value.line == 1

    def test_missing_file(self, tmp_path: Path) -> None:
        """Test an unreadable file is a parse error."""
        with pytest.raises(ParseError, match="Cannot read"):
            load_config_file(tmp_path / "missing.cfg")


class TestParseInput:
    """Tests for parse_input."""

    def test_analytic_with_params(self) -> None:
        """Test analytic shapes carry numeric parameters."""
        spec = parse_input("analytic:torus:major=0.6,minor=0.1")
        assert spec.kind is InputKind.ANALYTIC
        assert spec.shape == "torus"
        assert spec.params == (("major", 0.6), ("minor", 0.1))

    def test_analytic_without_params(self) -> None:
        """Test a bare analytic name."""
        spec = parse_input("analytic:sphere")
        assert spec.shape == "sphere"
        assert spec.params == ()

    def test_bad_param(self) -> None:
        """Test analytic parameters need key=value."""
        with pytest.raises(InvalidInputError, match="key=value"):
            parse_input("analytic:sphere:radius")

    def test_non_numeric_param(self) -> None:
        """Test analytic parameters must be numbers."""
        with pytest.raises(InvalidInputError, match="not a number"):
            parse_input("analytic:sphere:radius=big")

    @pytest.mark.parametrize(
        ("text", "kind"),
        [
            ("points:cloud.xyz", InputKind.POINTS),
            ("triangles:soup.obj", InputKind.TRIANGLES),
            ("grid:field.grid", InputKind.GRID),
        ],
    )
    def test_prefixed_paths(self, text: str, kind: InputKind) -> None:
        """Test prefixes choose the kind explicitly."""
        spec = parse_input(text)
        assert spec.kind is kind
        assert spec.path == Path(text.partition(":")[2])
        assert not spec.inferred

    def test_qmdf(self) -> None:
        """Test the quasi-medial input takes two grids."""
        spec = parse_input("qmdf:mf.grid,sdf.grid")
        assert spec.kind is InputKind.QMDF
        assert spec.paths == (Path("mf.grid"), Path("sdf.grid"))

    def test_qmdf_needs_two(self) -> None:
        """Test one grid is not enough for qmdf."""
        with pytest.raises(InvalidInputError, match="two grid paths"):
            parse_input("qmdf:mf.grid")

    def test_missing_value(self) -> None:
        """Test a prefix without a value."""
        with pytest.raises(InvalidInputError, match="Missing value"):
            parse_input("points:")

    @pytest.mark.parametrize(
        ("text", "kind"),
        [
            ("scan.xyz", InputKind.POINTS),
            ("scan.PTS", InputKind.POINTS),
            ("shirt.obj", InputKind.TRIANGLES),
            ("shirt.ply", InputKind.TRIANGLES),
            ("field.udf", InputKind.GRID),
        ],
    )
    def test_inferred_from_suffix(self, text: str, kind: InputKind) -> None:
        """Test bare paths are classified by suffix."""
        spec = parse_input(text)
        assert spec.kind is kind
        assert spec.inferred

    def test_unknown_suffix(self) -> None:
        """Test an unclassifiable path is rejected."""
        with pytest.raises(InvalidInputError, match="Cannot tell"):
            parse_input("data.bin")
