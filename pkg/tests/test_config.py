"""Tests for mechanism configs, the key/value format and the defaults file."""

import pytest

from core.attention.config import EmimConfig
from core.defaults import load_defaults
from core.errors import ConfigurationError
from core.kvdoc import parse_bool, parse_kv, render_kv


class TestEmimConfig:
    """Tests for EmimConfig validation and serialization."""

    def test_defaults(self):
        """Test the default window is 7x7 with interval 1."""
        cfg = EmimConfig()
        assert cfg.radius == 3
        assert cfg.window == 7
        assert cfg.window_area == 49
        assert cfg.interval == 1

    @pytest.mark.parametrize("kwargs", [
        {"radius": -1},
        {"interval": 0},
        {"heads": 0},
        {"sampling": "dilated"},
        {"boundary": "wrap"},
        {"last_frame": "drop"},
    ])
    def test_invalid_values(self, kwargs):
        """Test each invalid field raises a configuration error."""
        with pytest.raises(ConfigurationError):
            EmimConfig(**kwargs)

    def test_window_larger_than_frame(self):
        """Test a 7x7 window does not fit a 6x8 frame."""
        with pytest.raises(ConfigurationError, match="exceeds"):
            EmimConfig(radius=3).validate_for((1, 6, 8, 4))

    def test_heads_must_divide_channels(self):
        """Test 3 heads cannot split 8 channels."""
        with pytest.raises(ConfigurationError, match="divisible"):
            EmimConfig(radius=1, heads=3).validate_for((1, 4, 4, 8))

    def test_with_overrides_skips_none(self):
        """Test None overrides leave fields untouched."""
        cfg = EmimConfig(radius=2).with_overrides(radius=None, heads=4)
        assert cfg.radius == 2
        assert cfg.heads == 4

    def test_text_round_trip(self):
        """Test a non-default config survives to_text and from_text."""
        cfg = EmimConfig(radius=2, interval=2, heads=4, sampling="non_sliding",
                         boundary="clamp_edge", pad_value=0.5, bias_enabled=False)
        assert EmimConfig.from_text(cfg.to_text()) == cfg

    def test_unknown_key(self):
        """Test an unknown key is rejected."""
        with pytest.raises(ConfigurationError, match="unknown"):
            EmimConfig.from_text("radius = 1\nstride = 2\n")

    def test_bad_integer(self):
        """Test a non-integer radius is rejected."""
        with pytest.raises(ConfigurationError):
            EmimConfig.from_text("radius = three\n")


class TestKvDoc:
    """Tests for the key/value document helpers."""

    def test_render_values(self):
        """Test booleans, floats and lists are rendered."""
        text = render_kv({"a": True, "b": 0.5, "c": (1, 2)})
        assert text == "a = true\nb = 0.5\nc = 1, 2\n"

    def test_parse_skips_comments(self):
        """Test comments and blank lines are ignored."""
        assert parse_kv("# note\n\nx = 1\ny=two words\n") == {"x": "1", "y": "two words"}

    def test_parse_duplicate_key(self):
        """Test a repeated key is rejected."""
        with pytest.raises(ConfigurationError, match="duplicate"):
            parse_kv("x = 1\nx = 2\n")

    def test_parse_missing_equals(self):
        """Test a line without '=' is rejected."""
        with pytest.raises(ConfigurationError):
            parse_kv("radius 3\n")

    def test_parse_bool(self):
        """Test boolean spellings."""
        assert parse_bool("True") is True
        assert parse_bool("0") is False
        with pytest.raises(ConfigurationError):
            parse_bool("maybe")


class TestDefaults:
    """Tests for the bundled defaults file."""

    def test_bundled_file_loads(self):
        """Test the shipped defaults parse and match the toy recipe."""
        defaults = load_defaults()
        assert defaults.mechanism.radius == 3
        assert defaults.mechanism.pattern == "EO"
        assert defaults.toy.classes == 8
        assert defaults.toy.clips % defaults.toy.classes == 0
        assert defaults.check.trials == 100

    def test_missing_file(self, tmp_path):
        """Test a missing file raises a configuration error."""
        with pytest.raises(ConfigurationError, match="not found"):
            load_defaults(tmp_path / "absent.yaml")

    def test_unknown_key(self, tmp_path):
        """Test an unexpected key in a section is rejected."""
        path = tmp_path / "defaults.yaml"
        text = (
            "mechanism: {radius: 3, interval: 1, heads: 1, sampling: sliding, boundary: pad_constant,"
            " pad_value: 1.0e-6, bias_enabled: true, pattern: EO, stride: 2}\n"
        )
        path.write_text(text)
        with pytest.raises(ConfigurationError, match="stride"):
            load_defaults(path)
