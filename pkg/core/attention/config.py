"""Mechanism hyperparameters for the windowed cross-frame attention."""

from dataclasses import asdict, dataclass, replace

import config
from core.errors import ConfigurationError
from core.kvdoc import parse_bool, parse_kv, render_kv

SAMPLING_MODES = ("sliding", "non_sliding")
BOUNDARY_MODES = ("pad_constant", "clamp_edge")
LAST_FRAME_MODES = ("clamp_to_self",)

# Keys of the text serialization, in document order
CONFIG_KEYS = ("radius", "interval", "heads", "sampling", "boundary", "pad_value", "bias_enabled")


@dataclass(frozen=True)
class EmimConfig:
    """Window radius P, temporal interval, heads and sampling/boundary rules.

    The window spans (2P+1) x (2P+1) positions in the source frame t + interval.
    """
    radius: int = 3
    interval: int = 1
    heads: int = 1
    sampling: str = "sliding"
    boundary: str = "pad_constant"
    pad_value: float = config.PAD_VALUE
    last_frame: str = "clamp_to_self"
    bias_enabled: bool = True

    def __post_init__(self):
        if not isinstance(self.radius, int) or self.radius < 0:
            raise ConfigurationError(f"radius must be a nonnegative integer, got {self.radius!r}")
        if not isinstance(self.interval, int) or self.interval < 1:
            raise ConfigurationError(f"interval must be a positive integer, got {self.interval!r}")
        if not isinstance(self.heads, int) or self.heads < 1:
            raise ConfigurationError(f"heads must be a positive integer, got {self.heads!r}")
        if self.sampling not in SAMPLING_MODES:
            raise ConfigurationError(f"sampling must be one of {SAMPLING_MODES}, got {self.sampling!r}")
        if self.boundary not in BOUNDARY_MODES:
            raise ConfigurationError(f"boundary must be one of {BOUNDARY_MODES}, got {self.boundary!r}")
        if self.last_frame not in LAST_FRAME_MODES:
            raise ConfigurationError(f"last_frame must be one of {LAST_FRAME_MODES}, got {self.last_frame!r}")

    @property
    def window(self) -> int:
        return 2 * self.radius + 1

    @property
    def window_area(self) -> int:
        return self.window * self.window

    def validate_for(self, shape: tuple) -> None:
        """Check this config against a (T, H, W, C) volume shape.

        Raises:
            ConfigurationError: If the window exceeds the spatial extent or the
                heads do not divide the channels.
        """
        _, h, w, c = shape
        if self.window > min(h, w):
            raise ConfigurationError(
                f"window {self.window}x{self.window} exceeds spatial extent {h}x{w}"
            )
        if c % self.heads:
            raise ConfigurationError(f"{c} channels are not divisible by {self.heads} heads")

    def with_overrides(self, **changes) -> "EmimConfig":
        changes = {k: v for k, v in changes.items() if v is not None}
        return replace(self, **changes)

    def to_text(self) -> str:
        values = asdict(self)
        return render_kv({key: values[key] for key in CONFIG_KEYS})

    @classmethod
    def from_text(cls, text: str) -> "EmimConfig":
        """Parse a ``key = value`` document.

        Raises:
            ConfigurationError: On unknown keys or unparseable values.
        """
        raw = parse_kv(text)
        unknown = set(raw) - set(CONFIG_KEYS)
        if unknown:
            raise ConfigurationError(f"unknown config keys: {sorted(unknown)}")
        kwargs = {}
        try:
            for key, value in raw.items():
                if key in ("radius", "interval", "heads"):
                    kwargs[key] = int(value)
                elif key == "pad_value":
                    kwargs[key] = float(value)
                elif key == "bias_enabled":
                    kwargs[key] = parse_bool(value)
                else:
                    kwargs[key] = value
        except ValueError as exc:
            raise ConfigurationError(f"bad config value: {exc}") from exc
        return cls(**kwargs)
