"""Flat ``key = value`` text documents (configs, manifests, report headers)."""

from core.errors import ConfigurationError


def render_kv(entries: dict) -> str:
    lines = [f"{key} = {_render_value(value)}" for key, value in entries.items()]
    return "\n".join(lines) + "\n"


def parse_kv(text: str) -> dict[str, str]:
    """Parse a document into raw string values.

    Blank lines and lines starting with ``#`` are ignored.

    Raises:
        ConfigurationError: On a line without ``=`` or a repeated key.
    """
    entries: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigurationError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key in entries:
            raise ConfigurationError(f"line {lineno}: duplicate key {key!r}")
        entries[key] = value
    return entries


def parse_bool(value: str) -> bool:
    lowered = value.strip().lower()
    if lowered in ("true", "1", "yes"):
        return True
    if lowered in ("false", "0", "no"):
        return False
    raise ConfigurationError(f"not a boolean: {value!r}")


def _render_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, (list, tuple)):
        return ", ".join(_render_value(v) for v in value)
    return str(value)
