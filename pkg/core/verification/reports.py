"""Report documents: machine-readable JSON and a key-value + table text form."""

import json
import math
from pathlib import Path

from core.kvdoc import render_kv

# Fields every JSON report carries
REPORT_FIELDS = ("max_rel_err", "max_abs_err", "tolerance", "passed", "failing_seed")


def _json_safe(value):
    if isinstance(value, float) and not math.isfinite(value):
        return None
    if isinstance(value, dict):
        return {k: _json_safe(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_json_safe(v) for v in value]
    return value


def make_report(
    max_rel_err: float | None,
    max_abs_err: float | None,
    tolerance: float | None,
    passed: bool,
    failing_seed: int | None = None,
    **extra,
) -> dict:
    report = {
        "max_rel_err": max_rel_err,
        "max_abs_err": max_abs_err,
        "tolerance": tolerance,
        "passed": bool(passed),
        "failing_seed": failing_seed,
    }
    report.update(extra)
    return _json_safe(report)


def render_table(headers: list[str], rows: list[list]) -> str:
    cells = [[str(h) for h in headers]] + [[_cell(v) for v in row] for row in rows]
    widths = [max(len(r[i]) for r in cells) for i in range(len(headers))]
    lines = ["  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip() for r in cells]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"


def render_text(title: str, header: dict, tables: list[tuple[str, list[str], list[list]]] = ()) -> str:
    """``[title]`` then ``key = value`` lines, then one titled table per entry."""
    parts = [f"[{title}]\n", render_kv(header)]
    for name, headers, rows in tables:
        parts.append(f"\n[{name}]\n")
        parts.append(render_table(headers, rows))
    return "".join(parts)


def write_json(path: Path, report: dict) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(report, indent=2, sort_keys=False) + "\n")
    return path


def write_text(path: Path, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)
    return path


def _cell(value) -> str:
    if isinstance(value, float):
        return f"{value:.3e}" if value and (abs(value) < 1e-3 or abs(value) >= 1e6) else f"{value:.4f}"
    if isinstance(value, bool):
        return "yes" if value else "no"
    return str(value)
