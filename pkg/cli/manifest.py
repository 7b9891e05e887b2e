"""Run manifests: one ``manifest.txt`` per CLI invocation."""

from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import config
from core.kvdoc import parse_kv, render_kv
from core.logger import logger

MANIFEST_NAME = "manifest.txt"


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


@dataclass
class RunManifest:
    command: str
    seed: int
    argv: list[str]
    settings: dict = field(default_factory=dict)
    outputs: list[str] = field(default_factory=list)
    exit_code: int | None = None
    tool_version: str = config.TOOL_VERSION
    started: str = field(default_factory=_now)
    finished: str = ""

    def add_output(self, path: Path) -> None:
        self.outputs.append(Path(path).name)

    def render(self) -> str:
        header = {
            "command": self.command,
            "seed": self.seed,
            "tool_version": self.tool_version,
            "argv": " ".join(self.argv),
            "exit_code": self.exit_code,
            "started": self.started,
            "finished": self.finished,
            "outputs": self.outputs,
        }
        body = {f"config.{k}": v for k, v in self.settings.items()}
        return render_kv(header) + render_kv(body) if body else render_kv(header)


def write_manifest(manifest: RunManifest, out_dir: Path) -> Path:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest.finished = _now()
    path = out_dir / MANIFEST_NAME
    path.write_text(manifest.render())
    logger.debug(f"Wrote manifest {path}")
    return path


def read_manifest(path: Path) -> dict[str, str]:
    return parse_kv(Path(path).read_text())
