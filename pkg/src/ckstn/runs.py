"""Run manifests: one JSON record per tool invocation.

A manifest is written when a run starts and finalized in place when it ends.
Reruns into the same directory never overwrite an earlier manifest; the file
name gets a numeric suffix instead.
"""
from __future__ import annotations

import json
import subprocess
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

try:
    from importlib.metadata import version as _pkg_version
except ImportError:  # pragma: no cover
    _pkg_version = None  # type: ignore[assignment]


def _utc_now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def version_stamp() -> str:
    """Package version plus the git revision when one is discoverable."""
    pkg = "unknown"
    if _pkg_version is not None:
        try:
            pkg = _pkg_version("ckstn")
        except Exception:
            pass
    rev = ""
    try:
        proc = subprocess.run(
            ["git", "rev-parse", "--short", "HEAD"],
            capture_output=True, text=True, timeout=5)
        if proc.returncode == 0:
            rev = proc.stdout.strip()
    except (OSError, subprocess.TimeoutExpired):
        pass
    return f"{pkg}+{rev}" if rev else pkg


def _fresh_path(out_dir: Path) -> Path:
    base = out_dir / "run-manifest.json"
    if not base.exists():
        return base
    k = 2
    while (out_dir / f"run-manifest-{k}.json").exists():
        k += 1
    return out_dir / f"run-manifest-{k}.json"


@dataclass
class RunManifest:
    command: str
    config_paths: list[str]
    seed: int | None
    out_dir: str
    version: str = field(default_factory=version_stamp)
    started_at: str = field(default_factory=_utc_now)
    finished_at: str | None = None
    status: str = "running"
    path: Path | None = None

    def as_dict(self) -> dict:
        return {
            "command": self.command,
            "config_paths": self.config_paths,
            "seed": self.seed,
            "out_dir": self.out_dir,
            "version": self.version,
            "started_at": self.started_at,
            "finished_at": self.finished_at,
            "status": self.status,
        }

    def write(self) -> Path:
        """First write claims a fresh suffixed file; later writes update it."""
        out = Path(self.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        if self.path is None:
            self.path = _fresh_path(out)
        self.path.write_text(json.dumps(self.as_dict(), indent=2) + "\n")
        return self.path

    def finalize(self, status: str) -> Path:
        self.finished_at = _utc_now()
        self.status = status
        return self.write()
