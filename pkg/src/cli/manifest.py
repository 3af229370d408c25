"""Run manifests written next to every CLI output."""

import json
import logging
import time
from datetime import datetime, timezone
from importlib.metadata import PackageNotFoundError, version
from pathlib import Path
from typing import Any, Optional, Union

from pydantic import BaseModel, Field

from src.cli.io import sha256_file

logger = logging.getLogger(__name__)

PACKAGE = "qtree-spectra"


def tool_version() -> str:
    try:
        return version(PACKAGE)
    except PackageNotFoundError:
        return "0.1.0"


def manifest_path(output: Union[str, Path]) -> Path:
    return Path(f"{output}.manifest.json")


class RunManifest(BaseModel):
    """Command, flags, digests and timing of one run."""

    command: str
    flags: dict[str, Any] = Field(default_factory=dict)
    input_digests: dict[str, str] = Field(default_factory=dict)
    output_digests: dict[str, str] = Field(default_factory=dict)
    seed: Optional[int] = None
    version: str = Field(default_factory=tool_version)
    started_at: str = Field(default_factory=lambda: datetime.now(timezone.utc).isoformat())
    wall_clock: float = 0.0

    def argv(self) -> list[str]:
        """Command line reproducing this run (flags in stored order)."""
        out = [self.command]
        for key, value in self.flags.items():
            flag = "--" + key.replace("_", "-")
            if value is None or value is False:
                continue
            if value is True:
                out.append(flag)
            elif isinstance(value, (list, tuple)):
                out.append(flag)
                out.extend(str(v) for v in value)
            else:
                out.extend([flag, str(value)])
        return out

    def write(self, output: Union[str, Path]) -> Path:
        path = manifest_path(output)
        path.write_text(self.model_dump_json(indent=2))
        logger.info(f"Manifest: {path}")
        return path

    @classmethod
    def load(cls, path: Union[str, Path]) -> "RunManifest":
        return cls.model_validate(json.loads(Path(path).read_text()))


def record_run(
    command: str,
    flags: dict[str, Any],
    inputs: list[Union[str, Path]],
    outputs: list[Union[str, Path]],
    started: float,
    seed: Optional[int] = None,
) -> RunManifest:
    """Build and write the manifest for the first output; digests cover all outputs."""
    manifest = RunManifest(
        command=command,
        flags=flags,
        input_digests={str(p): sha256_file(p) for p in inputs},
        output_digests={str(p): sha256_file(p) for p in outputs},
        seed=seed,
        wall_clock=time.perf_counter() - started,
    )
    manifest.write(outputs[0])
    return manifest
