"""Per-directory manifest describing how a file set was produced."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

MANIFEST_NAME = "manifest.json"


@dataclass
class AdapterManifest:
    tool: str
    tool_version: str
    model: str = ""
    backbone: str = ""
    intrinsics_at_inference: bool = False
    resize_policy: str = "none"  # e.g. "long-side-1024"
    coordinate_space: str = "native"
    files: list[dict] = field(default_factory=list)
    failures: list[dict] = field(default_factory=list)

    def __post_init__(self):
        if self.coordinate_space != "native":
            raise ValueError("emitted coordinates must be declared native resolution")

    def record_file(self, path: str | Path, **meta) -> None:
        self.files.append({"path": Path(path).name, **meta})

    def record_failure(self, subject: str, error: str) -> None:
        self.failures.append({"subject": subject, "error": error})

    def write(self, directory: str | Path) -> Path:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        out = directory / MANIFEST_NAME
        out.write_text(json.dumps(asdict(self), indent=2, sort_keys=True))
        return out


def read_manifest(directory: str | Path) -> AdapterManifest:
    doc = json.loads((Path(directory) / MANIFEST_NAME).read_text())
    return AdapterManifest(**doc)
