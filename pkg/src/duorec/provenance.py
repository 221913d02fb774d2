"""Content fingerprints and run manifests.

Every pipeline artifact gets a sidecar manifest recording the resolved
configuration, the fingerprints of everything it consumed and the
fingerprints of everything it produced, so a run can be audited or
reproduced from the manifest chain alone.
"""

from __future__ import annotations

import hashlib
import json
import time
from pathlib import Path


def fingerprint_bytes(data: bytes) -> str:
    return "sha256:" + hashlib.sha256(data).hexdigest()


def fingerprint_file(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return "sha256:" + h.hexdigest()


class RunManifest:
    """Collects provenance for one CLI run and writes it as JSON."""

    def __init__(self, subcommand: str, config: dict, seed=None, version: str = ""):
        self.subcommand = subcommand
        self.config = config
        self.seed = seed
        self.version = version
        self.inputs: dict[str, str] = {}
        self.outputs: dict[str, str] = {}
        self._t0 = time.time()

    def add_input(self, path: str | Path) -> None:
        self.inputs[str(path)] = fingerprint_file(path)

    def add_output(self, path: str | Path) -> None:
        self.outputs[str(path)] = fingerprint_file(path)

    def write(self, path: str | Path) -> None:
        doc = {
            "subcommand": self.subcommand,
            "tool_version": self.version,
            "seed": self.seed,
            "config": self.config,
            "inputs": self.inputs,
            "outputs": self.outputs,
            "elapsed_seconds": round(time.time() - self._t0, 3),
        }
        Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def manifest_path(artifact: str | Path) -> Path:
    return Path(str(artifact) + ".manifest.json")
