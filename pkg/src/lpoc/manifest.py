"""Run manifests and atomic file output for the CLI.

Every output file gets a sidecar ``<name>.manifest.json`` recording the
command, resolved configuration, input digests, seed, tool version, and
timing. Numeric outputs themselves contain no volatile fields, so repeated
runs with identical inputs produce byte-identical data files.
"""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
import time
from dataclasses import dataclass, field


@dataclass
class RunManifest:
    command: str
    version: str
    config: dict
    inputs: dict[str, str] = field(default_factory=dict)
    seed: int | None = None
    started_unix: float = field(default_factory=time.time)
    duration_s: float | None = None
    outputs: list[str] = field(default_factory=list)

    def add_input(self, path) -> None:
        self.inputs[str(path)] = sha256_file(path)

    def finish(self) -> None:
        self.duration_s = time.time() - self.started_unix

    def to_json(self) -> str:
        payload = {
            "command": self.command,
            "version": self.version,
            "config": self.config,
            "inputs": self.inputs,
            "seed": self.seed,
            "started_unix": self.started_unix,
            "duration_s": self.duration_s,
            "outputs": self.outputs,
        }
        return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def write_atomic(path, data: str | bytes) -> None:
    """Write via a temp file in the same directory plus rename."""
    path = str(path)
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    mode = "wb" if isinstance(data, bytes) else "w"
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, mode) as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_output(path, data: str | bytes, manifest: RunManifest) -> None:
    """Atomically write one output plus its manifest sidecar."""
    write_atomic(path, data)
    manifest.outputs.append(os.path.basename(str(path)))
    manifest.finish()
    write_atomic(str(path) + ".manifest.json", manifest.to_json())
