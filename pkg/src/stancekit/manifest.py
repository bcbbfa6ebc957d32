"""Deterministic run manifests.

A manifest records what a pipeline stage consumed and produced: sha256 of
every input and output file plus the effective config. No timestamps or
host details, so reruns with the same seed produce byte-identical manifests.
"""

import hashlib
import json
from pathlib import Path

from . import __version__
from .errors import DataError

_CHUNK = 1 << 20


def file_sha256(path) -> str:
    path = Path(path)
    if not path.is_file():
        raise DataError(f"cannot hash missing file: {path}")
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        while True:
            block = fh.read(_CHUNK)
            if not block:
                break
            digest.update(block)
    return digest.hexdigest()


def _hash_entry(path) -> dict:
    return {"path": str(path), "sha256": file_sha256(path)}


def build_manifest(stage: str, config: dict, inputs: dict, outputs: dict, extra: dict | None = None) -> dict:
    """inputs/outputs map role names to file paths; both get hashed."""
    return {
        "tool": "stancekit",
        "version": __version__,
        "stage": stage,
        "config": config,
        "inputs": {name: _hash_entry(p) for name, p in sorted(inputs.items())},
        "outputs": {name: _hash_entry(p) for name, p in sorted(outputs.items())},
        "extra": extra or {},
    }


def write_manifest(path, stage: str, config: dict, inputs: dict, outputs: dict, extra: dict | None = None) -> dict:
    manifest = build_manifest(stage, config, inputs, outputs, extra)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest


def read_manifest(path) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)
