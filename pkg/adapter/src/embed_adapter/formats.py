"""Writers for the files the training toolkit reads.

The embedding layout matches the consumer's reader byte for byte:

    magic "TSEB" | version u32 LE | rows u64 LE | dims u32 LE
    | rows*dims f32 LE payload | UTF-8 JSON array of row ids

Cluster assignments are plain JSON: ``{"t": int, "assignments": {id: index}}``.
This module deliberately has no dependency on the consumer package; the
formats above are the whole contract between the two.
"""

import json
import struct
from pathlib import Path

import numpy as np

from .errors import DataError

TSEB_MAGIC = b"TSEB"
TSEB_VERSION = 1
_HEADER = struct.Struct("<4sIQI")


def write_tseb(ids, data: np.ndarray, path) -> None:
    """Write rows as f32 little-endian with the id sidecar appended."""
    rows = np.ascontiguousarray(data, dtype="<f4")
    if rows.ndim != 2:
        raise DataError(f"embedding payload must be 2-D, got shape {rows.shape}")
    if len(ids) != rows.shape[0]:
        raise DataError(f"{len(ids)} ids for {rows.shape[0]} embedding rows")
    blob = json.dumps(list(ids), ensure_ascii=False).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(TSEB_MAGIC, TSEB_VERSION, rows.shape[0], rows.shape[1]))
        fh.write(rows.tobytes())
        fh.write(blob)


def write_clustering(assignments: dict, t: int, path) -> None:
    """Write a cluster-assignment file, ids sorted so reruns are byte-stable."""
    if t < 1:
        raise DataError(f"cluster count must be >= 1, got {t}")
    bad = sorted(k for k, v in assignments.items() if not 0 <= int(v) < t)
    if bad:
        raise DataError(f"assignments outside [0, {t}): {bad[:5]}")
    payload = {
        "t": int(t),
        "assignments": {str(k): int(v) for k, v in sorted(assignments.items())},
    }
    Path(path).write_text(json.dumps(payload, indent=0), encoding="utf-8")
