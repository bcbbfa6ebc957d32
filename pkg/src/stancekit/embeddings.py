"""Dense document embeddings: TSEB binary storage and cosine kernels.

Rows are stored as f32; every accumulation (norms, dot products, means) runs
in f64. The TSEB on-disk layout is:

    magic "TSEB" | version u32 LE | rows u64 LE | dims u32 LE
    | rows*dims f32 LE payload | UTF-8 JSON array of row ids

A matrix is flagged `normalized` when every row's L2 norm is within 1e-4 of 1;
clustering and sampling require that flag.
"""

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DataError, FormatError, NumericalError

TSEB_MAGIC = b"TSEB"
TSEB_VERSION = 1
_HEADER = struct.Struct("<4sIQI")

NORM_TOL = 1e-4


def _rows_normalized(data: np.ndarray) -> bool:
    if data.shape[0] == 0:
        return True
    norms = np.linalg.norm(data.astype(np.float64), axis=1)
    return bool(np.all(np.abs(norms - 1.0) <= NORM_TOL))


@dataclass
class EmbeddingMatrix:
    """n x dims f32 matrix keyed by document ids. Immutable by convention."""

    ids: list
    data: np.ndarray
    normalized: bool = field(default=False)

    def __post_init__(self):
        self.data = np.ascontiguousarray(self.data, dtype=np.float32)
        if self.data.ndim != 2:
            raise DataError("embedding data must be a 2-D array")
        if len(self.ids) != self.data.shape[0]:
            raise DataError(
                f"id count {len(self.ids)} != row count {self.data.shape[0]}"
            )
        if len(set(self.ids)) != len(self.ids):
            dupes = sorted({i for i in self.ids if self.ids.count(i) > 1})
            raise DataError(f"duplicate embedding ids: {dupes[:5]}")
        self.ids = list(self.ids)
        self.normalized = _rows_normalized(self.data)

    @property
    def n(self) -> int:
        return self.data.shape[0]

    @property
    def dims(self) -> int:
        return self.data.shape[1]

    def row_index(self) -> dict:
        return {doc_id: i for i, doc_id in enumerate(self.ids)}

    def rows_for(self, ids) -> np.ndarray:
        index = self.row_index()
        missing = [i for i in ids if i not in index]
        if missing:
            raise DataError(f"ids missing from embedding matrix: {missing[:5]}")
        return self.data[[index[i] for i in ids]]

    def subset(self, ids) -> "EmbeddingMatrix":
        return EmbeddingMatrix(ids=list(ids), data=self.rows_for(ids))


def normalize_rows(m: EmbeddingMatrix) -> EmbeddingMatrix:
    """Return a copy with unit-L2 rows. Zero rows are rejected by id."""
    norms = np.linalg.norm(m.data.astype(np.float64), axis=1)
    zero = np.where(norms == 0.0)[0]
    if zero.size:
        bad = [m.ids[i] for i in zero[:5]]
        raise DataError(f"cannot normalize zero rows: {bad}")
    data = (m.data.astype(np.float64) / norms[:, None]).astype(np.float32)
    return EmbeddingMatrix(ids=list(m.ids), data=data)


def cosine_similarity(a, b) -> float:
    """Cosine of two vectors, accumulated in f64."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        raise NumericalError("cosine similarity of a zero vector is undefined")
    return float(np.dot(a, b) / (na * nb))


def cosine_to_centroid(data: np.ndarray, centroid: np.ndarray) -> np.ndarray:
    """Cosine of every row against one centroid (batched kernel)."""
    rows = np.asarray(data, dtype=np.float64)
    cent = np.asarray(centroid, dtype=np.float64)
    nc = np.linalg.norm(cent)
    if nc == 0.0:
        raise NumericalError("cosine against a zero centroid is undefined")
    norms = np.linalg.norm(rows, axis=1)
    if np.any(norms == 0.0):
        raise NumericalError("cosine of a zero row is undefined")
    return (rows @ cent) / (norms * nc)


def write_matrix(m: EmbeddingMatrix, path) -> None:
    ids_blob = json.dumps(m.ids, ensure_ascii=False).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(TSEB_MAGIC, TSEB_VERSION, m.n, m.dims))
        fh.write(np.ascontiguousarray(m.data, dtype="<f4").tobytes())
        fh.write(ids_blob)


def read_matrix(path) -> EmbeddingMatrix:
    """Read a TSEB file; write->read round-trips bit-exactly."""
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise FormatError(f"{path}: truncated header", offset=len(raw))
    magic, version, rows, dims = _HEADER.unpack_from(raw, 0)
    if magic != TSEB_MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}", offset=0)
    if version != TSEB_VERSION:
        raise FormatError(f"{path}: unsupported version {version}", offset=4)
    payload_start = _HEADER.size
    payload_len = rows * dims * 4
    if len(raw) < payload_start + payload_len:
        raise FormatError(
            f"{path}: payload truncated, expected {payload_len} bytes",
            offset=len(raw),
        )
    data = np.frombuffer(
        raw, dtype="<f4", count=rows * dims, offset=payload_start
    ).reshape(rows, dims).copy()
    ids_start = payload_start + payload_len
    try:
        ids = json.loads(raw[ids_start:].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FormatError(f"{path}: bad id sidecar: {exc}", offset=ids_start) from None
    if not isinstance(ids, list) or len(ids) != rows:
        got = len(ids) if isinstance(ids, list) else "non-list"
        raise FormatError(
            f"{path}: id count mismatch, header says {rows}, sidecar has {got}",
            offset=ids_start,
        )
    return EmbeddingMatrix(ids=ids, data=data)


def read_matrix_csv(path) -> EmbeddingMatrix:
    """Import `id,v1,...,vd` rows (no header) as an EmbeddingMatrix."""
    ids, rows = [], []
    dims = None
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) < 2:
                raise DataError(f"{path}:{lineno}: expected id plus floats")
            if dims is None:
                dims = len(parts) - 1
            elif len(parts) - 1 != dims:
                raise DataError(
                    f"{path}:{lineno}: expected {dims} values, got {len(parts) - 1}"
                )
            ids.append(parts[0])
            try:
                rows.append([float(x) for x in parts[1:]])
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: {exc}") from None
    return EmbeddingMatrix(ids=ids, data=np.array(rows, dtype=np.float32))
