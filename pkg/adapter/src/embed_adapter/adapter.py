"""Read a corpus export, embed every document, write consumer-ready files."""

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .encoders import DEFAULT_MODEL, get_encoder
from .errors import DataError, ModelError, UsageError
from .formats import write_clustering, write_tseb


@dataclass(frozen=True)
class AdapterConfig:
    """One export run. Fields map one-to-one onto CLI flags.

    `clusters` and `seed` only matter for the cluster export; the encoders
    themselves are deterministic, so embedding output has no seed.
    """

    model: str = DEFAULT_MODEL
    batch_size: int = 32
    corpus_path: str = "corpus.jsonl"
    embeddings_path: str = "embeddings.tseb"
    clusters_path: str = "clusters.json"
    clusters: int = 8
    seed: int = 0

    def __post_init__(self):
        if self.batch_size < 1:
            raise UsageError(f"batch size must be >= 1, got {self.batch_size}")
        if self.clusters < 1:
            raise UsageError(f"cluster count must be >= 1, got {self.clusters}")
        if self.seed < 0:
            raise UsageError(f"seed must be >= 0, got {self.seed}")


def read_corpus(path):
    """Load (ids, texts) from a JSONL corpus, one object per line.

    Only the `id` and `text` fields are consumed; producers are free to
    carry any other per-document fields. Blank lines are skipped.
    """
    p = Path(path)
    if not p.exists():
        raise DataError(f"corpus not found: {path}")
    ids, texts = [], []
    seen = set()
    with open(p, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"{path}:{lineno}: invalid JSON: {exc}") from None
            if not isinstance(record, dict) or "id" not in record or "text" not in record:
                raise DataError(f"{path}:{lineno}: record needs 'id' and 'text' fields")
            doc_id = str(record["id"])
            if doc_id in seen:
                raise DataError(f"{path}:{lineno}: duplicate id {doc_id!r}")
            seen.add(doc_id)
            ids.append(doc_id)
            texts.append(str(record["text"]))
    if not ids:
        raise DataError(f"corpus is empty: {path}")
    return ids, texts


def _embed(ids, texts, cfg: AdapterConfig) -> np.ndarray:
    """Encode in batches and unit-normalize; rows stay in corpus order."""
    encoder = get_encoder(cfg.model)
    chunks = []
    for start in range(0, len(texts), cfg.batch_size):
        chunk = encoder.encode(texts[start : start + cfg.batch_size])
        chunks.append(np.asarray(chunk, dtype=np.float64))
    data = np.vstack(chunks)
    if data.shape != (len(ids), encoder.dims):
        raise ModelError(
            f"encoder {cfg.model!r} returned shape {data.shape}, "
            f"expected ({len(ids)}, {encoder.dims})"
        )
    if not np.all(np.isfinite(data)):
        raise ModelError(f"encoder {cfg.model!r} returned non-finite values")
    norms = np.linalg.norm(data, axis=1)
    dead = [ids[i] for i in np.where(norms == 0.0)[0][:5]]
    if dead:
        raise DataError(f"documents embed to the zero vector: {dead}")
    return data / norms[:, None]


def export_embeddings(cfg: AdapterConfig) -> int:
    """Embed the corpus and write the binary matrix; returns the row count."""
    ids, texts = read_corpus(cfg.corpus_path)
    data = _embed(ids, texts, cfg)
    write_tseb(ids, data, cfg.embeddings_path)
    return len(ids)


def export_clusters(cfg: AdapterConfig) -> dict:
    """Embed, cluster into `cfg.clusters` groups, write the assignment JSON.

    Returns the id -> cluster mapping. k-means on unit-norm rows never leaves
    a cluster empty, which the consumer requires on import.
    """
    ids, texts = read_corpus(cfg.corpus_path)
    if cfg.clusters > len(ids):
        raise DataError(
            f"cannot split {len(ids)} documents into {cfg.clusters} clusters"
        )
    data = _embed(ids, texts, cfg)
    labels = _kmeans_labels(data, cfg.clusters, cfg.seed)
    assignments = {doc_id: int(k) for doc_id, k in zip(ids, labels)}
    write_clustering(assignments, cfg.clusters, cfg.clusters_path)
    return assignments


def _kmeans_labels(data: np.ndarray, t: int, seed: int) -> np.ndarray:
    if t == 1:
        return np.zeros(data.shape[0], dtype=int)
    # unit rows make squared Euclidean a monotone function of cosine
    from sklearn.cluster import KMeans

    km = KMeans(n_clusters=t, random_state=seed, n_init=10)
    return km.fit_predict(data)
