"""Topic clusters over embeddings, plus the corpus/word information diagnostic.

Clusters come either from spherical k-means (cosine metric, k-means++-style
seeding, seeded RNG) or from an externally supplied assignment file. The
mutual-information diagnostic scores how informative the document/word
co-occurrence structure is; it is a reporting metric, never a training
signal.
"""

import json
import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DataError, NumericalError

_TOKEN_RE = re.compile(r"[a-z0-9]+")


def default_cluster_count(n: int) -> int:
    """Heuristic cluster count when the caller does not pin one."""
    return max(2, int(round(np.sqrt(n / 2.0))))


@dataclass
class TopicClustering:
    """Partition of document ids into t clusters with importance weights.

    `centroids` is None for imported clusterings built without embeddings;
    the sampler recomputes per-cluster centroids from member embeddings and
    never reads this field.
    """

    assignments: dict
    t: int
    centroids: np.ndarray | None = None
    importances: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.t < 1:
            raise DataError("cluster count must be >= 1")
        if not self.assignments:
            raise DataError("clustering has no assignments")
        sizes = np.zeros(self.t, dtype=np.int64)
        for doc_id, idx in self.assignments.items():
            if not 0 <= idx < self.t:
                raise DataError(f"id {doc_id!r} assigned to out-of-range cluster {idx}")
            sizes[idx] += 1
        empty = np.where(sizes == 0)[0]
        if empty.size:
            raise DataError(f"empty clusters: {empty.tolist()}")
        self.importances = sizes.astype(np.float64) / sizes.sum()

    def members(self) -> list:
        """Per-cluster id lists, each sorted lexicographically."""
        out = [[] for _ in range(self.t)]
        for doc_id, idx in self.assignments.items():
            out[idx].append(doc_id)
        return [sorted(ids) for ids in out]

    def sizes(self) -> np.ndarray:
        sizes = np.zeros(self.t, dtype=np.int64)
        for idx in self.assignments.values():
            sizes[idx] += 1
        return sizes


def _normalize(v: np.ndarray) -> np.ndarray:
    norm = np.linalg.norm(v)
    if norm == 0.0:
        raise NumericalError("cannot normalize a zero centroid")
    return v / norm


def _plusplus_seed(data: np.ndarray, t: int, rng: np.random.Generator) -> np.ndarray:
    """k-means++-style seeding with squared cosine distance weights."""
    n = data.shape[0]
    centroids = np.empty((t, data.shape[1]), dtype=np.float64)
    first = int(rng.integers(n))
    centroids[0] = data[first]
    # best cosine similarity to any chosen centroid, per point
    best = data @ centroids[0]
    for k in range(1, t):
        dist = np.maximum(1.0 - best, 0.0)
        weights = dist * dist
        total = weights.sum()
        if total <= 0.0:
            idx = int(rng.integers(n))
        else:
            idx = int(rng.choice(n, p=weights / total))
        centroids[k] = data[idx]
        best = np.maximum(best, data @ centroids[k])
    return centroids


def fit_spherical_kmeans(
    m,
    t: int | None = None,
    seed: int = 0,
    max_iter: int = 100,
) -> TopicClustering:
    """Cluster unit-norm embeddings by cosine similarity.

    Assignments go to the max-cosine centroid; centroids are the renormalized
    means of their members. Empty clusters are repaired by stealing the point
    farthest (lowest cosine) from its current centroid. Deterministic given
    the seed; the mean within-cluster cosine is non-decreasing over
    iterations.
    """
    if not m.normalized:
        raise DataError("spherical k-means requires unit-normalized embeddings")
    if max_iter < 1:
        raise DataError("max_iter must be >= 1")
    n = m.n
    if t is None:
        t = min(default_cluster_count(n), n)
    if t < 1:
        raise DataError("cluster count must be >= 1")
    if t > n:
        raise DataError(f"cluster count {t} exceeds point count {n}")

    data = m.data.astype(np.float64)
    rng = np.random.default_rng(seed)
    centroids = _plusplus_seed(data, t, rng)
    for k in range(t):
        centroids[k] = _normalize(centroids[k])

    labels = None
    for _ in range(max_iter):
        sims = data @ centroids.T  # n x t
        new_labels = np.argmax(sims, axis=1)

        # repair empty clusters: steal the globally worst-assigned point
        sizes = np.bincount(new_labels, minlength=t)
        for k in np.where(sizes == 0)[0]:
            own = sims[np.arange(n), new_labels]
            donors = np.where(sizes[new_labels] > 1)[0]
            if donors.size == 0:
                raise DataError("cannot repair empty cluster: no donor points")
            worst = donors[np.argmin(own[donors])]
            sizes[new_labels[worst]] -= 1
            new_labels[worst] = k
            sizes[k] = 1

        if labels is not None and np.array_equal(labels, new_labels):
            break
        labels = new_labels
        for k in range(t):
            members = data[labels == k]
            centroids[k] = _normalize(members.sum(axis=0))

    assignments = {doc_id: int(labels[i]) for i, doc_id in enumerate(m.ids)}
    return TopicClustering(
        assignments=assignments, t=t, centroids=centroids.astype(np.float32)
    )


def within_cluster_cosine(m, clustering: TopicClustering) -> float:
    """Mean cosine of each point to its own cluster centroid (the k-means
    objective)."""
    if clustering.centroids is None:
        raise DataError("clustering carries no centroids")
    index = m.row_index()
    data = m.data.astype(np.float64)
    cents = clustering.centroids.astype(np.float64)
    total = 0.0
    for doc_id, k in clustering.assignments.items():
        row = data[index[doc_id]]
        total += float(row @ cents[k]) / (np.linalg.norm(row) * np.linalg.norm(cents[k]))
    return total / len(clustering.assignments)


def export_clustering(clustering: TopicClustering, path) -> None:
    payload = {"t": clustering.t, "assignments": dict(sorted(clustering.assignments.items()))}
    Path(path).write_text(json.dumps(payload, indent=0), encoding="utf-8")


def import_clustering(path, corpus, embeddings=None) -> TopicClustering:
    """Load a `{"t": int, "assignments": {id: idx}}` file for a corpus.

    Every corpus id must be assigned exactly once; importances are recomputed
    from cluster sizes. Centroids are filled in when an embedding matrix is
    supplied.
    """
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: invalid clustering JSON: {exc}") from None
    if "t" not in payload or "assignments" not in payload:
        raise DataError(f"{path}: clustering JSON needs 't' and 'assignments'")
    t = int(payload["t"])
    assignments = {str(k): int(v) for k, v in payload["assignments"].items()}

    corpus_ids = set(corpus.ids())
    missing = sorted(corpus_ids - assignments.keys())
    if missing:
        raise DataError(f"clustering misses corpus ids: {missing[:5]}")
    unknown = sorted(assignments.keys() - corpus_ids)
    if unknown:
        raise DataError(f"clustering has unknown ids: {unknown[:5]}")

    centroids = None
    if embeddings is not None:
        index = embeddings.row_index()
        data = embeddings.data.astype(np.float64)
        centroids = np.zeros((t, embeddings.dims), dtype=np.float64)
        for doc_id, k in assignments.items():
            centroids[k] += data[index[doc_id]]
        centroids = np.stack([_normalize(c) for c in centroids]).astype(np.float32)
    return TopicClustering(assignments=assignments, t=t, centroids=centroids)


# ---------------------------------------------------------------------------
# document/word co-occurrence and its mutual information
# ---------------------------------------------------------------------------


@dataclass
class CooccurrenceTable:
    """Sparse document x word count table with cached marginals."""

    row_ids: list
    col_ids: list
    rows: np.ndarray  # parallel COO triplets
    cols: np.ndarray
    counts: np.ndarray
    row_marginals: np.ndarray = field(init=False)
    col_marginals: np.ndarray = field(init=False)
    total: float = field(init=False)

    def __post_init__(self):
        self.rows = np.asarray(self.rows, dtype=np.int64)
        self.cols = np.asarray(self.cols, dtype=np.int64)
        self.counts = np.asarray(self.counts, dtype=np.float64)
        if np.any(self.counts < 0):
            raise DataError("co-occurrence counts must be non-negative")
        self.row_marginals = np.bincount(
            self.rows, weights=self.counts, minlength=len(self.row_ids)
        )
        self.col_marginals = np.bincount(
            self.cols, weights=self.counts, minlength=len(self.col_ids)
        )
        self.total = float(self.counts.sum())

    @classmethod
    def from_dense(cls, table, row_ids=None, col_ids=None) -> "CooccurrenceTable":
        table = np.asarray(table, dtype=np.float64)
        rows, cols = np.nonzero(table)
        return cls(
            row_ids=row_ids or list(range(table.shape[0])),
            col_ids=col_ids or list(range(table.shape[1])),
            rows=rows,
            cols=cols,
            counts=table[rows, cols],
        )

    @classmethod
    def from_documents(cls, corpus) -> "CooccurrenceTable":
        """Token-count table over a corpus (lowercased alphanumeric tokens)."""
        vocab = {}
        rows, cols, counts = [], [], []
        row_ids = []
        for i, doc in enumerate(corpus.documents):
            row_ids.append(doc.id)
            for token, cnt in Counter(_TOKEN_RE.findall(doc.text.lower())).items():
                col = vocab.setdefault(token, len(vocab))
                rows.append(i)
                cols.append(col)
                counts.append(cnt)
        col_ids = [None] * len(vocab)
        for token, col in vocab.items():
            col_ids[col] = token
        return cls(row_ids=row_ids, col_ids=col_ids, rows=rows, cols=cols, counts=counts)


def compute_mi(tbl: CooccurrenceTable) -> float:
    """Mutual information (nats) between rows and columns of a count table.

    Cells with zero joint mass contribute zero; an all-zero table is an error.
    """
    if tbl.total <= 0.0:
        raise DataError("co-occurrence table has zero total mass")
    mask = tbl.counts > 0
    p_joint = tbl.counts[mask] / tbl.total
    p_row = tbl.row_marginals[tbl.rows[mask]] / tbl.total
    p_col = tbl.col_marginals[tbl.cols[mask]] / tbl.total
    return float(np.sum(p_joint * np.log(p_joint / (p_row * p_col))))
