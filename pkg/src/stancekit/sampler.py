"""Topic-guided diversity sampling plus random and stratified baselines.

The diversity sampler walks each topic cluster independently: starting from
the renormalized mean of the cluster's embeddings, it repeatedly takes the
candidate with the *lowest* cosine to the current centroid (most diverse),
removes it from the pool, and folds it into the centroid, either as an
exponential average or as a running mean that counts the initial centroid as
one element. Per-cluster budgets are importance-weighted with a floor of one
sample per cluster. With label balancing on, each pick is restricted to one
stance label's pool, cycling labels round-robin and skipping exhausted ones.

Selection is without replacement and fully deterministic: candidates tie on
cosine to the lexicographically smallest document id, and clusters are merged
in index order.
"""

import hashlib
import json
import math
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .corpus import LABEL_ORDER
from .errors import DataError

MOVING = "moving"
EXP = "exp"


@dataclass
class SamplerConfig:
    """Knobs for the diversity sampler.

    threshold is the total sampling budget S; per-cluster quotas are
    max(1, floor(S * importance)). moving_literal switches the running mean
    to the degenerate variant that drops the initial centroid (the first
    selection then fully replaces it).
    """

    threshold: int
    avg_mode: str = EXP
    alpha: float = 0.9
    label_balance: bool = True
    seed: int = 0
    moving_literal: bool = False

    def __post_init__(self):
        if self.threshold < 1:
            raise DataError("sampling threshold must be >= 1")
        if self.avg_mode not in (MOVING, EXP):
            raise DataError(f"avg_mode must be '{MOVING}' or '{EXP}'")
        if not 0.0 < self.alpha < 1.0:
            raise DataError("alpha must lie in (0, 1)")

    def to_dict(self) -> dict:
        return {
            "threshold": self.threshold,
            "avg_mode": self.avg_mode,
            "alpha": self.alpha,
            "label_balance": self.label_balance,
            "seed": self.seed,
            "moving_literal": self.moving_literal,
        }


@dataclass
class SampledSubset:
    """Ordered selection with per-cluster/per-label ledgers and provenance."""

    selected: list
    per_cluster_counts: dict
    per_label_counts: dict
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(set(self.selected)) != len(self.selected):
            raise DataError("subset contains duplicate ids")

    def __len__(self):
        return len(self.selected)

    def to_dict(self) -> dict:
        return {
            "selected": list(self.selected),
            "per_cluster_counts": {str(k): v for k, v in self.per_cluster_counts.items()},
            "per_label_counts": {str(k): v for k, v in self.per_label_counts.items()},
            "provenance": self.provenance,
        }

    def write_json(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2), encoding="utf-8")

    def write_id_list(self, path) -> None:
        Path(path).write_text("\n".join(self.selected) + "\n", encoding="utf-8")


def read_subset(path) -> SampledSubset:
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    return SampledSubset(
        selected=payload["selected"],
        per_cluster_counts={int(k): v for k, v in payload["per_cluster_counts"].items()},
        per_label_counts=payload["per_label_counts"],
        provenance=payload.get("provenance", {}),
    )


def clustering_fingerprint(clustering) -> str:
    digest = hashlib.sha256()
    digest.update(str(clustering.t).encode())
    for doc_id, idx in sorted(clustering.assignments.items()):
        digest.update(f"{doc_id}:{idx};".encode())
    return digest.hexdigest()[:16]


def per_cluster_quota(threshold: int, importances) -> np.ndarray:
    """Importance-weighted per-cluster budgets: max(1, floor(S * I_i))."""
    importances = np.asarray(importances, dtype=np.float64)
    if importances.size == 0:
        raise DataError("importances vector is empty")
    if not math.isclose(float(importances.sum()), 1.0, abs_tol=1e-6):
        raise DataError("importances must sum to 1")
    quotas = np.maximum(1, np.floor(threshold * importances).astype(np.int64))
    return quotas


def _label_counts(ids, labels_by_id) -> dict:
    counts = Counter(str(labels_by_id[i]) for i in ids)
    return dict(counts)


def _update_centroid(cent, acc, chosen, j, cfg):
    """One centroid update; returns the new (unit centroid, raw accumulator).

    For the running mean the raw accumulator keeps the exact mean of
    {initial centroid, selections so far}, so the unit centroid is only ever
    a renormalized view of it. The exponential update chains on the unit
    centroid directly.
    """
    if cfg.avg_mode == EXP:
        raw = cfg.alpha * chosen + (1.0 - cfg.alpha) * cent
    elif cfg.moving_literal:
        # degenerate reading: mean of selections only, prior discarded
        raw = acc + (chosen - acc) / j
    else:
        # mean of {cent_0, e_1, ..., e_j}: j selections plus the prior
        raw = (j * acc + chosen) / (j + 1)
    norm = np.linalg.norm(raw)
    if norm == 0.0:
        # antipodal degenerate update; keep the previous direction
        return cent, raw
    return raw / norm, raw


def _sample_cluster(member_ids, data, labels, cfg, quota):
    """Run the diversity selection loop inside one cluster.

    member_ids are lexicographically sorted; `data` holds their unit
    embeddings row-aligned; `labels` maps position -> label string (only
    consulted when label balancing is on). Returns (picked positions, whether
    the pool ran out before the quota).
    """
    n = len(member_ids)
    cent = data.sum(axis=0)
    norm = np.linalg.norm(cent)
    if norm == 0.0:
        raise DataError("cluster mean embedding is zero; cannot seed centroid")
    cent = cent / norm
    acc = cent.copy()  # moving-mode accumulator, counts cent_0 as one element

    remaining = list(range(n))
    pools = None
    label_cycle = None
    if cfg.label_balance:
        pools = {}
        for pos in range(n):
            pools.setdefault(labels[pos], []).append(pos)
        order = [str(lbl) for lbl in LABEL_ORDER]
        present = sorted(pools.keys(), key=lambda s: order.index(s) if s in order else len(order))
        label_cycle = present

    picked = []
    cursor = 0
    for j in range(1, quota + 1):
        if not remaining:
            return picked, True
        if cfg.label_balance:
            # advance to the next label that still has candidates
            for _ in range(len(label_cycle)):
                lbl = label_cycle[cursor % len(label_cycle)]
                cursor += 1
                if pools[lbl]:
                    pool = pools[lbl]
                    break
            else:
                return picked, True
        else:
            pool = remaining

        sims = data[pool] @ cent
        best = np.lexsort((np.array(pool), sims))[0]
        pos = pool[best]
        picked.append(pos)
        pool.remove(pos)
        if cfg.label_balance:
            remaining.remove(pos)
        cent, acc = _update_centroid(cent, acc, data[pos], j, cfg)
    return picked, False


def sample_topic_efficient(m, clustering, corpus, cfg: SamplerConfig) -> SampledSubset:
    """Importance-weighted diversity sampling over topic clusters.

    Requires unit-normalized embeddings covering every clustered id. Clusters
    are processed in index order; a cluster that runs out of candidates before
    its quota is recorded in provenance rather than raising.
    """
    if not m.normalized:
        raise DataError("diversity sampling requires unit-normalized embeddings")
    index = m.row_index()
    missing = [i for i in clustering.assignments if i not in index]
    if missing:
        raise DataError(f"clustered ids missing from embeddings: {sorted(missing)[:5]}")
    labels_by_id = corpus.labels_by_id()
    missing = [i for i in clustering.assignments if i not in labels_by_id]
    if missing:
        raise DataError(f"clustered ids missing from corpus: {sorted(missing)[:5]}")

    quotas = per_cluster_quota(cfg.threshold, clustering.importances)
    members = clustering.members()
    data = m.data.astype(np.float64)

    selected = []
    per_cluster = {}
    exhausted = []
    for k in range(clustering.t):
        ids = members[k]
        rows = data[[index[i] for i in ids]]
        labels = {pos: str(labels_by_id[i]) for pos, i in enumerate(ids)}
        picked, ran_out = _sample_cluster(ids, rows, labels, cfg, int(quotas[k]))
        if ran_out:
            exhausted.append(k)
        per_cluster[k] = len(picked)
        selected.extend(ids[pos] for pos in picked)

    return SampledSubset(
        selected=selected,
        per_cluster_counts=per_cluster,
        per_label_counts=_label_counts(selected, labels_by_id),
        provenance={
            "method": "topic",
            "config": cfg.to_dict(),
            "clustering_fingerprint": clustering_fingerprint(clustering),
            "quotas": quotas.tolist(),
            "exhausted_clusters": exhausted,
        },
    )


def sample_random(corpus, k: int, seed: int = 0) -> SampledSubset:
    """Uniform sampling without replacement."""
    ids = corpus.ids()
    if not 1 <= k <= len(ids):
        raise DataError(f"sample size {k} out of range [1, {len(ids)}]")
    rng = np.random.default_rng(seed)
    selected = [ids[i] for i in rng.permutation(len(ids))[:k]]
    labels_by_id = corpus.labels_by_id()
    return SampledSubset(
        selected=selected,
        per_cluster_counts={},
        per_label_counts=_label_counts(selected, labels_by_id),
        provenance={"method": "random", "k": k, "seed": seed},
    )


def _largest_remainder(targets: dict, k: int) -> dict:
    """Integer allocation proportional to `targets` summing exactly to k."""
    total = sum(targets.values())
    exact = {key: k * cnt / total for key, cnt in targets.items()}
    alloc = {key: int(math.floor(v)) for key, v in exact.items()}
    shortfall = k - sum(alloc.values())
    remainders = sorted(
        targets, key=lambda key: (-(exact[key] - alloc[key]), -targets[key], key)
    )
    for key in remainders[:shortfall]:
        alloc[key] += 1
    return alloc


def sample_stratified(corpus, k: int, seed: int = 0) -> SampledSubset:
    """Proportional allocation over standardized labels, uniform per stratum."""
    ids = corpus.ids()
    if not 1 <= k <= len(ids):
        raise DataError(f"sample size {k} out of range [1, {len(ids)}]")
    labels_by_id = corpus.labels_by_id()
    strata = {}
    for doc_id in ids:
        strata.setdefault(str(labels_by_id[doc_id]), []).append(doc_id)
    alloc = _largest_remainder({lbl: len(v) for lbl, v in strata.items()}, k)
    rng = np.random.default_rng(seed)
    selected = []
    for lbl in sorted(strata):
        pool = strata[lbl]
        take = alloc[lbl]
        chosen = rng.permutation(len(pool))[:take]
        selected.extend(pool[i] for i in chosen)
    return SampledSubset(
        selected=selected,
        per_cluster_counts={},
        per_label_counts=_label_counts(selected, labels_by_id),
        provenance={"method": "stratified", "k": k, "seed": seed},
    )
