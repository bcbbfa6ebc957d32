"""Imbalance and representation-quality diagnostics.

The two-sample KS test here is exact for small samples: the p-value is the
fraction of all C(n+m, n) interleavings of the pooled sample whose KS
statistic reaches the observed one (computed by lattice-path counting, no
ties assumed). Larger samples fall back to the asymptotic Kolmogorov series.
Distribution reports use population standard deviation over per-key counts.
"""

import json
import math
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .corpus import LABEL_ORDER
from .errors import DataError

# rejection rule used to flag KS results
P_CUTOFF = 0.05
STAT_CUTOFF = 0.4

EXACT_LIMIT = 20  # max n+m for enumeration-exact p-values


def ks_stat(sample1, sample2) -> float:
    """Sup-difference of the two empirical CDFs over the pooled points."""
    x = np.sort(np.asarray(sample1, dtype=np.float64))
    y = np.sort(np.asarray(sample2, dtype=np.float64))
    if x.size == 0 or y.size == 0:
        raise DataError("KS statistic needs two nonempty samples")
    pooled = np.concatenate([x, y])
    cdf_x = np.searchsorted(x, pooled, side="right") / x.size
    cdf_y = np.searchsorted(y, pooled, side="right") / y.size
    return float(np.max(np.abs(cdf_x - cdf_y)))


def _exact_pvalue(stat: float, n: int, m: int) -> float:
    """P(KS >= stat) over all interleavings, by lattice-path counting.

    A path records the order in which the two samples interleave; its KS
    value is max |i/n - j/m| over visited lattice points, i.e. max
    |i*m - j*n| / (n*m). We count paths that stay strictly below the
    threshold and complement.
    """
    if stat <= 0.0:
        return 1.0
    threshold = stat * n * m - 1e-9  # observed stats are integer multiples of 1/(n*m)
    good = np.zeros((n + 1, m + 1), dtype=object)
    good[0, 0] = 1
    for i in range(n + 1):
        for j in range(m + 1):
            if i == 0 and j == 0:
                continue
            if abs(i * m - j * n) >= threshold:
                good[i, j] = 0
                continue
            total = 0
            if i > 0:
                total += good[i - 1, j]
            if j > 0:
                total += good[i, j - 1]
            good[i, j] = total
    return 1.0 - good[n, m] / math.comb(n + m, n)


def _asymptotic_pvalue(stat: float, n: int, m: int) -> float:
    lam = stat * math.sqrt(n * m / (n + m))
    if lam < 0.01:
        return 1.0
    total = 0.0
    for k in range(1, 101):
        term = (-1.0) ** (k - 1) * math.exp(-2.0 * k * k * lam * lam)
        total += term
        if abs(term) < 1e-16:
            break
    return min(1.0, max(0.0, 2.0 * total))


def ks_method(n: int, m: int) -> str:
    return "exact" if n + m <= EXACT_LIMIT else "asymptotic"


def ks_pvalue(stat: float, n: int, m: int) -> float:
    """Two-sided p-value for a two-sample KS statistic."""
    if n < 1 or m < 1:
        raise DataError("sample sizes must be >= 1")
    if ks_method(n, m) == "exact":
        return float(_exact_pvalue(stat, n, m))
    return _asymptotic_pvalue(stat, n, m)


@dataclass
class KsResult:
    stat: float
    p_value: float
    n: int
    m: int
    method: str
    rejected: bool = field(init=False)

    def __post_init__(self):
        self.rejected = self.p_value <= P_CUTOFF or self.stat >= STAT_CUTOFF

    def to_dict(self) -> dict:
        return {
            "stat": self.stat,
            "p_value": self.p_value,
            "n": self.n,
            "m": self.m,
            "method": self.method,
            "rejected": self.rejected,
        }


def ks_test(sample1, sample2) -> KsResult:
    stat = ks_stat(sample1, sample2)
    n, m = len(sample1), len(sample2)
    return KsResult(stat=stat, p_value=ks_pvalue(stat, n, m), n=n, m=m, method=ks_method(n, m))


# ---------------------------------------------------------------------------
# count-distribution statistics
# ---------------------------------------------------------------------------


def _population_std(values) -> float:
    return float(np.std(np.asarray(values, dtype=np.float64)))


@dataclass
class DistributionReport:
    """Per-key counts in the full corpus vs the sampled subset."""

    counts_full: dict
    counts_subset: dict
    std_full: float = field(init=False)
    std_subset: float = field(init=False)
    norm_std_full: float = field(init=False)
    norm_std_subset: float = field(init=False)
    rebalanced: bool = field(init=False)

    def __post_init__(self):
        keys = sorted(set(self.counts_full) | set(self.counts_subset))
        self.counts_full = {k: self.counts_full.get(k, 0) for k in keys}
        self.counts_subset = {k: self.counts_subset.get(k, 0) for k in keys}
        full = list(self.counts_full.values())
        sub = list(self.counts_subset.values())
        if not any(full):
            raise DataError("all-zero full count map")
        self.std_full = _population_std(full)
        self.std_subset = _population_std(sub)
        mean_full = float(np.mean(full))
        mean_sub = float(np.mean(sub))
        self.norm_std_full = self.std_full / mean_full if mean_full else 0.0
        self.norm_std_subset = self.std_subset / mean_sub if mean_sub else 0.0
        self.rebalanced = self.std_subset < self.std_full

    def top(self, k: int) -> list:
        """(key, full count, subset count) rows for the k most frequent keys."""
        keys = sorted(self.counts_full, key=lambda key: (-self.counts_full[key], key))
        return [(key, self.counts_full[key], self.counts_subset[key]) for key in keys[:k]]

    def to_dict(self, top_k: int = 20) -> dict:
        return {
            "std_full": self.std_full,
            "std_subset": self.std_subset,
            "norm_std_full": self.norm_std_full,
            "norm_std_subset": self.norm_std_subset,
            "rebalanced": self.rebalanced,
            "top": [list(row) for row in self.top(top_k)],
        }


def distribution_stats(counts_full: dict, counts_subset: dict) -> DistributionReport:
    """Compare two count maps (keys unioned, zero-filled)."""
    if not counts_subset or not any(counts_subset.values()):
        raise DataError("all-zero subset count map")
    return DistributionReport(counts_full=dict(counts_full), counts_subset=dict(counts_subset))


def cluster_purity(assignments: dict, gold: dict) -> float:
    """Fraction of points whose cluster's majority gold label matches theirs."""
    if set(assignments) != set(gold):
        raise DataError("purity needs identical id sets for clusters and labels")
    if not assignments:
        raise DataError("purity of an empty assignment is undefined")
    per_cluster = {}
    for doc_id, cluster in assignments.items():
        per_cluster.setdefault(cluster, Counter())[str(gold[doc_id])] += 1
    agreeing = sum(max(counts.values()) for counts in per_cluster.values())
    return agreeing / len(assignments)


def classification_metrics(preds, golds) -> dict:
    """Macro P/R/F1 over the gold label set, plus exact-match accuracy.

    Empty precision/recall denominators contribute 0; classes absent from the
    gold set are excluded from the macro average.
    """
    if len(preds) != len(golds):
        raise DataError(f"length mismatch: {len(preds)} preds vs {len(golds)} golds")
    if not golds:
        raise DataError("empty evaluation set")
    preds = [str(p) for p in preds]
    golds = [str(g) for g in golds]
    classes = [str(lbl) for lbl in LABEL_ORDER if str(lbl) in set(golds)]
    per_class = {}
    for cls in classes:
        tp = sum(1 for p, g in zip(preds, golds) if p == cls and g == cls)
        fp = sum(1 for p, g in zip(preds, golds) if p == cls and g != cls)
        fn = sum(1 for p, g in zip(preds, golds) if p != cls and g == cls)
        prec = tp / (tp + fp) if tp + fp else 0.0
        rec = tp / (tp + fn) if tp + fn else 0.0
        f1 = 2 * prec * rec / (prec + rec) if prec + rec else 0.0
        per_class[cls] = {"precision": prec, "recall": rec, "f1": f1}
    macro = lambda key: sum(per_class[c][key] for c in classes) / len(classes)
    return {
        "macro_f1": macro("f1"),
        "macro_precision": macro("precision"),
        "macro_recall": macro("recall"),
        "accuracy": sum(1 for p, g in zip(preds, golds) if p == g) / len(golds),
        "per_class": per_class,
    }


# ---------------------------------------------------------------------------
# full imbalance report
# ---------------------------------------------------------------------------


def _topic_counts(docs) -> Counter:
    return Counter(d.topic for d in docs)


def _label_counts(docs) -> Counter:
    return Counter(str(d.label) for d in docs)


@dataclass
class ImbalanceReport:
    inter_topic: DistributionReport
    per_topic: dict  # topic -> DistributionReport over labels
    ks_per_dataset: dict  # dataset -> KsResult over top topic counts
    ks_per_topic: dict  # topic -> KsResult over label counts
    top_k: int

    def to_dict(self) -> dict:
        return {
            "inter_topic": self.inter_topic.to_dict(self.top_k),
            "per_topic": {t: r.to_dict(len(LABEL_ORDER)) for t, r in self.per_topic.items()},
            "ks_per_dataset": {d: r.to_dict() for d, r in self.ks_per_dataset.items()},
            "ks_per_topic": {t: r.to_dict() for t, r in self.ks_per_topic.items()},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def to_text(self) -> str:
        lines = []
        it = self.inter_topic
        lines.append("inter-topic counts (full vs subset)")
        lines.append(
            f"  std {it.std_full:.2f} -> {it.std_subset:.2f}"
            f"  normalized {it.norm_std_full:.3f} -> {it.norm_std_subset:.3f}"
            f"  {'rebalanced' if it.rebalanced else 'not rebalanced'}"
        )
        width = max((len(t) for t, _, _ in it.top(self.top_k)), default=5)
        for topic, full, sub in it.top(self.top_k):
            lines.append(f"  {topic:<{width}}  {full:>8}  {sub:>8}")
        lines.append("")
        lines.append("KS per dataset (topic-count samples)")
        for name, res in sorted(self.ks_per_dataset.items()):
            flag = " [rejected]" if res.rejected else ""
            lines.append(
                f"  {name}: stat={res.stat:.2f} p={res.p_value:.6f} ({res.method}){flag}"
            )
        lines.append("")
        lines.append("KS per topic (label-count samples)")
        for topic, res in self.ks_per_topic.items():
            flag = " [rejected]" if res.rejected else ""
            lines.append(
                f"  {topic}: stat={res.stat:.2f} p={res.p_value:.6f} ({res.method}){flag}"
            )
        return "\n".join(lines) + "\n"


def imbalance_report(corpus, subset_ids, top_k: int = 20, ks_top_k: int = 5) -> ImbalanceReport:
    """Inter-topic and per-topic imbalance comparison of a subset vs its corpus.

    subset_ids may be a SampledSubset or any iterable of document ids; every
    id must exist in the corpus.
    """
    ids = list(subset_ids.selected) if hasattr(subset_ids, "selected") else list(subset_ids)
    by_id = corpus.by_id()
    unknown = [i for i in ids if i not in by_id]
    if unknown:
        raise DataError(f"subset ids not in corpus: {unknown[:5]}")
    subset_docs = [by_id[i] for i in ids]

    inter = distribution_stats(_topic_counts(corpus.documents), _topic_counts(subset_docs))

    top_topics = [t for t, _, _ in inter.top(top_k)]
    per_topic = {}
    ks_per_topic = {}
    for topic in top_topics:
        full_labels = _label_counts([d for d in corpus.documents if d.topic == topic])
        sub_labels = _label_counts([d for d in subset_docs if d.topic == topic])
        if sub_labels:
            per_topic[topic] = distribution_stats(full_labels, sub_labels)
        keys = sorted(set(full_labels) | set(sub_labels))
        sample_full = [full_labels.get(k, 0) for k in keys]
        sample_sub = [sub_labels.get(k, 0) for k in keys]
        ks_per_topic[topic] = ks_test(sample_full, sample_sub)

    ks_per_dataset = {}
    for dataset in sorted(corpus.datasets):
        full_topics = _topic_counts([d for d in corpus.documents if d.dataset == dataset])
        sub_topics = _topic_counts([d for d in subset_docs if d.dataset == dataset])
        keys = sorted(full_topics, key=lambda t: (-full_topics[t], t))[:ks_top_k]
        sample_full = [full_topics[k] for k in keys]
        sample_sub = [sub_topics.get(k, 0) for k in keys]
        ks_per_dataset[dataset] = ks_test(sample_full, sample_sub)

    return ImbalanceReport(
        inter_topic=inter,
        per_topic=per_topic,
        ks_per_dataset=ks_per_dataset,
        ks_per_topic=ks_per_topic,
        top_k=top_k,
    )


def write_report_csvs(report: ImbalanceReport, directory) -> None:
    """Raw count matrices for external plotting."""
    from pathlib import Path

    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    with open(directory / "inter_topic.csv", "w", encoding="utf-8") as fh:
        fh.write("topic,count_full,count_subset\n")
        for topic in report.inter_topic.counts_full:
            fh.write(
                f"{topic},{report.inter_topic.counts_full[topic]},"
                f"{report.inter_topic.counts_subset[topic]}\n"
            )
    with open(directory / "per_topic_labels.csv", "w", encoding="utf-8") as fh:
        fh.write("topic,label,count_full,count_subset\n")
        for topic, rep in report.per_topic.items():
            for label in rep.counts_full:
                fh.write(
                    f"{topic},{label},{rep.counts_full[label]},{rep.counts_subset[label]}\n"
                )
    with open(directory / "per_topic_norm_std.csv", "w", encoding="utf-8") as fh:
        fh.write("topic,norm_std_full,norm_std_subset\n")
        for topic, rep in report.per_topic.items():
            fh.write(f"{topic},{rep.norm_std_full:.6f},{rep.norm_std_subset:.6f}\n")


def pca_2d(points) -> np.ndarray:
    """Two-dimensional PCA projection (raw data export for plotting)."""
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[0] < 2:
        raise DataError("PCA projection needs at least two points")
    centered = pts - pts.mean(axis=0)
    _, _, vt = np.linalg.svd(centered, full_matrices=False)
    comps = vt[:2] if vt.shape[0] >= 2 else np.vstack([vt, np.zeros_like(vt[:1])])
    return centered @ comps.T
