"""Seeded synthetic stance benchmark with controlled imbalance.

Documents are drawn from a small number of topics with heavily skewed sizes
(default 1000/100/10) and per-topic skewed label distributions. Embeddings
are unit vectors of the form

    normalize(topic_mean + label_scale * label_dir + noise)

with noise large enough that topic clouds overlap: cosine k-means cells then
mix a dominant topic with rare-topic outliers, which is the regime the
diversity sampler is designed for. Texts carry topic-specific tokens so
token co-occurrence statistics are informative.
"""

from dataclasses import dataclass, field

import numpy as np

from .corpus import LABEL_ORDER, Corpus, Document
from .embeddings import EmbeddingMatrix, normalize_rows
from .errors import DataError

# raw strings the generator emits, exercising the label-mapping table
_RAW_BY_LABEL = {
    "Positive": ("favor", "support", "agree"),
    "Negative": ("against", "deny", "disagree"),
    "Discuss": ("discuss", "comment"),
    "Other": ("unrelated", "none"),
    "Neutral": ("neutral",),
}

_FILLER = (
    "report", "claim", "says", "that", "the", "a", "really", "today", "people",
    "think", "should", "must", "never", "always", "because", "but",
)


@dataclass(frozen=True)
class SyntheticConfig:
    """Knobs for the generator; defaults match the bundled benchmark."""

    seed: int = 0
    dims: int = 16
    topic_sizes: tuple = (1000, 100, 10)
    datasets: tuple = ("synth_a", "synth_b")
    label_concentration: float = 0.4  # Dirichlet alpha per label; lower = more skew
    label_scale: float = 0.35  # weight of the label direction in embeddings
    noise_scale: float = 1.0  # weight of isotropic noise (unit expected norm)
    rare_spread: float = 0.55  # rare-topic noise grows as (n_max/n_t)^rare_spread
    eval_fraction: float = 0.25  # eval-set size relative to the corpus

    def __post_init__(self):
        if self.dims < 2:
            raise DataError("dims must be >= 2")
        if not self.topic_sizes or any(s < 1 for s in self.topic_sizes):
            raise DataError("topic_sizes must be positive")
        if not 0.0 <= self.eval_fraction <= 1.0:
            raise DataError("eval_fraction must lie in [0, 1]")


@dataclass
class SyntheticBundle:
    corpus: Corpus
    matrix: EmbeddingMatrix
    eval_corpus: Corpus
    eval_matrix: EmbeddingMatrix
    config: SyntheticConfig
    topic_label_probs: dict = field(default_factory=dict)


def _unit(v: np.ndarray) -> np.ndarray:
    return v / np.linalg.norm(v)


def _draw_docs(rng, cfg, structure, counts, id_prefix):
    """Sample documents plus their raw embedding rows from a fixed structure."""
    topic_means, label_dirs, label_probs, dataset_probs, vocab, noise_by_topic = structure
    docs = []
    raw_rows = []
    counter = 0
    for ti, size in enumerate(counts):
        topic = f"topic_{ti:02d}"
        labels = rng.choice(len(LABEL_ORDER), size=size, p=label_probs[ti])
        datasets = rng.random(size) < dataset_probs[ti]
        for k in range(size):
            label = LABEL_ORDER[labels[k]]
            raw = _RAW_BY_LABEL[label.value][rng.integers(len(_RAW_BY_LABEL[label.value]))]
            words = [str(rng.choice(vocab[ti])) for _ in range(3)]
            words += [str(rng.choice(_FILLER)) for _ in range(4)]
            rng.shuffle(words)
            docs.append(
                Document(
                    id=f"{id_prefix}{counter:05d}",
                    dataset=cfg.datasets[int(datasets[k]) % len(cfg.datasets)],
                    topic=topic,
                    text=" ".join(words),
                    raw_label=raw,
                    label=label,
                )
            )
            noise = rng.standard_normal(cfg.dims) / np.sqrt(cfg.dims)
            raw_rows.append(
                topic_means[ti]
                + cfg.label_scale * label_dirs[labels[k]]
                + noise_by_topic[ti] * noise
            )
            counter += 1
    return docs, np.asarray(raw_rows, dtype=np.float32)


def generate(cfg: SyntheticConfig) -> SyntheticBundle:
    """Build the benchmark: corpus + unit embeddings, plus a held-out eval set.

    The eval set is drawn from the same topic/label structure (same means and
    mixing weights) so train/eval distributions match.
    """
    rng = np.random.default_rng(cfg.seed)
    n_topics = len(cfg.topic_sizes)

    topic_means = np.stack([_unit(rng.standard_normal(cfg.dims)) for _ in range(n_topics)])
    label_dirs = np.stack([_unit(rng.standard_normal(cfg.dims)) for _ in range(len(LABEL_ORDER))])
    label_probs = [
        rng.dirichlet(np.full(len(LABEL_ORDER), cfg.label_concentration))
        for _ in range(n_topics)
    ]
    dataset_probs = rng.uniform(0.15, 0.85, size=n_topics)
    vocab = [[f"term{ti:02d}_{w}" for w in range(6)] for ti in range(n_topics)]
    # Rare topics get proportionally wider clouds, so their points land inside
    # frequent-topic k-means cells as outliers instead of forming pure cells.
    sizes = np.asarray(cfg.topic_sizes, dtype=np.float64)
    noise_by_topic = cfg.noise_scale * (sizes.max() / sizes) ** cfg.rare_spread
    structure = (topic_means, label_dirs, label_probs, dataset_probs, vocab, noise_by_topic)

    docs, raw = _draw_docs(rng, cfg, structure, cfg.topic_sizes, id_prefix="synth:")
    matrix = normalize_rows(EmbeddingMatrix(ids=[d.id for d in docs], data=raw))

    total = sum(cfg.topic_sizes)
    n_eval = int(np.floor(cfg.eval_fraction * total))
    share = np.asarray(cfg.topic_sizes, dtype=np.float64) / total
    eval_counts = np.maximum(1, np.floor(share * n_eval).astype(int)) if n_eval else []
    eval_docs, eval_raw = _draw_docs(rng, cfg, structure, list(eval_counts), id_prefix="eval:")
    if eval_docs:
        eval_matrix = normalize_rows(
            EmbeddingMatrix(ids=[d.id for d in eval_docs], data=eval_raw)
        )
    else:
        eval_matrix = EmbeddingMatrix(ids=[], data=np.zeros((0, cfg.dims), dtype=np.float32))

    return SyntheticBundle(
        corpus=Corpus(documents=tuple(docs)),
        matrix=matrix,
        eval_corpus=Corpus(documents=tuple(eval_docs)),
        eval_matrix=eval_matrix,
        config=cfg,
        topic_label_probs={f"topic_{t:02d}": label_probs[t].tolist() for t in range(n_topics)},
    )
