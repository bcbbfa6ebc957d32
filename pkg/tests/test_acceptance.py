"""Acceptance gate: end-to-end guarantees of the toolkit, one test apiece.

Each test states its claim, tolerance, and (where capped) runtime budget in
its own assertion. Everything runs on the bundled synthetic benchmark or on
randomized fixtures with independent oracles; nothing requires external data
or a second package.
"""

import itertools
import json
import math
import os
import subprocess
import sys
import time
from collections import Counter

import numpy as np

from stancekit import cli
from stancekit.corpus import LABEL_ORDER, Corpus, Document, StanceLabel
from stancekit.diagnostics import classification_metrics, cluster_purity, ks_pvalue
from stancekit.embeddings import EmbeddingMatrix, normalize_rows
from stancekit.sampler import (
    SamplerConfig,
    per_cluster_quota,
    sample_random,
    sample_topic_efficient,
)
from stancekit.synthetic import SyntheticConfig, generate
from stancekit.topics import TopicClustering, default_cluster_count, fit_spherical_kmeans
from stancekit.trainer import (
    EncoderHead,
    TrainConfig,
    grad_check,
    loss_cl_pair,
    pair_losses,
    train,
)

POS_BOUND = math.e - 1.0 / math.e


def make_corpus(ids, labels):
    return Corpus(documents=tuple(
        Document(id=i, dataset="d", topic="t", text="x", raw_label=str(lb), label=lb)
        for i, lb in zip(ids, labels)
    ))


# ---------------------------------------------------------------------------
# closed-form and oracle-backed properties
# ---------------------------------------------------------------------------


def test_positive_pair_loss_bounded_on_million_pairs():
    """Positive-branch loss stays in [0, e - 1/e] over 10^6 random pairs and
    attains both endpoints (at cos 1 and cos -1) within 1e-6. Under 10 s."""
    t0 = time.monotonic()
    rng = np.random.default_rng(0)
    lo, hi = np.inf, -np.inf
    for _ in range(4):
        a = rng.standard_normal((250_000, 8))
        b = rng.standard_normal((250_000, 8))
        vals = pair_losses(a, b, 1, 0.5)
        lo = min(lo, float(vals.min()))
        hi = max(hi, float(vals.max()))
    assert lo >= -1e-9
    assert hi <= POS_BOUND + 1e-9

    x = np.array([0.3, -1.2, 0.7])
    assert abs(loss_cl_pair(x, x, 1, 0.5) - 0.0) < 1e-6
    assert abs(loss_cl_pair(x, -x, 1, 0.5) - POS_BOUND) < 1e-6
    xs = x[None, :]
    assert abs(pair_losses(xs, xs, 1, 0.5)[0] - 0.0) < 1e-6
    assert abs(pair_losses(xs, -xs, 1, 0.5)[0] - POS_BOUND) < 1e-6

    assert time.monotonic() - t0 < 10.0


def test_gradients_match_finite_differences_50_batches():
    """Analytic gradients of the combined objective match central finite
    differences: max relative error < 1e-3 (f32) and < 1e-6 (f64) over 50
    random small batches. Under 30 s."""
    t0 = time.monotonic()

    def batch(rng, b=4, dims=6):
        emb = rng.standard_normal((b, dims))
        labels = [LABEL_ORDER[i] for i in rng.integers(0, 5, size=b)]
        return emb, labels

    for dtype, tol in (("float64", 1e-6), ("float32", 1e-3)):
        worst = 0.0
        for k in range(50):
            rng = np.random.default_rng(1000 + k)
            head = EncoderHead.init(6, 5, seed=k, dtype=np.dtype(dtype).type)
            err = grad_check(head, batch(rng), TrainConfig(dtype=dtype))
            worst = max(worst, err)
        assert worst < tol, f"{dtype}: worst relative error {worst:.3e}"

    assert time.monotonic() - t0 < 30.0


def test_ks_exact_pvalue_matches_enumeration():
    """Exact KS p-value: full separation at n = m = 5 gives 0.007937 within
    1e-6, and the implementation equals brute-force enumeration of every
    interleaving for all shapes with n + m <= 12. Under 60 s."""
    t0 = time.monotonic()
    assert abs(ks_pvalue(1.0, 5, 5) - 0.007937) < 1e-6

    def brute(stat, n, m):
        hits = total = 0
        for ones in itertools.combinations(range(n + m), n):
            ones = set(ones)
            i = j = worst = 0
            for pos in range(n + m):
                if pos in ones:
                    i += 1
                else:
                    j += 1
                worst = max(worst, abs(i * m - j * n))
            total += 1
            if worst >= stat * n * m - 1e-9:
                hits += 1
        return hits / total

    for n in range(1, 12):
        for m in range(1, 13 - n):
            for d in range(1, n * m + 1):
                stat = d / (n * m)
                assert abs(ks_pvalue(stat, n, m) - brute(stat, n, m)) < 1e-12, (n, m, d)

    assert time.monotonic() - t0 < 60.0


def test_quota_law_1000_random_instances():
    """Per-cluster selections equal max(1, floor(S * I_i)) whenever the
    cluster holds enough candidates, across 1000 random (S, importance)
    instances. Under 10 s."""
    t0 = time.monotonic()
    rng = np.random.default_rng(7)
    for _ in range(1000):
        k = int(rng.integers(1, 6))
        sizes = rng.integers(1, 13, size=k)
        n = int(sizes.sum())
        S = int(rng.integers(1, n + 1))
        importances = sizes / n
        quotas = per_cluster_quota(S, importances)
        expect = np.maximum(1, np.floor(S * importances).astype(int))
        np.testing.assert_array_equal(quotas, expect)

        ids = [f"p{i:04d}" for i in range(n)]
        data = rng.standard_normal((n, 4))
        m = normalize_rows(EmbeddingMatrix(ids=ids, data=data))
        assignments = {}
        pos = 0
        for c, size in enumerate(sizes):
            for _ in range(size):
                assignments[ids[pos]] = c
                pos += 1
        clustering = TopicClustering(assignments=assignments, t=k)
        labels = [LABEL_ORDER[i] for i in rng.integers(0, 5, size=n)]
        sub = sample_topic_efficient(
            m, clustering, make_corpus(ids, labels),
            SamplerConfig(threshold=S, label_balance=False),
        )
        for c in range(k):
            took = sub.per_cluster_counts[c]
            if sizes[c] >= quotas[c]:
                assert took == quotas[c], (c, took, quotas[c])
            else:
                assert took == sizes[c]

    assert time.monotonic() - t0 < 10.0


def test_diversity_selection_matches_bruteforce_500_clusters():
    """On 500 random clusters of at most 8 points, the first pick is the
    brute-force argmin of cosine to the mean centroid, and with exponential
    centroid updates the whole selection order equals a step-by-step replay.
    Under 30 s."""
    t0 = time.monotonic()
    rng = np.random.default_rng(999)
    alpha = 0.9
    for _ in range(500):
        n = int(rng.integers(1, 9))
        dims = int(rng.integers(3, 7))
        ids = [f"p{i}" for i in range(n)]
        m = normalize_rows(EmbeddingMatrix(ids=ids, data=rng.standard_normal((n, dims))))
        rows = m.data.astype(np.float64)
        labels = [LABEL_ORDER[i] for i in rng.integers(0, 5, size=n)]
        sub = sample_topic_efficient(
            m, TopicClustering(assignments={i: 0 for i in ids}, t=1),
            make_corpus(ids, labels),
            SamplerConfig(threshold=n, label_balance=False, avg_mode="exp", alpha=alpha),
        )

        mean = rows.mean(axis=0)
        first = int(np.argmin(rows @ (mean / np.linalg.norm(mean))))
        assert sub.selected[0] == ids[first]

        cent = rows.sum(axis=0)
        cent = cent / np.linalg.norm(cent)
        pool = list(range(n))
        replay = []
        for _ in range(n):
            sims = rows[pool] @ cent
            best_val = sims.min()
            pos = min(pool[i] for i in range(len(pool)) if sims[i] == best_val)
            replay.append(ids[pos])
            pool.remove(pos)
            raw = alpha * rows[pos] + (1.0 - alpha) * cent
            norm = np.linalg.norm(raw)
            if norm > 0.0:
                cent = raw / norm
        assert sub.selected == replay

    assert time.monotonic() - t0 < 30.0


# ---------------------------------------------------------------------------
# behavioral guarantees on the synthetic benchmark
# ---------------------------------------------------------------------------


def _topic_sigma(corpus, ids):
    by_id = corpus.by_id()
    topics = sorted({d.topic for d in corpus.documents})
    counts = Counter(by_id[i].topic for i in ids)
    return float(np.std([counts.get(t, 0) for t in topics]))


def _label_sigma(corpus, ids):
    """Mean over subset topics of the per-topic label-count spread."""
    by_id = corpus.by_id()
    by_topic = {}
    for i in ids:
        d = by_id[i]
        by_topic.setdefault(d.topic, []).append(str(d.label))
    sigmas = []
    for labels in by_topic.values():
        counts = Counter(labels)
        sigmas.append(np.std([counts.get(str(l), 0) for l in LABEL_ORDER]))
    return float(np.mean(sigmas))


def test_topic_sampling_flattens_imbalance_100_seeds():
    """On the skewed synthetic corpus (topic sizes 1000/100/10), the
    topic-efficient subset has lower topic-count sigma than equal-size random
    sampling in >= 95/100 seeds, and lower mean per-topic label sigma in
    >= 90/100 seeds."""
    topic_wins = 0
    label_wins = 0
    for seed in range(100):
        bundle = generate(SyntheticConfig(seed=seed, eval_fraction=0.0))
        corpus, m = bundle.corpus, bundle.matrix
        clustering = fit_spherical_kmeans(m, t=default_cluster_count(m.n), seed=seed)
        topic_sub = sample_topic_efficient(
            m, clustering, corpus, SamplerConfig(threshold=111, seed=seed)
        )
        rand_sub = sample_random(corpus, len(topic_sub), seed=seed)

        if _topic_sigma(corpus, topic_sub.selected) < _topic_sigma(corpus, rand_sub.selected):
            topic_wins += 1
        if _label_sigma(corpus, topic_sub.selected) < _label_sigma(corpus, rand_sub.selected):
            label_wins += 1

    assert topic_wins >= 95, f"topic-count sigma lower in only {topic_wins}/100 seeds"
    assert label_wins >= 90, f"per-topic label sigma lower in only {label_wins}/100 seeds"


def _representation_purity(head, m, ids, gold, seed):
    emb = m.rows_for(ids).astype(head.dtype)
    reps, _ = head.forward(emb)
    rep_m = normalize_rows(EmbeddingMatrix(ids=list(ids), data=reps.astype(np.float32)))
    clustering = fit_spherical_kmeans(rep_m, t=10, seed=seed)
    return cluster_purity(clustering.assignments, {i: str(gold[i]) for i in ids})


def test_contrastive_training_lifts_representation_purity():
    """K-means purity of trained representations: adding the contrastive term
    to cross-entropy lifts purity by >= 0.05 absolute, median over 20 seeds.
    Under 5 min."""
    t0 = time.monotonic()
    lifts = []
    for seed in range(20):
        bundle = generate(SyntheticConfig(seed=seed, eval_fraction=0.0))
        corpus, m = bundle.corpus, bundle.matrix
        clustering = fit_spherical_kmeans(m, t=default_cluster_count(m.n), seed=seed)
        subset = sample_topic_efficient(
            m, clustering, corpus, SamplerConfig(threshold=111, seed=seed)
        )
        labels = corpus.labels_by_id()
        gold = {i: labels[i] for i in subset.selected}

        purity = {}
        for contrastive in (True, False):
            cfg = TrainConfig(
                lr_peak=2e-2, epochs=600, hidden=64, batch_size=128,
                seed=seed, dtype="float64", contrastive=contrastive,
            )
            state = train(subset, m, labels, cfg)
            purity[contrastive] = _representation_purity(
                state.head, m, subset.selected, gold, seed
            )
        lifts.append(purity[True] - purity[False])

    median_lift = float(np.median(lifts))
    assert median_lift >= 0.05, f"median purity lift {median_lift:.3f}"
    assert time.monotonic() - t0 < 300.0


def test_larger_budget_never_hurts_macro_f1_100_seeds():
    """Macro-F1 of the trained head at budget 0.10 is at least its value at
    budget 0.01 on the held-out synthetic eval set in >= 90/100 seeds."""
    wins = 0
    for seed in range(100):
        bundle = generate(SyntheticConfig(seed=seed))
        corpus, m = bundle.corpus, bundle.matrix
        clustering = fit_spherical_kmeans(m, t=default_cluster_count(m.n), seed=seed)
        labels = corpus.labels_by_id()

        golds = [str(d.label) for d in bundle.eval_corpus.documents]
        f1 = {}
        for budget in (0.01, 0.10):
            size = max(1, math.floor(budget * len(corpus)))
            subset = sample_topic_efficient(
                m, clustering, corpus, SamplerConfig(threshold=size, seed=seed)
            )
            cfg = TrainConfig(
                epochs=40, lr_peak=5e-3, hidden=64, batch_size=32,
                seed=seed, dtype="float64",
            )
            state = train(subset, m, labels, cfg)
            pred_idx = state.head.predict(
                bundle.eval_matrix.data.astype(state.head.dtype)
            )
            preds = [str(LABEL_ORDER[i]) for i in pred_idx]
            f1[budget] = classification_metrics(preds, golds)["macro_f1"]
        if f1[0.10] >= f1[0.01]:
            wins += 1

    assert wins >= 90, f"budget 0.10 >= 0.01 in only {wins}/100 seeds"


# ---------------------------------------------------------------------------
# pipeline-level guarantees
# ---------------------------------------------------------------------------

_STAGES = [
    ["ingest", "--out", "data", "--synthetic", "--topic-sizes", "60,30,10",
     "--dims", "8", "--seed", "3"],
    ["cluster", "--out", "clu", "--embeddings", "data/embeddings.tseb"],
    ["sample", "--out", "smp", "--corpus", "data/corpus.jsonl",
     "--embeddings", "data/embeddings.tseb",
     "--clustering", "clu/clustering.json", "--budget", "0.2"],
    ["diagnose", "--out", "diag", "--corpus", "data/corpus.jsonl",
     "--subset", "smp/subset.json"],
    ["train", "--out", "trn", "--corpus", "data/corpus.jsonl",
     "--subset", "smp/subset.json", "--embeddings", "data/embeddings.tseb",
     "--epochs", "2", "--hidden", "8", "--batch-size", "16"],
    ["eval", "--out", "ev", "--corpus", "data/eval_corpus.jsonl",
     "--embeddings", "data/eval_embeddings.tseb",
     "--checkpoint", "trn/checkpoint.npz"],
]


def _run_pipeline(root, threads):
    root.mkdir()
    env = dict(os.environ)
    env["OPENBLAS_NUM_THREADS"] = threads
    env["OMP_NUM_THREADS"] = threads
    for stage in _STAGES:
        proc = subprocess.run(
            [sys.executable, "-m", "stancekit.cli", *stage],
            cwd=root, env=env, capture_output=True, text=True,
        )
        assert proc.returncode == 0, f"{stage[0]} failed:\n{proc.stderr}"


def test_pipeline_bit_reproducible_and_thread_independent(tmp_path):
    """Every stage's artifacts (data, models, reports, manifests) are byte
    identical across reruns, including runs under different BLAS/OpenMP
    thread-count environments."""
    a, b = tmp_path / "run_a", tmp_path / "run_b"
    _run_pipeline(a, threads="1")
    _run_pipeline(b, threads="4")

    files_a = sorted(p.relative_to(a) for p in a.rglob("*") if p.is_file())
    files_b = sorted(p.relative_to(b) for p in b.rglob("*") if p.is_file())
    assert files_a == files_b
    assert len(files_a) >= 20
    for rel in files_a:
        assert (a / rel).read_bytes() == (b / rel).read_bytes(), str(rel)


def test_sampler_contrastive_ablation_grid_runs(tmp_path, capsys):
    """All sampler x contrastive configurations ({topic, random, stratified}
    x {on, off}) run the sample-train-eval pipeline end to end."""
    assert cli.main([
        "ingest", "--out", str(tmp_path / "data"), "--synthetic",
        "--topic-sizes", "60,30,10", "--dims", "8", "--seed", "2",
    ]) == 0
    assert cli.main([
        "cluster", "--out", str(tmp_path / "clu"),
        "--embeddings", str(tmp_path / "data" / "embeddings.tseb"),
    ]) == 0

    for method in ("topic", "random", "stratified"):
        for contrastive in (True, False):
            tag = f"{method}_{'cl' if contrastive else 'ce'}"
            sample_args = [
                "sample", "--out", str(tmp_path / f"s_{tag}"),
                "--corpus", str(tmp_path / "data" / "corpus.jsonl"),
                "--method", method, "--budget", "0.2",
            ]
            if method == "topic":
                sample_args += [
                    "--embeddings", str(tmp_path / "data" / "embeddings.tseb"),
                    "--clustering", str(tmp_path / "clu" / "clustering.json"),
                ]
            assert cli.main(sample_args) == 0, tag

            train_args = [
                "train", "--out", str(tmp_path / f"t_{tag}"),
                "--corpus", str(tmp_path / "data" / "corpus.jsonl"),
                "--subset", str(tmp_path / f"s_{tag}" / "subset.json"),
                "--embeddings", str(tmp_path / "data" / "embeddings.tseb"),
                "--epochs", "1", "--hidden", "8",
            ]
            if not contrastive:
                train_args.append("--no-contrastive")
            assert cli.main(train_args) == 0, tag

            assert cli.main([
                "eval", "--out", str(tmp_path / f"e_{tag}"),
                "--corpus", str(tmp_path / "data" / "eval_corpus.jsonl"),
                "--embeddings", str(tmp_path / "data" / "eval_embeddings.tseb"),
                "--checkpoint", str(tmp_path / f"t_{tag}" / "checkpoint.npz"),
            ]) == 0, tag
            capsys.readouterr()
            metrics = json.loads(
                (tmp_path / f"e_{tag}" / "metrics.json").read_text()
            )
            assert 0.0 <= metrics["macro_f1"] <= 1.0, tag
