"""Exported files must load in the training toolkit with invariants intact.

These tests import the consumer package on purpose: they sit on the boundary
between the two components. Everything else in this suite treats the consumer
as an external program whose file formats are the only contract.
"""

import json
import warnings

import numpy as np
import pytest

from embed_adapter import AdapterConfig, export_clusters, export_embeddings

from stancekit.corpus import read_corpus
from stancekit.embeddings import read_matrix
from stancekit.sampler import SamplerConfig, sample_topic_efficient
from stancekit.topics import import_clustering

LABELS = ["Positive", "Negative", "Discuss", "Other", "Neutral"]
GROUPS = 4


def write_corpus_file(path, n):
    """A consumer-schema corpus whose vocabulary splits into GROUPS groups."""
    with open(path, "w", encoding="utf-8") as fh:
        for i in range(n):
            g = i % GROUPS
            record = {
                "id": f"doc:{i:03d}",
                "dataset": "ds_a" if i < (7 * n) // 10 else "ds_b",
                "topic": f"topic {g}",
                "text": " ".join(f"g{g}tok{(i + j) % 6}" for j in range(5)),
                "raw_label": LABELS[i % 5],
                "label": LABELS[i % 5],
            }
            fh.write(json.dumps(record, ensure_ascii=False) + "\n")


@pytest.fixture(scope="module")
def exported(tmp_path_factory):
    """One 100-document corpus pushed through both exports."""
    root = tmp_path_factory.mktemp("boundary")
    corpus_path = root / "corpus.jsonl"
    write_corpus_file(corpus_path, 100)
    cfg = AdapterConfig(
        model="hashed-64",
        batch_size=16,
        corpus_path=str(corpus_path),
        embeddings_path=str(root / "embeddings.tseb"),
        clusters_path=str(root / "clusters.json"),
        clusters=GROUPS,
        seed=0,
    )
    assert export_embeddings(cfg) == 100
    export_clusters(cfg)
    return root


class TestHundredDocumentRoundTrip:
    def test_consumer_loads_everything_without_warnings(self, exported):
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            corpus = read_corpus(exported / "corpus.jsonl")
            m = read_matrix(exported / "embeddings.tseb")
            clustering = import_clustering(
                exported / "clusters.json", corpus, embeddings=m
            )
        assert m.n == 100
        assert clustering.t == GROUPS

    def test_id_order_preserved(self, exported):
        corpus = read_corpus(exported / "corpus.jsonl")
        m = read_matrix(exported / "embeddings.tseb")
        assert m.ids == list(corpus.ids())
        assert m.ids == [f"doc:{i:03d}" for i in range(100)]

    def test_consumer_invariants_pass(self, exported):
        corpus = read_corpus(exported / "corpus.jsonl")
        m = read_matrix(exported / "embeddings.tseb")
        assert m.dims == 64
        assert m.normalized, "consumer must see unit-norm rows"
        clustering = import_clustering(exported / "clusters.json", corpus, embeddings=m)
        assert clustering.sizes().sum() == 100
        assert all(s > 0 for s in clustering.sizes())
        assert clustering.importances.sum() == pytest.approx(1.0)

    def test_clusters_recover_vocabulary_groups(self, exported):
        # disjoint vocabularies embed orthogonally, so k-means finds them
        corpus = read_corpus(exported / "corpus.jsonl")
        clustering = import_clustering(exported / "clusters.json", corpus)
        group_of = {d.id: d.topic for d in corpus.documents}
        for members in clustering.members():
            assert len({group_of[i] for i in members}) == 1

    def test_consumer_sampler_runs_on_exported_artifacts(self, exported):
        corpus = read_corpus(exported / "corpus.jsonl")
        m = read_matrix(exported / "embeddings.tseb")
        clustering = import_clustering(exported / "clusters.json", corpus, embeddings=m)
        subset = sample_topic_efficient(
            m, clustering, corpus, SamplerConfig(threshold=20, seed=0)
        )
        assert len(subset.selected) == len(set(subset.selected)) == 20
        assert set(subset.selected) <= set(m.ids)


class TestSmallDegenerateExports:
    def make_cfg(self, tmp_path, clusters):
        corpus_path = tmp_path / "corpus.jsonl"
        if not corpus_path.exists():
            write_corpus_file(corpus_path, 10)
        return AdapterConfig(
            model="hashed-32",
            corpus_path=str(corpus_path),
            embeddings_path=str(tmp_path / "m.tseb"),
            clusters_path=str(tmp_path / "cl.json"),
            clusters=clusters,
        )

    def test_ten_docs_two_clusters_imports_nonempty(self, tmp_path):
        cfg = self.make_cfg(tmp_path, clusters=2)
        export_embeddings(cfg)
        export_clusters(cfg)
        corpus = read_corpus(tmp_path / "corpus.jsonl")
        m = read_matrix(tmp_path / "m.tseb")
        clustering = import_clustering(tmp_path / "cl.json", corpus, embeddings=m)
        assert clustering.t == 2
        assert all(s > 0 for s in clustering.sizes())

    def test_single_cluster_imports_as_all_zero(self, tmp_path):
        cfg = self.make_cfg(tmp_path, clusters=1)
        export_clusters(cfg)
        corpus = read_corpus(tmp_path / "corpus.jsonl")
        clustering = import_clustering(tmp_path / "cl.json", corpus)
        assert clustering.t == 1
        assert set(clustering.assignments.values()) == {0}

    def test_three_docs_round_trip_matches_ids(self, tmp_path):
        corpus_path = tmp_path / "three.jsonl"
        with open(corpus_path, "w", encoding="utf-8") as fh:
            for rec in [
                {"id": "x", "dataset": "ds_a", "topic": "t", "text": "wind farms",
                 "raw_label": "Positive", "label": "Positive"},
                {"id": "y", "dataset": "ds_a", "topic": "t", "text": "coal plants",
                 "raw_label": "Negative", "label": "Negative"},
                {"id": "z", "dataset": "ds_a", "topic": "t", "text": "policy debate",
                 "raw_label": "Discuss", "label": "Discuss"},
            ]:
                fh.write(json.dumps(rec) + "\n")
        out = tmp_path / "m.tseb"
        export_embeddings(
            AdapterConfig(model="hashed-16", corpus_path=str(corpus_path),
                          embeddings_path=str(out))
        )
        m = read_matrix(out)
        assert m.ids == ["x", "y", "z"]
        assert m.data.shape == (3, 16)
        assert np.allclose(np.linalg.norm(m.data.astype(np.float64), axis=1), 1.0, atol=1e-4)
