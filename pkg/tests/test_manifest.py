"""Run manifests: hashing, structure, byte-for-byte reproducibility."""

import hashlib
import json

import pytest

from stancekit.errors import DataError
from stancekit.manifest import build_manifest, file_sha256, read_manifest, write_manifest


@pytest.fixture
def files(tmp_path):
    a = tmp_path / "a.bin"
    b = tmp_path / "b.txt"
    a.write_bytes(b"\x00\x01\x02" * 1000)
    b.write_text("hello\n")
    return a, b


class TestHashing:
    def test_matches_hashlib(self, files):
        a, _ = files
        assert file_sha256(a) == hashlib.sha256(a.read_bytes()).hexdigest()

    def test_empty_file(self, tmp_path):
        p = tmp_path / "empty"
        p.touch()
        assert file_sha256(p) == hashlib.sha256(b"").hexdigest()

    def test_missing_file(self, tmp_path):
        with pytest.raises(DataError, match="missing"):
            file_sha256(tmp_path / "nope")


class TestBuild:
    def test_structure(self, files):
        a, b = files
        m = build_manifest("sample", {"seed": 3}, {"emb": a}, {"out": b}, {"note": 1})
        assert m["tool"] == "stancekit"
        assert m["stage"] == "sample"
        assert m["config"] == {"seed": 3}
        assert m["inputs"]["emb"]["sha256"] == file_sha256(a)
        assert m["inputs"]["emb"]["path"] == str(a)
        assert m["outputs"]["out"]["sha256"] == file_sha256(b)
        assert m["extra"] == {"note": 1}

    def test_no_timestamps(self, files):
        a, _ = files
        m = build_manifest("x", {}, {"a": a}, {})

        def keys(node):
            if isinstance(node, dict):
                for k, v in node.items():
                    yield k
                    yield from keys(v)

        for key in keys(m):
            for word in ("time", "date", "host"):
                assert word not in key.lower()

    def test_input_order_canonical(self, files):
        a, b = files
        m1 = build_manifest("x", {}, {"z": a, "a": b}, {})
        m2 = build_manifest("x", {}, {"a": b, "z": a}, {})
        assert list(m1["inputs"]) == ["a", "z"]
        assert json.dumps(m1) == json.dumps(m2)


class TestPersistence:
    def test_round_trip(self, files, tmp_path):
        a, b = files
        path = tmp_path / "manifest.json"
        written = write_manifest(path, "cluster", {"t": 4}, {"emb": a}, {"out": b})
        assert read_manifest(path) == written

    def test_rerun_byte_identical(self, files, tmp_path):
        a, b = files
        p1, p2 = tmp_path / "m1.json", tmp_path / "m2.json"
        write_manifest(p1, "s", {"k": 1}, {"a": a}, {"b": b})
        write_manifest(p2, "s", {"k": 1}, {"a": a}, {"b": b})
        assert p1.read_bytes() == p2.read_bytes()

    def test_content_change_changes_hash(self, files, tmp_path):
        a, b = files
        m1 = build_manifest("s", {}, {"a": a}, {})
        a.write_bytes(b"different")
        m2 = build_manifest("s", {}, {"a": a}, {})
        assert m1["inputs"]["a"]["sha256"] != m2["inputs"]["a"]["sha256"]
