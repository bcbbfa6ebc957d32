"""Encoder backends: a pretrained sentence transformer plus an offline hasher.

Both expose the same two-member contract: a ``dims`` attribute and an
``encode(texts) -> (len(texts), dims) float array`` method. Rows come back
unnormalized; the exporter owns normalization.
"""

import hashlib
import re

import numpy as np

from .errors import ModelError

DEFAULT_MODEL = "sentence-transformers/all-MiniLM-L6-v2"

# model names like "hashed-256" select the dependency-free token hasher
_HASHED_PREFIX = "hashed-"
_TOKEN_RE = re.compile(r"[a-z0-9]+")


class HashedEncoder:
    """Deterministic bag-of-tokens embedding via feature hashing.

    Each lowercased alphanumeric token lands in two signed buckets derived
    from its SHA-256 digest, so output depends only on the text and the
    requested width, never on interpreter state or downloads. Meant for
    air-gapped runs and as the reference implementation of the encoder
    contract; it captures lexical overlap, nothing more.
    """

    def __init__(self, dims: int):
        if dims < 1:
            raise ModelError(f"hashed encoder width must be >= 1, got {dims}")
        self.dims = int(dims)

    def encode(self, texts) -> np.ndarray:
        out = np.zeros((len(texts), self.dims), dtype=np.float64)
        for row, text in enumerate(texts):
            for token in _TOKEN_RE.findall(str(text).lower()):
                digest = hashlib.sha256(token.encode("utf-8")).digest()
                # two probes per token smooth collisions at small widths
                for offset in (0, 9):
                    idx = int.from_bytes(digest[offset : offset + 8], "little") % self.dims
                    sign = 1.0 if digest[offset + 8] & 1 else -1.0
                    out[row, idx] += sign
        return out


class SentenceTransformerEncoder:
    """Wraps a sentence-transformers checkpoint, loaded once at construction."""

    def __init__(self, name: str):
        try:
            from sentence_transformers import SentenceTransformer
        except ImportError as exc:
            raise ModelError(f"sentence-transformers is not installed: {exc}") from None
        try:
            self._model = SentenceTransformer(name, device="cpu")
        except Exception as exc:
            raise ModelError(f"cannot load encoder {name!r}: {exc}") from None
        dims = self._model.get_sentence_embedding_dimension()
        if not dims:
            raise ModelError(f"encoder {name!r} reports no embedding width")
        self.name = name
        self.dims = int(dims)

    def encode(self, texts) -> np.ndarray:
        vecs = self._model.encode(
            list(texts),
            batch_size=max(1, len(texts)),
            convert_to_numpy=True,
            normalize_embeddings=False,
            show_progress_bar=False,
        )
        return np.asarray(vecs, dtype=np.float64)


def get_encoder(name: str):
    """Map a model name to a backend; ``hashed-<width>`` never touches disk."""
    if name.startswith(_HASHED_PREFIX):
        tail = name[len(_HASHED_PREFIX) :]
        if not tail.isdigit():
            raise ModelError(f"bad hashed encoder name {name!r}, want hashed-<width>")
        return HashedEncoder(int(tail))
    return SentenceTransformerEncoder(name)
