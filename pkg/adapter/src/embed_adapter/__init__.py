"""Export pretrained sentence embeddings into the training toolkit's formats."""

__version__ = "0.1.0"

from .adapter import AdapterConfig, export_clusters, export_embeddings, read_corpus
from .encoders import (
    DEFAULT_MODEL,
    HashedEncoder,
    SentenceTransformerEncoder,
    get_encoder,
)
from .errors import AdapterError, DataError, ModelError, UsageError
from .formats import TSEB_MAGIC, TSEB_VERSION, write_clustering, write_tseb

__all__ = [
    "AdapterConfig",
    "AdapterError",
    "DEFAULT_MODEL",
    "DataError",
    "HashedEncoder",
    "ModelError",
    "SentenceTransformerEncoder",
    "TSEB_MAGIC",
    "TSEB_VERSION",
    "UsageError",
    "export_clusters",
    "export_embeddings",
    "get_encoder",
    "read_corpus",
    "write_clustering",
    "write_tseb",
]
