"""Data-efficient stance dataset curation and training toolkit.

Submodules are imported lazily so that entry points can configure the
process (BLAS thread pinning for reproducibility) before numpy loads.
"""

__version__ = "0.1.0"

_SUBMODULES = (
    "corpus",
    "embeddings",
    "topics",
    "sampler",
    "trainer",
    "diagnostics",
    "synthetic",
    "manifest",
    "errors",
    "cli",
)


def __getattr__(name):
    if name in _SUBMODULES:
        import importlib

        return importlib.import_module(f".{name}", __name__)
    raise AttributeError(f"module {__name__!r} has no attribute {name!r}")


def __dir__():
    return sorted(list(globals()) + list(_SUBMODULES))
