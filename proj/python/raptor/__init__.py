"""Hierarchical summarization index: build, persist, and query."""

from ._raptor import (
    ConfigError,
    CorruptIndexError,
    Error,
    InvalidInputError,
    IoError,
    MockEmbedder,
    ProviderError,
    RetrievalResult,
    Tree,
    UnsupportedVersionError,
    build,
    load,
)

__all__ = [
    "ConfigError",
    "CorruptIndexError",
    "Error",
    "InvalidInputError",
    "IoError",
    "MockEmbedder",
    "ProviderError",
    "RetrievalResult",
    "Tree",
    "UnsupportedVersionError",
    "build",
    "load",
]
