"""Offline sentence-embedding generator for book catalog metadata."""
from .core import (
    CATALOG_HEADER,
    DEFAULT_MODEL,
    FIELD_ORDER,
    CatalogError,
    EmbedgenError,
    EmbedJob,
    ModelUnavailable,
    build_summary,
    generate,
    load_encoder,
    parse_fields,
    read_catalog,
    write_embv1,
)

__version__ = "0.1.0"

__all__ = [
    "CATALOG_HEADER",
    "DEFAULT_MODEL",
    "FIELD_ORDER",
    "CatalogError",
    "EmbedgenError",
    "EmbedJob",
    "ModelUnavailable",
    "build_summary",
    "generate",
    "load_encoder",
    "parse_fields",
    "read_catalog",
    "write_embv1",
    "__version__",
]
