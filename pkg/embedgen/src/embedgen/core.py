"""Compute sentence embeddings for book metadata summaries.

Reads a ``catalog.csv`` produced by the recommendation pipeline, rebuilds
each book's metadata summary with the documented concatenation rule, encodes
the summaries with a pre-trained sentence-transformer, and writes an EMBV1
embedding file.  The two file formats are the only coupling to the consumer;
this package imports nothing from it.

EMBV1: first line ``#embv1 dim=<d>``, then one TAB-separated row per book of
``<external_id>  <f_0> ... <f_{d-1}>`` with floats at 8 significant digits.
"""
from __future__ import annotations

import csv
import logging
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

_log = logging.getLogger(__name__)

#: Canonical order in which selected fields are concatenated.
FIELD_ORDER = ("title", "authors", "plot", "genres", "keywords")

#: Multilingual checkpoint pinned for reproducible ablations.
DEFAULT_MODEL = "paraphrase-multilingual-MiniLM-L12-v2"

#: Exact column order a catalog.csv must use.
CATALOG_HEADER = ("book_id", "title", "authors", "item_type", "language",
                  "plot", "keywords", "genres")


class EmbedgenError(Exception):
    """Base class for everything this tool raises on purpose."""


class CatalogError(EmbedgenError):
    """The catalog file is missing or not in the expected format."""


class ModelUnavailable(EmbedgenError):
    """The sentence-transformer checkpoint could not be loaded."""


def parse_fields(raw: str) -> tuple[str, ...]:
    """Parse a comma-separated field list into canonical order."""
    chosen = {part.strip().lower() for part in raw.split(",") if part.strip()}
    unknown = chosen.difference(FIELD_ORDER)
    if unknown:
        raise ValueError(
            f"unknown fields {sorted(unknown)}; choose from {', '.join(FIELD_ORDER)}"
        )
    return tuple(f for f in FIELD_ORDER if f in chosen)


@dataclass(frozen=True)
class EmbedJob:
    """One embedding run: which catalog, which fields, where to, which model."""

    catalog: Path
    fields: tuple[str, ...]
    out: Path
    model: str = DEFAULT_MODEL
    batch: int = 64

    def __post_init__(self):
        if not self.fields:
            raise ValueError("field set must not be empty")
        unknown = set(self.fields).difference(FIELD_ORDER)
        if unknown:
            raise ValueError(f"unknown fields {sorted(unknown)}")
        if self.batch < 1:
            raise ValueError(f"batch size must be >= 1, got {self.batch}")


def read_catalog(path) -> list[dict[str, str]]:
    """Read catalog.csv rows as dictionaries keyed by column name."""
    path = Path(path)
    if not path.exists():
        raise CatalogError(f"catalog file not found: {path}")
    rows = []
    with path.open("r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != list(CATALOG_HEADER):
            raise CatalogError(f"{path}: unexpected catalog header {header}")
        for lineno, cells in enumerate(reader, start=2):
            if len(cells) != len(CATALOG_HEADER):
                raise CatalogError(
                    f"{path}:{lineno}: expected {len(CATALOG_HEADER)} columns, "
                    f"got {len(cells)}"
                )
            rows.append(dict(zip(CATALOG_HEADER, cells)))
    return rows


def _genre_names(packed: str) -> list[str]:
    # "name:prob;name:prob" with names already in probability order
    return [part.rpartition(":")[0] for part in packed.split(";") if part]


def build_summary(row: dict[str, str], fields) -> str:
    """Concatenate the selected metadata fields of one catalog row.

    Parts appear in the fixed order title, authors, plot, genres, keywords,
    joined with ``". "``; empty fields contribute nothing; authors, genre
    names, and keywords are joined with ``", "``.  Returns ``""`` when every
    selected field is empty.
    """
    parts = []
    for f in FIELD_ORDER:
        if f not in fields:
            continue
        raw = row[f]
        if not raw:
            continue
        if f in ("authors", "keywords"):
            parts.append(", ".join(raw.split(";")))
        elif f == "genres":
            parts.append(", ".join(_genre_names(raw)))
        else:
            parts.append(raw)
    return ". ".join(parts)


def load_encoder(model_name: str):
    """Load a sentence-transformer and wrap it as ``encoder(texts, batch)``.

    The import happens here so that callers injecting their own encoder never
    pay for it.
    """
    try:
        from sentence_transformers import SentenceTransformer
    except ImportError as exc:
        raise ModelUnavailable(
            f"sentence-transformers is not installed ({exc}); "
            "install it with `pip install sentence-transformers`"
        ) from exc
    try:
        model = SentenceTransformer(model_name, device="cpu")
    except Exception as exc:
        raise ModelUnavailable(
            f"could not load sentence-transformer {model_name!r}: {exc}. "
            "Download it once on a machine with network access, e.g. "
            f"`python -c \"from sentence_transformers import SentenceTransformer; "
            f"SentenceTransformer('{model_name}')\"`, or pass --model with a "
            "locally available checkpoint."
        ) from exc

    def encode(texts, batch: int) -> np.ndarray:
        return np.asarray(
            model.encode(list(texts), batch_size=batch, convert_to_numpy=True,
                         show_progress_bar=False),
            dtype=np.float64,
        )

    return encode


def write_embv1(path, ids, vectors: np.ndarray) -> None:
    """Write an EMBV1 file atomically (temp file + rename)."""
    path = Path(path)
    vectors = np.asarray(vectors, dtype=np.float64)
    if vectors.ndim != 2 or vectors.shape[0] != len(ids):
        raise ValueError(
            f"need one vector per id: {len(ids)} ids, array shape {vectors.shape}"
        )
    if not np.isfinite(vectors).all():
        raise ValueError("embedding matrix contains non-finite values")
    tmp = path.with_name(path.name + ".tmp")
    with tmp.open("w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"#embv1 dim={vectors.shape[1]}\n")
        for ext, vec in zip(ids, vectors):
            fh.write(ext + "\t" + "\t".join(f"{x:.8g}" for x in vec) + "\n")
    os.replace(tmp, path)


def generate(job: EmbedJob, encoder=None) -> int:
    """Embed every book in the catalog and write the EMBV1 file.

    Books whose selected fields are all empty are skipped with a log line.
    Returns the number of rows written.
    """
    rows = read_catalog(job.catalog)
    ids, texts = [], []
    for row in rows:
        summary = build_summary(row, job.fields)
        if not summary:
            _log.warning("book %s: selected fields are empty; row skipped",
                         row["book_id"])
            continue
        ids.append(row["book_id"])
        texts.append(summary)
    if encoder is None:
        encoder = load_encoder(job.model)
    vectors = encoder(texts, job.batch) if texts else np.zeros((0, 1))
    write_embv1(job.out, ids, vectors)
    _log.info("wrote %d vectors (dim %d) to %s", len(ids),
              int(vectors.shape[1]), job.out)
    return len(ids)
