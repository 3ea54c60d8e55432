"""Metadata summaries, embedding-vector storage, and cosine similarity.

Embedding vectors are produced outside the engine (see the EMBV1 file format
below) or by the deterministic ``hash_embed`` fallback, which makes the full
pipeline testable without any model download.

EMBV1 file format: UTF-8 text, first line exactly ``#embv1 dim=<d>``, then one
row per book: external id and ``d`` tab-separated floats.
"""
from __future__ import annotations

import enum
import hashlib
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .domain import Book, Interner
from .errors import DimError, EmptySummary, FormatError, IoError

_log = logging.getLogger(__name__)


class Field(enum.Enum):
    TITLE = "title"
    AUTHORS = "authors"
    PLOT = "plot"
    GENRES = "genres"
    KEYWORDS = "keywords"


#: Concatenation order of summary parts (fixed for reproducibility).
FIELD_ORDER = (Field.TITLE, Field.AUTHORS, Field.PLOT, Field.GENRES, Field.KEYWORDS)


def parse_fields(spec: str) -> frozenset[Field]:
    """Parse a comma-separated field list such as ``"authors,genres"``."""
    names = [s.strip().lower() for s in spec.split(",") if s.strip()]
    if not names:
        raise ValueError("empty metadata field set")
    return frozenset(Field(n) for n in names)


def field_set_name(fields: frozenset[Field]) -> str:
    """Canonical name of a field set, in concatenation order."""
    return "+".join(f.value for f in FIELD_ORDER if f in fields)


def metadata_summary(book: Book, fields: frozenset[Field]) -> str:
    """Concatenate the selected metadata fields of ``book``.

    Parts appear in the fixed order title, authors, plot, genres, keywords,
    joined with ". "; empty fields contribute nothing.  Genres are rendered as
    names in probability order; authors and keywords are joined with ", ".
    """
    if not fields:
        raise ValueError("empty metadata field set")
    parts = []
    for f in FIELD_ORDER:
        if f not in fields:
            continue
        if f is Field.TITLE and book.title:
            parts.append(book.title)
        elif f is Field.AUTHORS and book.authors:
            parts.append(", ".join(book.authors))
        elif f is Field.PLOT and book.plot:
            parts.append(book.plot)
        elif f is Field.GENRES and book.genres:
            parts.append(", ".join(g for g, _ in book.genres))
        elif f is Field.KEYWORDS and book.keywords:
            parts.append(", ".join(book.keywords))
    if not parts:
        raise EmptySummary(f"book {book.id}: all selected fields are empty")
    return ". ".join(parts)


@dataclass
class EmbeddingStore:
    """Fixed-dimension real vectors keyed by dense book id."""

    dim: int
    vectors: dict[int, np.ndarray] = field(default_factory=dict)

    def __contains__(self, book_id: int) -> bool:
        return book_id in self.vectors

    def __getitem__(self, book_id: int) -> np.ndarray:
        return self.vectors[book_id]

    def __len__(self) -> int:
        return len(self.vectors)

    def put(self, book_id: int, vector: np.ndarray) -> None:
        vec = np.asarray(vector, dtype=np.float64)
        if vec.shape != (self.dim,):
            raise DimError(f"vector for book {book_id} has shape {vec.shape}, want ({self.dim},)")
        if not np.isfinite(vec).all():
            raise FormatError(f"vector for book {book_id} has non-finite components")
        self.vectors[book_id] = vec


def load_embeddings(path, interner: Interner) -> tuple[EmbeddingStore, list[str]]:
    """Read an EMBV1 file, resolving external ids through ``interner``.

    Returns the store and the list of external ids that were skipped because
    the interner does not know them.
    """
    path = Path(path)
    if not path.exists():
        raise IoError(f"embedding file not found: {path}")
    with path.open("r", encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n")
        if not header.startswith("#embv1 dim="):
            raise FormatError(f"{path}: bad EMBV1 header {header!r}")
        try:
            dim = int(header[len("#embv1 dim="):])
        except ValueError:
            raise FormatError(f"{path}: unparseable dim in header {header!r}") from None
        if dim < 1:
            raise FormatError(f"{path}: dim must be positive, got {dim}")
        store = EmbeddingStore(dim)
        skipped: list[str] = []
        for lineno, line in enumerate(fh, start=2):
            line = line.rstrip("\n")
            if not line:
                continue
            cells = line.split("\t")
            external, raw = cells[0], cells[1:]
            if len(raw) != dim:
                raise FormatError(f"{path}:{lineno}: {len(raw)} components, expected {dim}")
            try:
                vec = np.array([float(x) for x in raw], dtype=np.float64)
            except ValueError:
                raise FormatError(f"{path}:{lineno}: unparseable float") from None
            if not np.isfinite(vec).all():
                raise FormatError(f"{path}:{lineno}: non-finite component")
            book = interner.get(external)
            if book is None:
                skipped.append(external)
                continue
            store.vectors[book] = vec
    if skipped:
        _log.warning("%s: skipped %d unknown book ids", path, len(skipped))
    return store, skipped


def write_embeddings(store: EmbeddingStore, path, interner: Interner) -> None:
    """Write an EMBV1 file; floats carry 8 significant digits."""
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        fh.write(f"#embv1 dim={store.dim}\n")
        for book in sorted(store.vectors):
            comps = "\t".join(f"{x:.8g}" for x in store.vectors[book])
            fh.write(f"{interner.external(book)}\t{comps}\n")


def hash_embed(summary: str, dim: int, seed: int) -> np.ndarray:
    """Deterministic bag-of-words embedding of ``summary``.

    Each lowercased whitespace token is hashed (keyed by ``seed``) to a
    component index and a sign; the accumulated vector is L2-normalized.
    An all-zero accumulation (empty summary) stays the zero vector.
    """
    if dim < 1:
        raise ValueError(f"dim must be positive, got {dim}")
    key = seed.to_bytes(8, "little", signed=True)
    vec = np.zeros(dim, dtype=np.float64)
    for token in summary.lower().split():
        digest = hashlib.blake2b(token.encode("utf-8"), key=key, digest_size=16).digest()
        idx = int.from_bytes(digest[:8], "little") % dim
        sign = 1.0 if digest[8] & 1 else -1.0
        vec[idx] += sign
    norm = math.sqrt(float(vec @ vec))
    if norm > 0.0:
        vec /= norm
    return vec


def cosine(a, b) -> float:
    """Cosine similarity; zero if either vector has zero norm."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise DimError(f"vector lengths differ: {a.shape} vs {b.shape}")
    na = math.sqrt(float(a @ a))
    nb = math.sqrt(float(b @ b))
    if na == 0.0 or nb == 0.0:
        return 0.0
    return float(a @ b) / (na * nb)
