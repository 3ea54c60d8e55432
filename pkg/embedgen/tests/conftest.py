"""Shared fixtures for the embedding-generator tests.

Real sentence-transformer models need a downloaded checkpoint, so most tests
inject a deterministic fake encoder: each text is hashed and the hash seeds a
normal draw, which gives stable, distinct vectors without any model files.
"""

from __future__ import annotations

import csv
import hashlib
from pathlib import Path

import numpy as np
import pytest

from embedgen import CATALOG_HEADER

GOLDEN_CATALOG = Path(__file__).parent / "data" / "golden_catalog.csv"


def hash_vectors(texts: list[str], dim: int) -> np.ndarray:
    out = np.empty((len(texts), dim), dtype=np.float64)
    for row, text in enumerate(texts):
        digest = hashlib.blake2b(text.encode("utf-8"), digest_size=8).digest()
        rng = np.random.default_rng(int.from_bytes(digest, "little"))
        out[row] = rng.normal(size=dim)
    return out


class FakeEncoder:
    """Deterministic stand-in for a sentence-transformer model."""

    def __init__(self, dim: int = 12) -> None:
        self.dim = dim
        self.batches: list[int] = []

    def __call__(self, texts: list[str], batch: int) -> np.ndarray:
        self.batches.append(batch)
        return hash_vectors(list(texts), self.dim)


@pytest.fixture
def fake_encoder() -> FakeEncoder:
    return FakeEncoder()


def write_catalog_rows(path: Path, rows: list[dict[str, str]]) -> Path:
    """Write a catalog file from raw column dicts (missing columns become '')."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CATALOG_HEADER)
        for row in rows:
            writer.writerow([row.get(col, "") for col in CATALOG_HEADER])
    return path
