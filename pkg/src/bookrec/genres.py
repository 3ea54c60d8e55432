"""Genre vocabulary pruning, entropy-guided aggregation, and top-4 assignment.

The vote matrix holds user-supplied (book, genre) vote counts.  Processing
order: prune uninformative genres, then apply configured merge candidates
sequentially (each kept only if it moves the Shannon entropy of the
genre-occurrence distribution in the configured direction), then keep the top
four genres per book with probabilities proportional to votes.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .domain import Book, ReadingsTable
from .errors import InvariantViolation

_log = logging.getLogger(__name__)

ENTROPY_TOL = 1e-12

DEFAULT_DROP_LIST = frozenset(
    {"Fiction and Literature", "Textbooks", "References", "Self Help"}
)


@dataclass
class GenreVoteMatrix:
    """Sparse (book, genre) -> vote-count matrix; zero-vote pairs are absent."""

    votes: dict[tuple[int, str], int] = field(default_factory=dict)

    def __post_init__(self):
        for key, count in self.votes.items():
            if count < 1:
                raise InvariantViolation(f"non-positive vote count for {key}")

    def occurrences(self) -> dict[str, int]:
        """Total votes per genre across all books."""
        occ: dict[str, int] = {}
        for (_, genre), count in self.votes.items():
            occ[genre] = occ.get(genre, 0) + count
        return occ

    def by_book(self) -> dict[int, dict[str, int]]:
        books: dict[int, dict[str, int]] = {}
        for (book, genre), count in self.votes.items():
            books.setdefault(book, {})[genre] = count
        return books

    def __len__(self) -> int:
        return len(self.votes)


@dataclass
class GenreConfig:
    """Vocabulary cleanup configuration.

    ``merge_map`` is an ordered list of candidate (from_genre, to_genre)
    merges, evaluated sequentially on the running matrix.  ``entropy_rule``
    selects the comparison direction: "decrease" applies a merge only when it
    strictly lowers the occurrence-distribution entropy, "increase" when it
    strictly raises it.
    """

    drop_list: frozenset[str] = DEFAULT_DROP_LIST
    merge_map: tuple[tuple[str, str], ...] = ()
    entropy_rule: str = "decrease"

    def __post_init__(self):
        self.drop_list = frozenset(self.drop_list)
        self.merge_map = tuple((a, b) for a, b in self.merge_map)
        if self.entropy_rule not in ("decrease", "increase"):
            raise ValueError(f"unknown entropy_rule {self.entropy_rule!r}")
        targets = {b for _, b in self.merge_map}
        clash = self.drop_list & targets
        if clash:
            raise ValueError(f"drop_list genres are also merge targets: {sorted(clash)}")
        self._check_acyclic()

    def _check_acyclic(self) -> None:
        edges: dict[str, set[str]] = {}
        for a, b in self.merge_map:
            edges.setdefault(a, set()).add(b)
        state: dict[str, int] = {}  # 0 visiting, 1 done

        def visit(node, stack):
            state[node] = 0
            for nxt in edges.get(node, ()):
                if state.get(nxt) == 0:
                    raise ValueError(f"merge_map cycle through {nxt!r}")
                if nxt not in state:
                    visit(nxt, stack)
            state[node] = 1

        for start in edges:
            if start not in state:
                visit(start, [])


def shannon_entropy(counts) -> float:
    """Entropy in bits of the distribution proportional to ``counts``."""
    arr = np.asarray([c for c in counts if c > 0], dtype=np.float64)
    if arr.size == 0:
        return 0.0
    p = arr / arr.sum()
    return float(-(p * np.log2(p)).sum())


def prune_genres(votes: GenreVoteMatrix, cfg: GenreConfig) -> GenreVoteMatrix:
    """Drop all votes for genres on the configured drop list."""
    kept = {k: v for k, v in votes.votes.items() if k[1] not in cfg.drop_list}
    return GenreVoteMatrix(kept)


def aggregate_genres(votes: GenreVoteMatrix, cfg: GenreConfig) -> GenreVoteMatrix:
    """Apply each candidate merge that moves entropy in the configured direction.

    Candidates are evaluated in ``merge_map`` order against the running
    matrix, so a later candidate sees the effect of earlier applied merges.
    """
    current = dict(votes.votes)
    for src, dst in cfg.merge_map:
        if src == dst:
            continue
        occ: dict[str, int] = {}
        for (_, genre), count in current.items():
            occ[genre] = occ.get(genre, 0) + count
        if src not in occ:
            continue
        h_before = shannon_entropy(occ.values())
        merged_occ = dict(occ)
        merged_occ[dst] = merged_occ.get(dst, 0) + merged_occ.pop(src)
        h_after = shannon_entropy(merged_occ.values())
        if cfg.entropy_rule == "decrease":
            apply = h_after < h_before - ENTROPY_TOL
        else:
            apply = h_after > h_before + ENTROPY_TOL
        if not apply:
            _log.debug("merge %s->%s skipped (H %.6f -> %.6f)", src, dst, h_before, h_after)
            continue
        _log.debug("merge %s->%s applied (H %.6f -> %.6f)", src, dst, h_before, h_after)
        merged: dict[tuple[int, str], int] = {}
        for (book, genre), count in current.items():
            key = (book, dst) if genre == src else (book, genre)
            merged[key] = merged.get(key, 0) + count
        current = merged
    return GenreVoteMatrix(current)


def assign_top4(votes: GenreVoteMatrix) -> dict[int, list[tuple[str, float]]]:
    """Per book, keep the four most-voted genres and normalize their votes.

    Ties on vote count break lexicographically by genre name; probabilities
    are proportional to the kept vote counts and sum to one per book.
    """
    result: dict[int, list[tuple[str, float]]] = {}
    for book, counts in votes.by_book().items():
        ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))[:4]
        total = sum(c for _, c in ranked)
        result[book] = [(g, c / total) for g, c in ranked]
    return result


def genre_distribution(
    readings: ReadingsTable, catalog: dict[int, Book]
) -> list[tuple[str, float]]:
    """Share of each genre over all readings, weighted by book genre probability.

    Books without genres contribute nothing, so the shares sum to at most one.
    Returned sorted by descending share, then genre name.
    """
    total = len(readings)
    if total == 0:
        return []
    shares: dict[str, float] = {}
    for reading in readings:
        book = catalog.get(reading.book)
        if book is None:
            continue
        for genre, prob in book.genres:
            shares[genre] = shares.get(genre, 0.0) + prob
    out = [(g, s / total) for g, s in shares.items()]
    out.sort(key=lambda kv: (-kv[1], kv[0]))
    return out
