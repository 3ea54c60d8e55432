"""Recommender interface and the non-learning recommenders.

Every recommender is fitted on a training readings table plus the catalog,
and afterwards produces, per user, a full ranking of the books the user has
not read yet.  ``known`` is the set of readings treated as already read when
ranking (training plus validation during evaluation); it defaults to the
training table.  ``recommend(user, k)`` is always the first ``k`` entries of
``rank(user)``, and ties in every score-based ranking break by ascending
dense book id so rankings are reproducible.
"""
from __future__ import annotations

import logging

import numpy as np

from .domain import ReadingsTable
from .embed import EmbeddingStore
from .errors import ColdStartError, MissingEmbedding, UnknownUser

_log = logging.getLogger(__name__)


class Recommender:
    """Behavioral contract shared by all recommenders."""

    name = "base"
    trains = False  # whether fit() is a real training phase (timing report)

    def __init__(self):
        self._catalog: np.ndarray | None = None
        self._known: dict[int, np.ndarray] = {}

    def fit(self, train: ReadingsTable, catalog, *, known: ReadingsTable | None = None):
        """Fit on ``train``; ``known`` books are excluded from all rankings."""
        self._catalog = np.asarray(sorted(catalog), dtype=np.int64)
        known = known if known is not None else train
        self._known = {
            u: np.asarray(known.books_of(u), dtype=np.int64) for u in known.users()
        }
        for u in train.users():
            self._known.setdefault(
                u, np.asarray(train.books_of(u), dtype=np.int64)
            )
        self._fit(train)
        return self

    def _fit(self, train: ReadingsTable):
        pass

    def known_books(self, user: int) -> np.ndarray:
        try:
            return self._known[user]
        except KeyError:
            raise UnknownUser(f"user {user} was not seen at fit time") from None

    def unread_books(self, user: int) -> np.ndarray:
        """Candidate set: catalog minus the user's known-read books, ascending."""
        return np.setdiff1d(self._catalog, self.known_books(user), assume_unique=True)

    def rank(self, user: int) -> np.ndarray:
        raise NotImplementedError

    def recommend(self, user: int, k: int) -> np.ndarray:
        return self.rank(user)[:k]

    def _rank_by_score(self, candidates: np.ndarray, scores: np.ndarray) -> np.ndarray:
        # candidates are ascending, so a stable sort on -score breaks ties by id
        order = np.argsort(-scores, kind="stable")
        return candidates[order]


class RandomItems(Recommender):
    """Baseline: a seeded uniform random permutation of the unread books."""

    name = "random"

    def __init__(self, seed: int = 0):
        super().__init__()
        self.seed = seed

    def rank(self, user: int) -> np.ndarray:
        unread = self.unread_books(user)
        rng = np.random.default_rng([self.seed, user])
        return rng.permutation(unread)


class MostReadItems(Recommender):
    """Baseline: unread books ordered by descending training read count."""

    name = "most_read"

    def _fit(self, train: ReadingsTable):
        counts = np.zeros(len(self._catalog), dtype=np.int64)
        pos = {b: i for i, b in enumerate(self._catalog)}
        for book, n in train.book_counts().items():
            if book in pos:
                counts[pos[book]] = n
        self._order = self._rank_by_score(self._catalog, counts.astype(np.float64))

    def rank(self, user: int) -> np.ndarray:
        known = self.known_books(user)
        mask = ~np.isin(self._order, known, assume_unique=False)
        return self._order[mask]


class ClosestItems(Recommender):
    """Content-based: rank by mean cosine similarity to the user's read books.

    The score of an unread book is the average cosine similarity between its
    metadata embedding and the embeddings of every book the user has read;
    with row-normalized vectors that average is a single dot product with the
    mean profile vector.
    """

    name = "closest"

    def __init__(self, embeddings: EmbeddingStore):
        super().__init__()
        self.embeddings = embeddings

    def _fit(self, train: ReadingsTable):
        missing = [int(b) for b in self._catalog if b not in self.embeddings]
        if missing:
            raise MissingEmbedding(
                f"{len(missing)} catalog books lack embeddings (first: {missing[:5]})",
                missing,
            )
        mat = np.stack([self.embeddings[int(b)] for b in self._catalog]).astype(np.float64)
        norms = np.linalg.norm(mat, axis=1)
        nonzero = norms > 0.0
        mat[nonzero] /= norms[nonzero, None]  # zero vectors stay zero: cosine 0
        self._normed = mat
        self._row_of = {int(b): i for i, b in enumerate(self._catalog)}

    def scores(self, user: int) -> np.ndarray:
        """Mean-similarity score for every catalog book (read ones included)."""
        profile = self.known_books(user)
        if profile.size == 0:
            raise ColdStartError(f"user {user} has no read books to profile")
        rows = np.asarray([self._row_of[int(b)] for b in profile], dtype=np.int64)
        centroid = self._normed[rows].mean(axis=0)
        return self._normed @ centroid

    def rank(self, user: int) -> np.ndarray:
        unread = self.unread_books(user)
        scores = self.scores(user)
        rows = np.asarray([self._row_of[int(b)] for b in unread], dtype=np.int64)
        return self._rank_by_score(unread, scores[rows])
