"""Core value types: id interning, books, readings, and the readings table.

External string ids are namespaced by source ("bct:...", "anobii:...") and
interned to dense contiguous integers; all downstream matrices and rankings
work on the dense indices.  Domain objects are treated as immutable once the
catalog is finalized.
"""
from __future__ import annotations

import datetime
import enum
from dataclasses import dataclass, field

from .errors import InvalidId, InvariantViolation

PROB_TOL = 1e-9


class ItemType(enum.Enum):
    MONOGRAPH = "monograph"
    MANUSCRIPT = "manuscript"
    OTHER = "other"

    @classmethod
    def from_string(cls, raw: str) -> "ItemType":
        try:
            return cls(raw.strip().lower())
        except ValueError:
            return cls.OTHER


class Source(enum.Enum):
    BCT_LOAN = "bct_loan"
    ANOBII_RATING = "anobii_rating"


class Interner:
    """Bijective mapping external string id <-> dense non-negative index.

    Mutable during ingestion only (single writer); reads are safe afterwards.
    """

    def __init__(self) -> None:
        self._to_index: dict[str, int] = {}
        self._to_external: list[str] = []

    def intern(self, external_id: str) -> int:
        """Return the dense index for ``external_id``, allocating it if new."""
        if not external_id:
            raise InvalidId("empty external id")
        idx = self._to_index.get(external_id)
        if idx is None:
            idx = len(self._to_external)
            self._to_index[external_id] = idx
            self._to_external.append(external_id)
        return idx

    def external(self, index: int) -> str:
        return self._to_external[index]

    def index_of(self, external_id: str) -> int:
        return self._to_index[external_id]

    def get(self, external_id: str) -> int | None:
        return self._to_index.get(external_id)

    def __contains__(self, external_id: str) -> bool:
        return external_id in self._to_index

    def __len__(self) -> int:
        return len(self._to_external)

    def __iter__(self):
        return iter(self._to_external)


@dataclass(frozen=True)
class Book:
    """Catalog entry with metadata merged from both sources.

    ``genres`` holds at most four (name, probability) pairs with probabilities
    summing to one and listed in non-increasing order.
    """

    id: int
    title: str
    authors: tuple[str, ...] = ()
    item_type: ItemType = ItemType.OTHER
    language: str = ""
    plot: str | None = None
    keywords: tuple[str, ...] = ()
    genres: tuple[tuple[str, float], ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "authors", tuple(self.authors))
        object.__setattr__(self, "keywords", tuple(self.keywords))
        object.__setattr__(self, "genres", tuple((g, float(p)) for g, p in self.genres))
        if len(self.genres) > 4:
            raise InvariantViolation(f"book {self.id}: more than 4 genres")
        if self.genres:
            total = sum(p for _, p in self.genres)
            if abs(total - 1.0) > PROB_TOL:
                raise InvariantViolation(
                    f"book {self.id}: genre probabilities sum to {total!r}, not 1"
                )
            probs = [p for _, p in self.genres]
            if any(b > a for a, b in zip(probs, probs[1:])):
                raise InvariantViolation(f"book {self.id}: genre probabilities increase")


@dataclass(frozen=True)
class Reading:
    """One implicit-feedback interaction: user read book (loan or rating)."""

    user: int
    book: int
    date: datetime.date | None
    source: Source


class ReadingsTable:
    """Deduplicated user->book interactions with per-user and per-book indexes.

    Inserting the same (user, book) pair twice keeps a single reading with the
    earliest date; implicit feedback is binary, so multiplicity carries no
    information.
    """

    def __init__(self, readings=()) -> None:
        self._by_pair: dict[tuple[int, int], Reading] = {}
        self._user_books: dict[int, set[int]] = {}
        self._book_count: dict[int, int] = {}
        for r in readings:
            self.add(r)

    def add(self, reading: Reading) -> None:
        key = (reading.user, reading.book)
        old = self._by_pair.get(key)
        if old is None:
            self._by_pair[key] = reading
            self._user_books.setdefault(reading.user, set()).add(reading.book)
            self._book_count[reading.book] = self._book_count.get(reading.book, 0) + 1
        elif reading.date is not None and (old.date is None or reading.date < old.date):
            self._by_pair[key] = reading

    def __len__(self) -> int:
        return len(self._by_pair)

    def __iter__(self):
        return iter(self._by_pair.values())

    def __contains__(self, pair: tuple[int, int]) -> bool:
        return pair in self._by_pair

    def get(self, user: int, book: int) -> Reading | None:
        return self._by_pair.get((user, book))

    def users(self) -> list[int]:
        return sorted(self._user_books)

    def books(self) -> list[int]:
        return sorted(self._book_count)

    def books_of(self, user: int) -> list[int]:
        return sorted(self._user_books.get(user, ()))

    def readings_of(self, user: int) -> list[Reading]:
        books = self._user_books.get(user, ())
        return [self._by_pair[(user, b)] for b in sorted(books)]

    def reader_count(self, book: int) -> int:
        return self._book_count.get(book, 0)

    def book_counts(self) -> dict[int, int]:
        return dict(self._book_count)

    def user_source(self, user: int) -> Source:
        """Source of the user's readings (users are namespaced per source)."""
        books = self._user_books[user]
        return self._by_pair[(user, next(iter(books)))].source

    def filtered(self, keep) -> "ReadingsTable":
        """New table retaining readings for which ``keep(reading)`` is true."""
        return ReadingsTable(r for r in self if keep(r))

    def check_consistency(self) -> None:
        """Rebuild indexes from the readings and compare (invariant check)."""
        user_books: dict[int, set[int]] = {}
        book_count: dict[int, int] = {}
        for (u, b), r in self._by_pair.items():
            if (r.user, r.book) != (u, b):
                raise InvariantViolation(f"reading keyed {(u, b)} holds {(r.user, r.book)}")
            user_books.setdefault(u, set()).add(b)
            book_count[b] = book_count.get(b, 0) + 1
        if user_books != self._user_books or book_count != self._book_count:
            raise InvariantViolation("readings indexes are stale")
        if len(self._by_pair) != sum(len(s) for s in self._user_books.values()):
            raise InvariantViolation("reading count disagrees with user index")
