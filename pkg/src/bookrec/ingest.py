"""Source-table parsing, filtering, cross-source book matching, and fusion.

The pipeline stages raw rows from the library (BCT) and social-network
(Anobii) exports, restricts the catalogs to the configured item types and
languages, matches books across the two sources (explicit link file first,
then a normalized title+author key), and emits a merged catalog plus a
deduplicated readings table with reader-count thresholds applied.

Merged books and users receive fresh dense ids assigned in sorted
external-id order, so the same inputs always produce byte-identical exports.
"""
from __future__ import annotations

import csv
import datetime
import enum
import logging
import string
import unicodedata
from dataclasses import dataclass, field, replace
from pathlib import Path

from .domain import Book, Interner, ItemType, Reading, ReadingsTable, Source
from .errors import CorruptInput, InvariantViolation, IoError, LinkError, SchemaError

_log = logging.getLogger(__name__)

MALFORMED_ROW_TOLERANCE = 0.10


class Schema(enum.Enum):
    BCT_BOOKS = "bct_books"
    BCT_LOANS = "bct_loans"
    ANOBII_ITEMS = "anobii_items"
    ANOBII_RATINGS = "anobii_ratings"
    ANOBII_GENRE_VOTES = "anobii_genre_votes"
    LINKS = "links"


def _parse_date(raw: str) -> datetime.date | None:
    if raw == "":
        return None
    return datetime.date.fromisoformat(raw)


def _parse_rating(raw: str) -> int:
    value = int(raw)
    if not 1 <= value <= 5:
        raise ValueError(f"rating {value} outside 1..5")
    return value


def _parse_votes(raw: str) -> int:
    value = int(raw)
    if value < 1:
        raise ValueError(f"vote count {value} below 1")
    return value


def _split_multi(raw: str) -> list[str]:
    return [part.strip() for part in raw.split(";") if part.strip()]


def _required(raw: str) -> str:
    if raw == "":
        raise ValueError("empty id field")
    return raw


#: header -> per-column converter (identity when omitted)
_SCHEMAS: dict[Schema, tuple[tuple[str, ...], dict[str, object]]] = {
    Schema.BCT_BOOKS: (
        ("book_id", "title", "authors", "item_type", "language"),
        {"book_id": _required, "authors": _split_multi},
    ),
    Schema.BCT_LOANS: (
        ("user_id", "book_id", "date"),
        {"user_id": _required, "book_id": _required, "date": _parse_date},
    ),
    Schema.ANOBII_ITEMS: (
        ("item_id", "title", "authors", "language", "plot", "keywords"),
        {"item_id": _required, "authors": _split_multi, "keywords": _split_multi},
    ),
    Schema.ANOBII_RATINGS: (
        ("user_id", "item_id", "rating", "date"),
        {"user_id": _required, "item_id": _required, "rating": _parse_rating, "date": _parse_date},
    ),
    Schema.ANOBII_GENRE_VOTES: (
        ("item_id", "genre", "votes"),
        {"item_id": _required, "genre": _required, "votes": _parse_votes},
    ),
    Schema.LINKS: (
        ("bct_book_id", "anobii_item_id"),
        {"bct_book_id": _required, "anobii_item_id": _required},
    ),
}


@dataclass
class ParseResult:
    """Well-formed rows plus a report of the rows that failed to parse."""

    schema: Schema
    rows: list[dict]
    malformed: list[tuple[int, str]] = field(default_factory=list)


def parse_table(path, schema: Schema) -> ParseResult:
    """Parse one CSV source table.

    Malformed rows (wrong arity, bad dates, out-of-range ratings) are counted
    and reported in the result, not silently dropped; if they exceed 10% of
    the data rows the whole file is rejected as corrupt.
    """
    path = Path(path)
    if not path.exists():
        raise IoError(f"input file not found: {path}")
    header, converters = _SCHEMAS[schema]
    rows: list[dict] = []
    malformed: list[tuple[int, str]] = []
    with path.open("r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            first = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: empty file, expected header {','.join(header)}") from None
        if tuple(first) != header:
            raise SchemaError(
                f"{path}: header {','.join(first)!r} does not match schema "
                f"{schema.value} ({','.join(header)})"
            )
        for lineno, cells in enumerate(reader, start=2):
            if not cells:
                continue
            if len(cells) != len(header):
                malformed.append((lineno, f"{len(cells)} fields, expected {len(header)}"))
                continue
            row = {}
            try:
                for name, raw in zip(header, cells):
                    conv = converters.get(name)
                    row[name] = conv(raw) if conv else raw
            except ValueError as exc:
                malformed.append((lineno, str(exc)))
                continue
            rows.append(row)
    total = len(rows) + len(malformed)
    if total and len(malformed) / total > MALFORMED_ROW_TOLERANCE:
        raise CorruptInput(
            f"{path}: {len(malformed)}/{total} rows malformed "
            f"(tolerance {MALFORMED_ROW_TOLERANCE:.0%}); first: "
            f"line {malformed[0][0]}: {malformed[0][1]}"
        )
    if malformed:
        _log.warning("%s: %d malformed rows skipped", path, len(malformed))
    return ParseResult(schema, rows, malformed)


@dataclass
class MergePolicy:
    """Filtering thresholds for the dataset fusion."""

    min_rating: int = 3
    min_user_readings: int = 10
    min_book_readings: int = 100
    languages: frozenset[str] = frozenset({"it"})
    item_types: frozenset[ItemType] = frozenset({ItemType.MONOGRAPH, ItemType.MANUSCRIPT})
    link_file: str | None = None

    def __post_init__(self):
        self.languages = frozenset(self.languages)
        self.item_types = frozenset(self.item_types)
        if not 1 <= self.min_rating <= 5:
            raise ValueError(f"min_rating must be in [1, 5], got {self.min_rating}")
        if self.min_user_readings < 0 or self.min_book_readings < 0:
            raise ValueError("reading thresholds must be non-negative")


def books_from_bct(rows: list[dict], interner: Interner) -> list[Book]:
    """Stage BCT book rows as Book objects (external ids prefixed "bct:")."""
    return [
        Book(
            id=interner.intern("bct:" + row["book_id"]),
            title=row["title"],
            authors=row["authors"],
            item_type=ItemType.from_string(row["item_type"]),
            language=row["language"].strip().lower(),
        )
        for row in rows
    ]


def books_from_anobii(rows: list[dict], interner: Interner) -> list[Book]:
    """Stage Anobii item rows as Book objects (external ids prefixed "anobii:").

    The items table carries no item-type column; everything in it is treated
    as a monograph, matching the source's book-centric scope.
    """
    return [
        Book(
            id=interner.intern("anobii:" + row["item_id"]),
            title=row["title"],
            authors=row["authors"],
            item_type=ItemType.MONOGRAPH,
            language=row["language"].strip().lower(),
            plot=row["plot"] or None,
            keywords=row["keywords"],
        )
        for row in rows
    ]


def filter_catalog(books: list[Book], policy: MergePolicy) -> list[Book]:
    """Keep books whose item type and language are both admitted by ``policy``."""
    return [
        b
        for b in books
        if b.item_type in policy.item_types and b.language in policy.languages
    ]


_PUNCT_TABLE = {ord(c): " " for c in string.punctuation}


def normalized_key(book: Book) -> str:
    """Matching key: diacritic/punctuation-stripped lowercase title + first author."""

    def norm(text: str) -> str:
        text = unicodedata.normalize("NFKD", text)
        text = "".join(c for c in text if not unicodedata.combining(c))
        text = text.lower().translate(_PUNCT_TABLE)
        return " ".join(text.split())

    first_author = book.authors[0] if book.authors else ""
    return norm(book.title) + "|" + norm(first_author)


@dataclass
class MatchResult:
    """Injective BCT -> Anobii mapping plus the ambiguities that were skipped."""

    mapping: dict[int, int]
    from_links: int = 0
    from_keys: int = 0
    ambiguous: list[tuple[str, list[int], list[int]]] = field(default_factory=list)


def match_books(
    bct_books: list[Book],
    anobii_items: list[Book],
    link_rows: list[dict] | None,
    interner: Interner,
) -> MatchResult:
    """Match books across sources.

    Explicit link-file entries take precedence; the remaining books match by
    normalized title+first-author key.  Keys with two or more candidates on
    either side are reported as ambiguous and left unmatched, keeping the
    mapping injective.
    """
    bct_ids = {b.id for b in bct_books}
    anobii_ids = {b.id for b in anobii_items}
    mapping: dict[int, int] = {}
    result = MatchResult(mapping)

    if link_rows:
        offenders = []
        seen_bct: set[int] = set()
        seen_anobii: set[int] = set()
        for row in link_rows:
            bct_ext, anobii_ext = row["bct_book_id"], row["anobii_item_id"]
            bct = interner.get(bct_ext)
            anobii = interner.get(anobii_ext)
            if bct is None or bct not in bct_ids:
                offenders.append(bct_ext)
                continue
            if anobii is None or anobii not in anobii_ids:
                offenders.append(anobii_ext)
                continue
            if bct in seen_bct or anobii in seen_anobii:
                offenders.append(f"{bct_ext},{anobii_ext} (duplicate)")
                continue
            seen_bct.add(bct)
            seen_anobii.add(anobii)
            mapping[bct] = anobii
        if offenders:
            raise LinkError(
                f"link file references unknown or duplicated ids: {offenders}",
                offenders,
            )
        result.from_links = len(mapping)

    linked_anobii = set(mapping.values())
    by_key_bct: dict[str, list[int]] = {}
    for b in bct_books:
        if b.id not in mapping:
            by_key_bct.setdefault(normalized_key(b), []).append(b.id)
    by_key_anobii: dict[str, list[int]] = {}
    for b in anobii_items:
        if b.id not in linked_anobii:
            by_key_anobii.setdefault(normalized_key(b), []).append(b.id)

    for key in sorted(set(by_key_bct) & set(by_key_anobii)):
        left, right = by_key_bct[key], by_key_anobii[key]
        if len(left) == 1 and len(right) == 1:
            mapping[left[0]] = right[0]
            result.from_keys += 1
        else:
            result.ambiguous.append((key, sorted(left), sorted(right)))
    if result.ambiguous:
        _log.warning("%d ambiguous match keys left unmatched", len(result.ambiguous))

    targets = list(mapping.values())
    if len(set(targets)) != len(targets):
        raise InvariantViolation("book matching produced a non-injective mapping")
    return result


@dataclass
class Dataset:
    """Finalized merged catalog and readings with contiguous dense ids."""

    catalog: list[Book]
    readings: ReadingsTable
    books: Interner
    users: Interner

    def book(self, book_id: int) -> Book:
        return self.catalog[book_id]

    def catalog_by_id(self) -> dict[int, Book]:
        return {b.id: b for b in self.catalog}


@dataclass
class BuildSummary:
    """Stage counts reported by :func:`build_readings`."""

    loans_on_matched: int = 0
    ratings_on_matched: int = 0
    ratings_below_min: int = 0
    candidate_readings: int = 0
    books_before_threshold: int = 0
    books_dropped: int = 0
    users_before_threshold: int = 0
    users_dropped: int = 0
    final_books: int = 0
    final_users: int = 0
    final_readings: int = 0


def build_readings(
    loans: list[dict],
    ratings: list[dict],
    matches: dict[int, int],
    policy: MergePolicy,
    bct_books: list[Book],
    anobii_items: list[Book],
    interner: Interner,
) -> tuple[Dataset, BuildSummary]:
    """Fuse loans and ratings on matched books and apply the reader thresholds.

    Readings are BCT loans on matched books plus Anobii ratings at or above
    ``min_rating`` on matched books, deduplicated per (user, book).  Books
    with fewer readers than ``min_book_readings`` are dropped first, then
    users with fewer readings than ``min_user_readings`` (single pass, in that
    order), so every surviving user keeps at least ``min_user_readings``
    readings while book counts may end up below their threshold.

    The merged book takes title/authors from BCT and plot/keywords from
    Anobii when available; genres are attached later by the genre pipeline.
    """
    summary = BuildSummary()
    bct_by_id = {b.id: b for b in bct_books}
    anobii_by_id = {b.id: b for b in anobii_items}
    inverse = {a: b for b, a in matches.items()}

    # candidate readings keyed by (user external, staged bct book id)
    candidates: dict[tuple[str, int], datetime.date | None] = {}
    sources: dict[tuple[str, int], Source] = {}

    def put(user_ext: str, book: int, date, source: Source):
        key = (user_ext, book)
        if key not in candidates:
            candidates[key] = date
            sources[key] = source
        elif date is not None and (candidates[key] is None or date < candidates[key]):
            candidates[key] = date

    for row in loans:
        book = interner.get("bct:" + row["book_id"])
        if book is None or book not in matches:
            continue
        summary.loans_on_matched += 1
        put("bct:" + row["user_id"], book, row["date"], Source.BCT_LOAN)
    for row in ratings:
        if row["rating"] < policy.min_rating:
            summary.ratings_below_min += 1
            continue
        item = interner.get("anobii:" + row["item_id"])
        if item is None or item not in inverse:
            continue
        summary.ratings_on_matched += 1
        put("anobii:" + row["user_id"], inverse[item], row["date"], Source.ANOBII_RATING)
    summary.candidate_readings = len(candidates)

    book_counts: dict[int, int] = {}
    for (_, book) in candidates:
        book_counts[book] = book_counts.get(book, 0) + 1
    summary.books_before_threshold = len(matches)
    surviving_books = {
        b for b in matches if book_counts.get(b, 0) >= policy.min_book_readings
    }
    summary.books_dropped = len(matches) - len(surviving_books)

    user_counts: dict[str, int] = {}
    for (user_ext, book) in candidates:
        if book in surviving_books:
            user_counts[user_ext] = user_counts.get(user_ext, 0) + 1
    summary.users_before_threshold = len(
        {u for (u, _) in candidates}
    )
    surviving_users = {
        u for u, n in user_counts.items() if n >= policy.min_user_readings
    }
    summary.users_dropped = summary.users_before_threshold - len(surviving_users)

    # finalize: fresh contiguous ids in sorted external-id order
    books_final = Interner()
    users_final = Interner()
    catalog: list[Book] = []
    staged_to_final: dict[int, int] = {}
    for staged in sorted(surviving_books, key=interner.external):
        bct = bct_by_id[staged]
        anobii = anobii_by_id[matches[staged]]
        final_id = books_final.intern(interner.external(staged))
        staged_to_final[staged] = final_id
        catalog.append(
            Book(
                id=final_id,
                title=bct.title,
                authors=bct.authors,
                item_type=bct.item_type,
                language=bct.language,
                plot=anobii.plot,
                keywords=anobii.keywords,
            )
        )
    for user_ext in sorted(surviving_users):
        users_final.intern(user_ext)

    table = ReadingsTable()
    for (user_ext, book), date in candidates.items():
        if book not in surviving_books or user_ext not in surviving_users:
            continue
        table.add(
            Reading(
                user=users_final.index_of(user_ext),
                book=staged_to_final[book],
                date=date,
                source=sources[(user_ext, book)],
            )
        )
    summary.final_books = len(catalog)
    summary.final_users = len(users_final)
    summary.final_readings = len(table)
    return Dataset(catalog, table, books_final, users_final), summary


def attach_genres(dataset: Dataset, assignments: dict[int, list[tuple[str, float]]]) -> None:
    """Rebuild catalog books with their assigned genre distributions."""
    for i, book in enumerate(dataset.catalog):
        genres = assignments.get(book.id)
        if genres:
            dataset.catalog[i] = replace(book, genres=tuple(genres))


# --- export / import of the merged dataset ---------------------------------

_FORBIDDEN = (";", ":")


def _pack_multi(values) -> str:
    for v in values:
        if ";" in v:
            raise InvariantViolation(f"value {v!r} contains ';', cannot serialize")
    return ";".join(values)


def _pack_genres(genres) -> str:
    for name, _ in genres:
        if any(ch in name for ch in _FORBIDDEN):
            raise InvariantViolation(f"genre name {name!r} contains ';' or ':'")
    return ";".join(f"{name}:{prob!r}" for name, prob in genres)


def write_catalog(dataset: Dataset, path) -> None:
    """Write catalog.csv sorted by dense book id."""
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["book_id", "title", "authors", "item_type", "language", "plot", "keywords", "genres"]
        )
        for book in dataset.catalog:
            writer.writerow(
                [
                    dataset.books.external(book.id),
                    book.title,
                    _pack_multi(book.authors),
                    book.item_type.value,
                    book.language,
                    book.plot or "",
                    _pack_multi(book.keywords),
                    _pack_genres(book.genres),
                ]
            )


def read_catalog(path) -> tuple[list[Book], Interner]:
    """Read catalog.csv back; interning in file order restores dense ids."""
    path = Path(path)
    if not path.exists():
        raise IoError(f"catalog file not found: {path}")
    interner = Interner()
    catalog: list[Book] = []
    with path.open("r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        expected = ["book_id", "title", "authors", "item_type", "language", "plot", "keywords", "genres"]
        if header != expected:
            raise SchemaError(f"{path}: unexpected catalog header {header}")
        for cells in reader:
            ext, title, authors, item_type, language, plot, keywords, genres = cells
            genre_list = []
            if genres:
                for part in genres.split(";"):
                    name, _, prob = part.rpartition(":")
                    genre_list.append((name, float(prob)))
            catalog.append(
                Book(
                    id=interner.intern(ext),
                    title=title,
                    authors=_split_multi(authors),
                    item_type=ItemType(item_type),
                    language=language,
                    plot=plot or None,
                    keywords=_split_multi(keywords),
                    genres=genre_list,
                )
            )
    return catalog, interner


def write_readings(dataset: Dataset, path) -> None:
    """Write readings.csv sorted by (user, book) dense ids."""
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["user_id", "book_id", "date", "source"])
        for user in dataset.readings.users():
            for reading in dataset.readings.readings_of(user):
                writer.writerow(
                    [
                        dataset.users.external(reading.user),
                        dataset.books.external(reading.book),
                        reading.date.isoformat() if reading.date else "",
                        reading.source.value,
                    ]
                )


def read_readings(path, books: Interner) -> tuple[ReadingsTable, Interner]:
    """Read readings.csv back against an already-loaded catalog interner."""
    path = Path(path)
    if not path.exists():
        raise IoError(f"readings file not found: {path}")
    users = Interner()
    table = ReadingsTable()
    with path.open("r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["user_id", "book_id", "date", "source"]:
            raise SchemaError(f"{path}: unexpected readings header {header}")
        for cells in reader:
            user_ext, book_ext, date_raw, source_raw = cells
            book = books.get(book_ext)
            if book is None:
                raise InvariantViolation(f"{path}: reading references unknown book {book_ext}")
            table.add(
                Reading(
                    user=users.intern(user_ext),
                    book=book,
                    date=_parse_date(date_raw),
                    source=Source(source_raw),
                )
            )
    return table, users


def write_genre_assignments(
    assignments: dict[int, list[tuple[str, float]]], books: Interner, path
) -> None:
    """Write genres.csv: one (book, genre, probability) row per kept genre."""
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["book_id", "genre", "probability"])
        for book in sorted(assignments):
            for genre, prob in assignments[book]:
                writer.writerow([books.external(book), genre, repr(prob)])
