"""Synthetic source-table generator with planted user preferences.

Emits the same CSV tables the real ingest consumes (BCT books/loans, Anobii
items/ratings/genre votes, links), drawn from a known generative model: every
book has one author and one or two genres; every user picks books from a
softmax genre mixture peaked on a preferred genre, optionally mixed with an
author-following component whose strength can grow with the user's reading
count.  The planted mixtures are written alongside the tables so tests can
check recovered structure against ground truth.
"""
from __future__ import annotations

import csv
import datetime
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

START_DATE = datetime.date(2015, 1, 1)


@dataclass
class SynthSpec:
    users: int
    books: int
    genres: int = 10
    authors: int | None = None  # default: two books per author
    sharpness: float = 4.0
    readings_min: int = 20
    readings_max: int = 20
    bct_fraction: float = 0.5
    author_affinity_light: float = 0.0
    author_affinity_heavy: float = 0.0
    secondary_genre_fraction: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if self.users < 1 or self.books < 1 or self.genres < 1:
            raise ValueError("users, books, and genres must be positive")
        if self.readings_min < 2 or self.readings_max < self.readings_min:
            raise ValueError("need readings_max >= readings_min >= 2")
        if self.authors is None:
            self.authors = max(1, self.books // 2)


def _genre_mixture(spec: SynthSpec, preferred: int) -> np.ndarray:
    if math.isinf(spec.sharpness):
        p = np.zeros(spec.genres)
        p[preferred] = 1.0
        return p
    logits = np.zeros(spec.genres)
    logits[preferred] = spec.sharpness
    w = np.exp(logits - logits.max())
    return w / w.sum()


def _pop_random(pool: list[int], chosen: set[int], rng) -> int | None:
    """Draw an unchosen book from ``pool`` (lazy deletion), or None if exhausted."""
    while pool:
        idx = int(rng.integers(len(pool)))
        pool[idx], pool[-1] = pool[-1], pool[idx]
        book = pool.pop()
        if book not in chosen:
            return book
    return None


def generate(spec: SynthSpec, outdir) -> dict[str, Path]:
    """Write the synthetic source tables and ground-truth files into ``outdir``."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(spec.seed)

    author_of = [i % spec.authors for i in range(spec.books)]
    genre_of = [int(g) for g in rng.integers(0, spec.genres, size=spec.books)]
    genre2_of: list[int | None] = []
    for b in range(spec.books):
        if spec.genres > 1 and rng.random() < spec.secondary_genre_fraction:
            g2 = int(rng.integers(0, spec.genres - 1))
            if g2 >= genre_of[b]:
                g2 += 1
            genre2_of.append(g2)
        else:
            genre2_of.append(None)
    genre_books: dict[int, list[int]] = {g: [] for g in range(spec.genres)}
    for b, g in enumerate(genre_of):
        genre_books[g].append(b)
    author_books: dict[int, list[int]] = {a: [] for a in range(spec.authors)}
    for b, a in enumerate(author_of):
        author_books[a].append(b)
    books_per_author = spec.books / spec.authors

    n_bct = math.ceil(spec.bct_fraction * spec.users)
    loans: list[tuple[str, str, str]] = []
    ratings: list[tuple[str, str, int, str]] = []
    truth_users: list[tuple[str, str, float]] = []

    log_span = math.log(spec.readings_max) - math.log(spec.readings_min)
    for u in range(spec.users):
        if spec.readings_max == spec.readings_min:
            n_u = spec.readings_min
            frac = 0.0
        else:
            n_u = int(round(math.exp(rng.uniform(math.log(spec.readings_min),
                                                 math.log(spec.readings_max)))))
            n_u = min(max(n_u, spec.readings_min), spec.readings_max, spec.books)
            frac = (math.log(n_u) - math.log(spec.readings_min)) / log_span
        rho = spec.author_affinity_light + frac * (
            spec.author_affinity_heavy - spec.author_affinity_light
        )
        preferred = int(rng.integers(spec.genres))
        mixture = _genre_mixture(spec, preferred)

        author_pool: list[int] = []
        if rho > 0.0:
            want = min(
                spec.authors,
                max(2, math.ceil(1.3 * rho * n_u / books_per_author)),
            )
            followed = rng.choice(spec.authors, size=want, replace=False)
            for a in sorted(int(x) for x in followed):
                author_pool.extend(author_books[a])
        pools = {g: list(genre_books[g]) for g in range(spec.genres)}
        everything = list(range(spec.books))

        chosen: list[int] = []
        chosen_set: set[int] = set()
        for _ in range(n_u):
            book = None
            if rho > 0.0 and rng.random() < rho:
                book = _pop_random(author_pool, chosen_set, rng)
            if book is None:
                g = int(rng.choice(spec.genres, p=mixture))
                book = _pop_random(pools[g], chosen_set, rng)
            if book is None:
                book = _pop_random(everything, chosen_set, rng)
            if book is None:
                break
            chosen.append(book)
            chosen_set.add(book)

        is_bct = u < n_bct
        ext = f"u{u}" if is_bct else f"au{u}"
        for t, book in enumerate(chosen):
            date = (START_DATE + datetime.timedelta(days=t)).isoformat()
            if is_bct:
                loans.append((ext, f"b{book}", date))
            else:
                ratings.append((ext, f"i{book}", 3 + int(rng.integers(3)), date))
        namespaced = ("bct:" if is_bct else "anobii:") + ext
        for g in range(spec.genres):
            truth_users.append((namespaced, f"Genre{g}", float(mixture[g])))

    paths = {}

    def write(name: str, header: list[str], rows) -> None:
        path = outdir / name
        with path.open("w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            writer.writerows(rows)
        paths[name] = path

    write(
        "bct_books.csv",
        ["book_id", "title", "authors", "item_type", "language"],
        (
            (f"b{b}", f"Book {b}", f"Author{author_of[b]}", "monograph", "it")
            for b in range(spec.books)
        ),
    )
    write("bct_loans.csv", ["user_id", "book_id", "date"], loans)
    write(
        "anobii_items.csv",
        ["item_id", "title", "authors", "language", "plot", "keywords"],
        (
            (
                f"i{b}",
                f"Book {b}",
                f"Author{author_of[b]}",
                "it",
                f"A story about theme{genre_of[b]} variant {b}",
                f"kw{genre_of[b]};tag{b % 7}",
            )
            for b in range(spec.books)
        ),
    )
    votes_rows = []
    for b in range(spec.books):
        votes_rows.append((f"i{b}", f"Genre{genre_of[b]}", 7))
        if genre2_of[b] is not None:
            votes_rows.append((f"i{b}", f"Genre{genre2_of[b]}", 3))
    write("anobii_genre_votes.csv", ["item_id", "genre", "votes"], votes_rows)
    write("anobii_ratings.csv", ["user_id", "item_id", "rating", "date"], ratings)
    write(
        "links.csv",
        ["bct_book_id", "anobii_item_id"],
        ((f"bct:b{b}", f"anobii:i{b}") for b in range(spec.books)),
    )
    write("truth_users.csv", ["user_id", "genre", "probability"],
          ((u, g, repr(p)) for u, g, p in truth_users))
    write(
        "truth_books.csv",
        ["book_id", "author", "genre", "genre2"],
        (
            (
                f"bct:b{b}",
                f"Author{author_of[b]}",
                f"Genre{genre_of[b]}",
                "" if genre2_of[b] is None else f"Genre{genre2_of[b]}",
            )
            for b in range(spec.books)
        ),
    )
    return paths
