import datetime

import numpy as np
import pytest

from bookrec.domain import Book, ItemType, Reading, ReadingsTable, Source


def make_book(book_id, title="A Title", authors=("Author",), item_type=ItemType.MONOGRAPH,
              language="it", plot=None, keywords=(), genres=()):
    return Book(
        id=book_id, title=title, authors=authors, item_type=item_type,
        language=language, plot=plot, keywords=keywords, genres=genres,
    )


def make_table(user_books, source=Source.BCT_LOAN, dated=True):
    """Build a ReadingsTable from {user: [book, ...]}; dates increase per user."""
    table = ReadingsTable()
    for user, books in user_books.items():
        for t, book in enumerate(books):
            date = datetime.date(2015, 1, 1) + datetime.timedelta(days=t) if dated else None
            src = source[user] if isinstance(source, dict) else source
            table.add(Reading(user=user, book=book, date=date, source=src))
    return table


def random_instance(rng, n_users, n_books, min_reads=2, max_reads=10):
    """Random readings plus disjoint per-user test sets, for oracle comparisons."""
    table = ReadingsTable()
    tests = {}
    for u in range(n_users):
        n = int(rng.integers(min_reads, max_reads + 1))
        books = rng.choice(n_books, size=min(n, n_books), replace=False)
        cut = max(1, len(books) // 3)
        tests[u] = set(int(b) for b in books[:cut])
        for t, b in enumerate(books[cut:]):
            table.add(Reading(user=u, book=int(b),
                              date=datetime.date(2015, 1, 1) + datetime.timedelta(days=t),
                              source=Source.BCT_LOAN))
    return table, tests


# --- independent metric oracle (set arithmetic only, no shared code) --------


def oracle_kpis(test_sets, rec_lists, k):
    """Brute-force URR/NRR/P/R over users with non-empty test sets."""
    users = [u for u, t in test_sets.items() if t]
    hits = {u: len(set(test_sets[u]) & set(rec_lists[u][:k])) for u in users}
    n = len(users)
    return {
        "urr": sum(1 for u in users if hits[u] > 0) / n,
        "nrr": sum(hits.values()) / n,
        "precision": sum(
            hits[u] / len(rec_lists[u][:k]) if len(rec_lists[u][:k]) else 0.0
            for u in users
        ) / n,
        "recall": sum(hits[u] / len(test_sets[u]) for u in users) / n,
    }


def oracle_first_rank(test_sets, rankings):
    users = [u for u, t in test_sets.items() if t]
    firsts = []
    for u in users:
        positions = [i + 1 for i, b in enumerate(rankings[u]) if b in test_sets[u]]
        firsts.append(min(positions))
    return sum(firsts) / len(firsts)


def oracle_closest(read_books, candidates, vectors):
    """Exhaustive mean-cosine scoring; ranking by (-score, book id)."""

    def cos(a, b):
        na, nb = np.linalg.norm(a), np.linalg.norm(b)
        if na == 0.0 or nb == 0.0:
            return 0.0
        return float(a @ b) / (na * nb)

    scores = {}
    for b in candidates:
        sims = [cos(vectors[b], vectors[i]) for i in read_books]
        scores[b] = sum(sims) / len(sims)
    return sorted(candidates, key=lambda b: (-scores[b], b)), scores


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
