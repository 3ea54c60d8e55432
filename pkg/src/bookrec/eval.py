"""Split protocol, ranking KPIs, grid search, cohort analysis, and timing.

Library (BCT) users give up a per-user test slice (their latest readings in
chronological mode); what remains is split per user into train and
validation.  Social-network (Anobii) users contribute train and validation
only, so evaluation naturally covers the library users the recommendations
target.  All KPIs average over users with a non-empty test set.
"""
from __future__ import annotations

import enum
import logging
import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .bpr import BprConfig, BprRecommender, bpr_fit
from .domain import Reading, ReadingsTable, Source
from .errors import DivergenceError, EvalError, GridError, InvariantViolation, SplitError
from .recsys import Recommender

_log = logging.getLogger(__name__)

#: Read-count cohort bins (inclusive bounds) used for the per-history analysis.
DEFAULT_COHORT_BINS = ((0, 7), (8, 10), (11, 16), (17, 100))


class SplitMode(enum.Enum):
    CHRONOLOGICAL = "chronological"
    RANDOM = "random"


@dataclass
class SplitSpec:
    bct_test_frac: float = 0.2
    val_frac: float = 0.2
    mode: SplitMode = SplitMode.CHRONOLOGICAL
    seed: int = 0

    def __post_init__(self):
        if not (0.0 < self.bct_test_frac < 1.0 and 0.0 < self.val_frac < 1.0):
            raise ValueError("split fractions must lie in (0, 1)")


def _date_key(reading: Reading):
    # undated readings sort earliest, so they never leak into a chronological test slice
    return (reading.date is not None, reading.date or __import__("datetime").date.min, reading.book)


def split(
    readings: ReadingsTable, spec: SplitSpec
) -> tuple[ReadingsTable, ReadingsTable, ReadingsTable]:
    """Partition each user's readings into (train, validation, test).

    BCT users send ``ceil(test_frac * n)`` readings to test (the latest in
    chronological mode, a seeded uniform draw otherwise); the remainder, and
    all readings of Anobii users, split into train and validation with
    ``validation = max(1, floor(val_frac * remaining))``.
    """
    train, validation, test = ReadingsTable(), ReadingsTable(), ReadingsTable()
    for user in readings.users():
        rows = sorted(readings.readings_of(user), key=_date_key)
        n = len(rows)
        if n < 2:
            raise SplitError(f"user {user} has {n} readings; need at least 2 to split")
        if spec.mode is SplitMode.RANDOM:
            rng = np.random.default_rng([spec.seed, user])
            rows = [rows[i] for i in rng.permutation(n)]
        is_bct = readings.user_source(user) is Source.BCT_LOAN
        n_test = math.ceil(spec.bct_test_frac * n) if is_bct else 0
        remaining, test_rows = rows[: n - n_test], rows[n - n_test:]
        n_val = max(1, math.floor(spec.val_frac * len(remaining))) if remaining else 0
        train_rows = remaining[: len(remaining) - n_val]
        val_rows = remaining[len(remaining) - n_val:]
        for r in train_rows:
            train.add(r)
        for r in val_rows:
            validation.add(r)
        for r in test_rows:
            test.add(r)
    return train, validation, test


# --- KPIs -------------------------------------------------------------------


def urr(pairs) -> float:
    """Fraction of users with at least one recommended book in their test set."""
    pairs = list(pairs)
    if not pairs:
        raise EvalError("no evaluable users")
    return sum(1 for t, r in pairs if t.intersection(r)) / len(pairs)


def nrr(pairs) -> float:
    """Mean number of recommended books that are in the test set."""
    pairs = list(pairs)
    if not pairs:
        raise EvalError("no evaluable users")
    return sum(len(t.intersection(r)) for t, r in pairs) / len(pairs)


def precision(pairs) -> float:
    """Mean ratio of recommended books that are in the test set."""
    pairs = list(pairs)
    if not pairs:
        raise EvalError("no evaluable users")
    total = 0.0
    for t, r in pairs:
        if len(r) == 0:
            _log.warning("user with empty recommendation list contributes precision 0")
            continue
        total += len(t.intersection(r)) / len(r)
    return total / len(pairs)


def recall(pairs) -> float:
    """Mean ratio of test books that were recommended."""
    pairs = list(pairs)
    if not pairs:
        raise EvalError("no evaluable users")
    return sum(len(t.intersection(r)) / len(t) for t, r in pairs) / len(pairs)


def first_rank(ranking, test_books) -> int:
    """1-based position of the first test book in the full ranking."""
    positions = {int(b): i for i, b in enumerate(ranking)}
    best = None
    for book in test_books:
        pos = positions.get(int(book))
        if pos is None:
            raise InvariantViolation(
                f"test book {book} missing from ranking; it was read in train (split bug)"
            )
        if best is None or pos < best:
            best = pos
    return best + 1


@dataclass
class EvalReport:
    """KPI values of one recommender at one list length ``k``."""

    k: int
    urr: float
    nrr: float
    precision: float
    recall: float
    fr: float
    per_user: list[tuple[int, int, int]] | None = None  # (user, hits, first_rank)


def evaluate_rankings(rankings: dict[int, tuple], test: ReadingsTable, ks,
                      keep_per_user: bool = False) -> list[EvalReport]:
    """Score full per-user rankings against the test table at each ``k``.

    ``rankings`` maps user to their full unread-book ranking; only users with
    a non-empty test set count.  The first-rank metric is computed once (it
    does not depend on ``k``).
    """
    users = [u for u in test.users() if rankings.get(u) is not None]
    if not users:
        raise EvalError("no users with both a ranking and a non-empty test set")
    test_sets = {u: frozenset(test.books_of(u)) for u in users}
    franks = {u: first_rank(rankings[u], test_sets[u]) for u in users}
    fr = sum(franks.values()) / len(users)
    reports = []
    for k in ks:
        pairs = [(test_sets[u], set(int(b) for b in rankings[u][:k])) for u in users]
        per_user = None
        if keep_per_user:
            per_user = [
                (u, len(t.intersection(r)), franks[u])
                for u, (t, r) in zip(users, pairs)
            ]
        reports.append(
            EvalReport(
                k=k,
                urr=urr(pairs),
                nrr=nrr(pairs),
                precision=precision(pairs),
                recall=recall(pairs),
                fr=fr,
                per_user=per_user,
            )
        )
    return reports


def rank_all(recommender: Recommender, users) -> dict[int, np.ndarray]:
    return {u: recommender.rank(u) for u in users}


def evaluate(recommender: Recommender, test: ReadingsTable, k: int, **kw) -> EvalReport:
    return evaluate_many(recommender, test, [k], **kw)[0]


def evaluate_many(recommender: Recommender, test: ReadingsTable, ks,
                  keep_per_user: bool = False) -> list[EvalReport]:
    """Evaluate one recommender at several list lengths, ranking each user once."""
    rankings = rank_all(recommender, test.users())
    return evaluate_rankings(rankings, test, ks, keep_per_user=keep_per_user)


# --- hyperparameter grid search --------------------------------------------


@dataclass
class GridResult:
    best: BprConfig
    cells: list[tuple[int, float, float | None]] = field(default_factory=list)


def grid_search(
    train: ReadingsTable,
    validation: ReadingsTable,
    latent_dims,
    learning_rates,
    k: int = 20,
    base: BprConfig | None = None,
    n_users: int | None = None,
    n_books: int | None = None,
) -> GridResult:
    """Pick the (latent_dim, learning_rate) cell maximizing validation URR at ``k``.

    Cells are visited in ascending (latent_dim, learning_rate) order and a
    new best must be strictly better, so ties resolve to the smaller
    dimension, then the smaller rate.  Cells whose training diverges are
    recorded with a null score.
    """
    if not latent_dims or not learning_rates:
        raise GridError("empty hyperparameter grid")
    base = base or BprConfig()
    if n_books is None:
        n_books = max(train.books() + validation.books()) + 1
    catalog = range(n_books)
    result = GridResult(best=base)
    best_urr = None
    for dim in sorted(latent_dims):
        for eta in sorted(learning_rates):
            cfg = replace(base, latent_dim=int(dim), learning_rate=float(eta))
            try:
                model = bpr_fit(train, cfg, n_users=n_users, n_books=n_books)
            except DivergenceError:
                _log.warning("grid cell L=%d eta=%g diverged", dim, eta)
                result.cells.append((int(dim), float(eta), None))
                continue
            rec = BprRecommender.from_model(model)
            rec.fit(train, catalog, known=train)
            score = evaluate(rec, validation, k).urr
            result.cells.append((int(dim), float(eta), score))
            if best_urr is None or score > best_urr:
                best_urr = score
                result.best = cfg
    if best_urr is None:
        raise GridError("every grid cell diverged")
    return result


# --- cohort analysis --------------------------------------------------------


def equal_count_bins(counts, n_bins: int = 4) -> list[tuple[int, int]]:
    """Bin bounds (inclusive) that hold approximately equal numbers of users."""
    values = np.sort(np.asarray(list(counts), dtype=np.int64))
    if values.size == 0:
        raise EvalError("no counts to bin")
    edges = [values[min(int(round(q * values.size)), values.size - 1)]
             for q in (0.25, 0.5, 0.75)]
    bounds = []
    low = int(values[0])
    for e in edges:
        e = int(e)
        if e >= low:
            bounds.append((low, e))
            low = e + 1
    bounds.append((low, int(max(values[-1], low))))
    return bounds


def cohort_nrr(
    recommenders: dict[str, Recommender],
    train: ReadingsTable,
    test: ReadingsTable,
    k: int = 20,
    bins=DEFAULT_COHORT_BINS,
) -> list[tuple[int, int, str, float]]:
    """NRR per (train-read-count bin, recommender); empty bins are dropped."""
    users = test.users()
    by_bin: dict[tuple[int, int], list[int]] = {tuple(b): [] for b in bins}
    for u in users:
        n = len(train.books_of(u))
        for low, high in by_bin:
            if low <= n <= high:
                by_bin[(low, high)].append(u)
                break
    recs = {name: rank_all(rec, users) for name, rec in recommenders.items()}
    rows = []
    for (low, high), members in by_bin.items():
        if not members:
            _log.warning("cohort bin [%d, %d] is empty; dropped", low, high)
            continue
        for name in recommenders:
            pairs = [
                (frozenset(test.books_of(u)), set(int(b) for b in recs[name][u][:k]))
                for u in members
            ]
            rows.append((low, high, name, nrr(pairs)))
    return rows


# --- timing -----------------------------------------------------------------


@dataclass
class TimingResult:
    fit_seconds: float | None
    mean_recommend_seconds: float


def timing(
    recommender: Recommender,
    train: ReadingsTable,
    catalog,
    users_sample,
    k: int = 20,
    known: ReadingsTable | None = None,
) -> TimingResult:
    """Wall-clock fit time (None for recommenders without a training phase)
    and mean per-user recommendation latency over ``users_sample``."""
    t0 = time.perf_counter()
    recommender.fit(train, catalog, known=known)
    fit_seconds = time.perf_counter() - t0 if recommender.trains else None
    users = list(users_sample)
    t0 = time.perf_counter()
    for u in users:
        recommender.recommend(u, k)
    mean_rec = (time.perf_counter() - t0) / max(1, len(users))
    return TimingResult(fit_seconds, mean_rec)
