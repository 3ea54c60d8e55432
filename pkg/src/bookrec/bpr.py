"""Pairwise-ranking matrix factorization trained with a WARP-weighted SGD.

The model scores user u and book i as the dot product of the user's latent
row and the book's latent column.  Training maximizes, per sampled (read,
unread) pair, ``ln sigmoid(f(u,i) - f(u,j))`` with L2 shrinkage on the
touched factors.  Negatives are drawn by rejection sampling until one
violates the unit margin; the update is weighted by the harmonic rank
transform of the estimated rank ``floor((|unread| - 1) / trials)``, so the
update magnitude shrinks as more draws are needed to find a violator.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numba import njit

from .domain import ReadingsTable
from .errors import DivergenceError, FormatError, IoError
from .recsys import Recommender

_log = logging.getLogger(__name__)


@dataclass
class BprConfig:
    latent_dim: int = 20
    learning_rate: float = 0.2
    reg_user: float = 1e-5
    reg_item: float = 1e-5
    epochs: int = 30
    warp_max_trials: int = 100
    seed: int = 0
    early_stop: bool = False
    patience: int = 3
    early_stop_k: int = 20

    def __post_init__(self):
        if self.latent_dim < 1:
            raise ValueError("latent_dim must be positive")
        if self.epochs < 0 or self.warp_max_trials < 1:
            raise ValueError("bad epochs / warp_max_trials")


@dataclass
class LatentModel:
    """User factors V (U x L) and item factors P (L x B)."""

    V: np.ndarray
    P: np.ndarray
    config: BprConfig = field(default_factory=BprConfig)

    @property
    def n_users(self) -> int:
        return self.V.shape[0]

    @property
    def n_books(self) -> int:
        return self.P.shape[1]

    @property
    def latent_dim(self) -> int:
        return self.V.shape[1]

    def score(self, user: int, book: int) -> float:
        return float(self.V[user] @ self.P[:, book])

    def scores(self, user: int) -> np.ndarray:
        return self.V[user] @ self.P


def sigmoid(x):
    return 1.0 / (1.0 + np.exp(-np.asarray(x, dtype=np.float64)))


def preference_probability(model: LatentModel, user: int, read: int, unread: int) -> float:
    """Model probability that ``user`` prefers ``read`` over ``unread``."""
    return float(sigmoid(model.score(user, read) - model.score(user, unread)))


def log_sigmoid(x: float) -> float:
    # stable ln(sigmoid(x)) for both signs
    if x >= 0:
        return -math.log1p(math.exp(-x))
    return x - math.log1p(math.exp(x))


def pairwise_objective(v_u, p_i, p_j, lam: float) -> float:
    """``ln sigmoid(v_u . (p_i - p_j)) - lam (|v_u|^2 + |p_i|^2 + |p_j|^2)``."""
    v_u, p_i, p_j = (np.asarray(a, dtype=np.float64) for a in (v_u, p_i, p_j))
    x = float(v_u @ (p_i - p_j))
    reg = float(v_u @ v_u + p_i @ p_i + p_j @ p_j)
    return log_sigmoid(x) - lam * reg


def pairwise_gradient(v_u, p_i, p_j, lam: float):
    """Analytic gradient of :func:`pairwise_objective` w.r.t. its three vectors."""
    v_u, p_i, p_j = (np.asarray(a, dtype=np.float64) for a in (v_u, p_i, p_j))
    x = float(v_u @ (p_i - p_j))
    s = 1.0 / (1.0 + math.exp(x))  # sigmoid(-x)
    g_v = s * (p_i - p_j) - 2.0 * lam * v_u
    g_i = s * v_u - 2.0 * lam * p_i
    g_j = -s * v_u - 2.0 * lam * p_j
    return g_v, g_i, g_j


def warp_weight(n_unread: int, trials: int) -> float:
    """Harmonic rank-transform weight for a violator found after ``trials`` draws."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    rank = (n_unread - 1) // trials
    return sum(1.0 / m for m in range(1, rank + 1))


@njit(cache=True)
def _in_sorted(arr, lo, hi, value):
    while lo < hi:
        mid = (lo + hi) // 2
        if arr[mid] == value:
            return True
        if arr[mid] < value:
            lo = mid + 1
        else:
            hi = mid
    return False


@njit(cache=True)
def _warp_epoch(V, P, pos_u, pos_i, indptr, indices, eta, lam_v, lam_p,
                max_trials, harmonic, seed):
    """One SGD pass over the shuffled positives; updates V and P in place."""
    np.random.seed(seed)
    n_factors = V.shape[1]
    n_books = P.shape[1]
    updates = 0
    for s in range(pos_u.shape[0]):
        u = pos_u[s]
        i = pos_i[s]
        lo = indptr[u]
        hi = indptr[u + 1]
        n_unread = n_books - (hi - lo)
        if n_unread < 1:
            continue
        f_ui = 0.0
        for l in range(n_factors):
            f_ui += V[u, l] * P[l, i]
        trials = 0
        rejects = 0
        j = -1
        f_uj = 0.0
        while trials < max_trials:
            cand = np.random.randint(0, n_books)
            if _in_sorted(indices, lo, hi, cand):
                rejects += 1
                if rejects > 100 * n_books:
                    break
                continue
            trials += 1
            f = 0.0
            for l in range(n_factors):
                f += V[u, l] * P[l, cand]
            if f > f_ui - 1.0:
                j = cand
                f_uj = f
                break
        if j < 0:
            continue
        rank = (n_unread - 1) // trials
        w = harmonic[rank]
        if w <= 0.0:
            continue
        sig = 1.0 / (1.0 + np.exp(f_ui - f_uj))  # sigmoid(-x)
        coef = eta * w * sig
        for l in range(n_factors):
            vu = V[u, l]
            pi = P[l, i]
            pj = P[l, j]
            V[u, l] = vu + coef * (pi - pj) - eta * lam_v * vu
            P[l, i] = pi + coef * vu - eta * lam_p * pi
            P[l, j] = pj - coef * vu - eta * lam_p * pj
        updates += 1
    return updates


def _read_csr(train: ReadingsTable, n_users: int):
    indptr = np.zeros(n_users + 1, dtype=np.int64)
    cols: list[np.ndarray] = []
    for u in range(n_users):
        books = np.asarray(train.books_of(u), dtype=np.int64)
        indptr[u + 1] = indptr[u] + books.size
        cols.append(books)
    indices = np.concatenate(cols) if cols else np.zeros(0, dtype=np.int64)
    return indptr, indices


def _validation_urr(V, P, indptr, indices, val_sets: dict[int, set[int]], k: int) -> float:
    hits = 0
    for u, targets in val_sets.items():
        scores = V[u] @ P
        scores[indices[indptr[u]:indptr[u + 1]]] = -np.inf
        top = np.argpartition(-scores, min(k, scores.size - 1))[:k]
        if targets.intersection(int(b) for b in top):
            hits += 1
    return hits / len(val_sets)


def bpr_fit(
    train: ReadingsTable,
    config: BprConfig,
    n_users: int | None = None,
    n_books: int | None = None,
    validation: ReadingsTable | None = None,
) -> LatentModel:
    """Train latent factors on the training readings.

    Factors start from a seeded Gaussian with standard deviation 0.01.  Users
    who have read the whole catalog are skipped with a warning.  When
    ``early_stop`` is enabled and a validation table is given, training stops
    after ``patience`` epochs without improvement of the validation hit rate
    at ``early_stop_k`` and the best factors are restored.
    """
    users = train.users()
    if n_users is None:
        n_users = (max(users) + 1) if users else 0
    if n_books is None:
        n_books = (max(train.books()) + 1) if len(train) else 0
    rng = np.random.default_rng(config.seed)
    V = rng.normal(0.0, 0.01, size=(n_users, config.latent_dim))
    P = rng.normal(0.0, 0.01, size=(config.latent_dim, n_books))

    indptr, indices = _read_csr(train, n_users)
    pos_u_list: list[int] = []
    pos_i_list: list[int] = []
    degenerate = 0
    for u in users:
        books = train.books_of(u)
        if len(books) >= n_books:
            degenerate += 1
            continue
        pos_u_list.extend([u] * len(books))
        pos_i_list.extend(books)
    if degenerate:
        _log.warning("%d users have no unread books; skipped in training", degenerate)
    pos_u = np.asarray(pos_u_list, dtype=np.int64)
    pos_i = np.asarray(pos_i_list, dtype=np.int64)
    harmonic = np.concatenate(
        [[0.0], np.cumsum(1.0 / np.arange(1, max(n_books, 1) + 1))]
    )

    val_sets: dict[int, set[int]] = {}
    if validation is not None and config.early_stop:
        val_sets = {u: set(validation.books_of(u)) for u in validation.users() if u < n_users}

    best = (-1.0, -1, None)  # (urr, epoch, (V, P))
    for epoch in range(config.epochs):
        perm = rng.permutation(pos_u.size)
        epoch_seed = int(rng.integers(0, 2**31 - 1))
        _warp_epoch(
            V, P, pos_u[perm], pos_i[perm], indptr, indices,
            config.learning_rate, config.reg_user, config.reg_item,
            config.warp_max_trials, harmonic, epoch_seed,
        )
        finite = np.isfinite(V).all() and np.isfinite(P).all()
        # magnitudes this far beyond the O(1) working range overflow the
        # score dot products later even though each factor is still finite
        if not finite or max(np.abs(V).max(initial=0.0), np.abs(P).max(initial=0.0)) > 1e50:
            raise DivergenceError(f"factors diverged after epoch {epoch}", epoch=epoch)
        if val_sets:
            urr = _validation_urr(V, P, indptr, indices, val_sets, config.early_stop_k)
            _log.debug("epoch %d: validation URR@%d = %.4f", epoch, config.early_stop_k, urr)
            if urr > best[0]:
                best = (urr, epoch, (V.copy(), P.copy()))
            elif epoch - best[1] >= config.patience:
                _log.info("early stop at epoch %d (best %.4f at %d)", epoch, best[0], best[1])
                V, P = best[2]
                break
    else:
        if val_sets and best[2] is not None and best[0] > -1.0:
            V, P = best[2]
    return LatentModel(V=V, P=P, config=config)


class BprRecommender(Recommender):
    """Collaborative-filtering recommender backed by the latent-factor model."""

    name = "bpr"
    trains = True

    def __init__(self, config: BprConfig | None = None,
                 n_users: int | None = None, n_books: int | None = None,
                 validation: ReadingsTable | None = None):
        super().__init__()
        self.config = config or BprConfig()
        self.model: LatentModel | None = None
        self._n_users = n_users
        self._n_books = n_books
        self._validation = validation

    @classmethod
    def from_model(cls, model: LatentModel) -> "BprRecommender":
        rec = cls(config=model.config)
        rec.model = model
        return rec

    def _fit(self, train: ReadingsTable):
        n_books = self._n_books if self._n_books is not None else len(self._catalog)
        if self.model is None:
            self.model = bpr_fit(
                train, self.config, n_users=self._n_users, n_books=n_books,
                validation=self._validation,
            )

    def rank(self, user: int) -> np.ndarray:
        unread = self.unread_books(user)
        scores = self.model.scores(user)
        return self._rank_by_score(unread, scores[unread])


# --- checkpoint serialization ----------------------------------------------

def save_model(model: LatentModel, path) -> None:
    """Write a ``#bprv1`` checkpoint: V rows, then P columns, tab-separated."""
    with Path(path).open("w", encoding="utf-8") as fh:
        fh.write(
            f"#bprv1 U={model.n_users} B={model.n_books} "
            f"L={model.latent_dim} seed={model.config.seed}\n"
        )
        for u in range(model.n_users):
            fh.write("\t".join(f"{x:.8g}" for x in model.V[u]) + "\n")
        for b in range(model.n_books):
            fh.write("\t".join(f"{x:.8g}" for x in model.P[:, b]) + "\n")


def load_model(path, config: BprConfig | None = None) -> LatentModel:
    path = Path(path)
    if not path.exists():
        raise IoError(f"model checkpoint not found: {path}")
    with path.open("r", encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n")
        parts = header.split()
        if len(parts) != 5 or parts[0] != "#bprv1":
            raise FormatError(f"{path}: bad checkpoint header {header!r}")
        try:
            fields = dict(p.split("=", 1) for p in parts[1:])
            n_users, n_books, dim = int(fields["U"]), int(fields["B"]), int(fields["L"])
            seed = int(fields["seed"])
        except (ValueError, KeyError):
            raise FormatError(f"{path}: unparseable checkpoint header {header!r}") from None
        V = np.zeros((n_users, dim))
        P = np.zeros((dim, n_books))
        for u in range(n_users):
            line = fh.readline()
            if not line:
                raise FormatError(f"{path}: truncated at user row {u}")
            row = np.array([float(x) for x in line.split("\t")])
            if row.size != dim:
                raise FormatError(f"{path}: user row {u} has {row.size} factors, want {dim}")
            V[u] = row
        for b in range(n_books):
            line = fh.readline()
            if not line:
                raise FormatError(f"{path}: truncated at book column {b}")
            col = np.array([float(x) for x in line.split("\t")])
            if col.size != dim:
                raise FormatError(f"{path}: book column {b} has {col.size} factors, want {dim}")
            P[:, b] = col
    if not (np.isfinite(V).all() and np.isfinite(P).all()):
        raise FormatError(f"{path}: non-finite factors")
    cfg = config or BprConfig(latent_dim=dim, seed=seed)
    return LatentModel(V=V, P=P, config=cfg)
