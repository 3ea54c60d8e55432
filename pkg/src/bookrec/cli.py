"""Command-line pipeline: ingest -> characterize -> train -> evaluate -> report.

Every subcommand is a pure function of (config file, input files, seed): CSV
outputs are written to temp files and atomically renamed, floats are rendered
with ``repr``, and all iteration orders are fixed, so re-runs are
byte-identical.  Timing measurements are the one exception and are only
written when explicitly requested.
"""
from __future__ import annotations

import argparse
import csv
import logging
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from . import bpr as bprmod
from . import eval as evalmod
from . import genres as genresmod
from . import ingest as ingestmod
from . import synth as synthmod
from .domain import Interner, ItemType, ReadingsTable, Source
from .embed import (
    EmbeddingStore,
    Field,
    field_set_name,
    hash_embed,
    load_embeddings,
    metadata_summary,
)
from .errors import BookrecError, EmptySummary, IoError
from .recsys import ClosestItems, MostReadItems, RandomItems, Recommender

_log = logging.getLogger(__name__)

DEFAULT_RECOMMENDERS = ("random", "most_read", "closest", "bpr")
DEFAULT_FIELDS = frozenset({Field.AUTHORS, Field.GENRES})
DEFAULT_FALLBACK_DIM = 64
EVAL_HEADER = ["recommender", "k", "urr", "nrr", "precision", "recall", "fr"]


# --- configuration ----------------------------------------------------------


@dataclass
class RunConfig:
    """Everything a pipeline run needs, loaded from a YAML file.

    See the repository README for the documented schema; paths in the file
    are resolved relative to the file's own directory.
    """

    seed: int = 0
    outdir: Path = Path("out")
    data: dict[str, Path] = field(default_factory=dict)
    merge: ingestmod.MergePolicy = field(default_factory=ingestmod.MergePolicy)
    genre_config: genresmod.GenreConfig = field(default_factory=genresmod.GenreConfig)
    split: evalmod.SplitSpec = field(default_factory=evalmod.SplitSpec)
    recommenders: tuple[str, ...] = DEFAULT_RECOMMENDERS
    bpr: bprmod.BprConfig = field(default_factory=bprmod.BprConfig)
    ks: tuple[int, ...] = (20,)
    sweep_ks: tuple[int, ...] = tuple(range(1, 51))
    embeddings: Path | None = None
    fallback_dim: int = DEFAULT_FALLBACK_DIM
    fields: frozenset[Field] = DEFAULT_FIELDS
    ablation_sets: tuple[frozenset[Field], ...] = (
        frozenset({Field.TITLE}),
        frozenset({Field.AUTHORS}),
        frozenset({Field.AUTHORS, Field.GENRES}),
    )
    ablation_files: dict[str, Path] = field(default_factory=dict)
    grid_dims: tuple[int, ...] = (10, 20)
    grid_rates: tuple[float, ...] = (0.1, 0.2)
    grid_k: int = 20
    timing_sample: int = 200

    def __post_init__(self):
        if any(k < 1 for k in self.ks) or any(k < 1 for k in self.sweep_ks):
            raise ValueError("k values must be >= 1")


def _parse_ks(raw: str) -> tuple[int, ...]:
    return tuple(int(part) for part in raw.split(",") if part.strip())


def load_config(path, *, seed: int | None = None, ks: tuple[int, ...] | None = None,
                embeddings: str | None = None, fallback_dim: int | None = None) -> RunConfig:
    """Load a YAML run configuration, applying command-line overrides."""
    path = Path(path)
    if not path.exists():
        raise IoError(f"config file not found: {path}")
    with path.open("r", encoding="utf-8") as fh:
        raw = yaml.safe_load(fh) or {}
    if not isinstance(raw, dict):
        raise ValueError(f"{path}: config root must be a mapping")
    base = path.parent

    def respath(p) -> Path:
        p = Path(p)
        return p if p.is_absolute() else base / p

    known_keys = {
        "seed", "outdir", "data", "merge", "genres", "split", "recommenders",
        "bpr", "k", "sweep_k", "embeddings", "fallback_embed", "fields",
        "ablation", "grid", "timing_sample",
    }
    for key in raw:
        if key not in known_keys:
            _log.warning("%s: unknown config key %r ignored", path, key)

    run_seed = seed if seed is not None else int(raw.get("seed", 0))

    merge_raw = dict(raw.get("merge") or {})
    if "item_types" in merge_raw:
        merge_raw["item_types"] = frozenset(
            ItemType(v) for v in merge_raw["item_types"]
        )
    if "languages" in merge_raw:
        merge_raw["languages"] = frozenset(merge_raw["languages"])
    merge = ingestmod.MergePolicy(**merge_raw)

    genres_raw = dict(raw.get("genres") or {})
    genre_config = genresmod.GenreConfig(
        drop_list=frozenset(genres_raw.get("drop", genresmod.DEFAULT_DROP_LIST)),
        merge_map=tuple(
            (str(a), str(b)) for a, b in (genres_raw.get("merge") or [])
        ),
        entropy_rule=genres_raw.get("entropy_rule", "decrease"),
    )

    split_raw = dict(raw.get("split") or {})
    split = evalmod.SplitSpec(
        bct_test_frac=float(split_raw.get("test_fraction", 0.2)),
        val_frac=float(split_raw.get("validation_fraction", 0.2)),
        mode=evalmod.SplitMode(split_raw.get("mode", "chronological")),
        seed=run_seed,
    )

    bpr_raw = dict(raw.get("bpr") or {})
    bpr_raw.setdefault("seed", run_seed)
    if seed is not None:
        bpr_raw["seed"] = run_seed
    bpr_config = bprmod.BprConfig(**bpr_raw)

    field_list = raw.get("fields")
    fields = (
        frozenset(Field(f) for f in field_list) if field_list else DEFAULT_FIELDS
    )

    ablation_raw = dict(raw.get("ablation") or {})
    if "field_sets" in ablation_raw:
        ablation_sets = tuple(
            frozenset(Field(f) for f in fs) for fs in ablation_raw["field_sets"]
        )
    else:
        ablation_sets = RunConfig.ablation_sets
    ablation_files = {
        str(name): respath(p)
        for name, p in (ablation_raw.get("embeddings") or {}).items()
    }

    grid_raw = dict(raw.get("grid") or {})

    emb = embeddings if embeddings is not None else raw.get("embeddings")
    cfg = RunConfig(
        seed=run_seed,
        outdir=respath(raw.get("outdir", "out")),
        data={k: respath(v) for k, v in (raw.get("data") or {}).items()},
        merge=merge,
        genre_config=genre_config,
        split=split,
        recommenders=tuple(raw.get("recommenders", DEFAULT_RECOMMENDERS)),
        bpr=bpr_config,
        ks=tuple(int(k) for k in (ks if ks is not None else raw.get("k", [20]))),
        sweep_ks=tuple(int(k) for k in raw["sweep_k"]) if "sweep_k" in raw
        else RunConfig.sweep_ks,
        embeddings=respath(emb) if emb else None,
        fallback_dim=(
            fallback_dim if fallback_dim is not None
            else int(raw.get("fallback_embed", DEFAULT_FALLBACK_DIM))
        ),
        fields=fields,
        ablation_sets=ablation_sets,
        ablation_files=ablation_files,
        grid_dims=tuple(int(d) for d in grid_raw.get("latent_dims", (10, 20))),
        grid_rates=tuple(float(r) for r in grid_raw.get("learning_rates", (0.1, 0.2))),
        grid_k=int(grid_raw.get("k", 20)),
        timing_sample=int(raw.get("timing_sample", 200)),
    )
    return cfg


# --- output staging ---------------------------------------------------------


class Staging:
    """Collects CSV writes in temp files; a final commit renames them in place."""

    def __init__(self, outdir: Path):
        self.outdir = Path(outdir)
        self._pending: list[tuple[Path, Path]] = []

    def path(self, name: str) -> Path:
        self.outdir.mkdir(parents=True, exist_ok=True)
        tmp = self.outdir / (name + ".tmp")
        self._pending.append((tmp, self.outdir / name))
        return tmp

    def write_csv(self, name: str, header: list[str], rows) -> None:
        with self.path(name).open("w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            writer.writerows(rows)

    def commit(self) -> list[Path]:
        finals = []
        for tmp, final in self._pending:
            os.replace(tmp, final)
            finals.append(final)
        self._pending.clear()
        return finals


def _fmt(x) -> str:
    return repr(float(x)) if isinstance(x, float) else str(x)


# --- shared pipeline pieces -------------------------------------------------


def _load_dataset(cfg: RunConfig) -> ingestmod.Dataset:
    catalog, books = ingestmod.read_catalog(cfg.outdir / "catalog.csv")
    readings, users = ingestmod.read_readings(cfg.outdir / "readings.csv", books)
    return ingestmod.Dataset(catalog, readings, books, users)


def _merge_tables(a: ReadingsTable, b: ReadingsTable) -> ReadingsTable:
    merged = ReadingsTable()
    for table in (a, b):
        for reading in table:
            merged.add(reading)
    return merged


def _build_store(cfg: RunConfig, dataset: ingestmod.Dataset,
                 fields: frozenset[Field] | None = None) -> EmbeddingStore:
    """Embeddings from the configured EMBV1 file, else a seeded hash fallback."""
    if fields is None and cfg.embeddings is not None:
        store, skipped = load_embeddings(cfg.embeddings, dataset.books)
        if skipped:
            _log.warning("%s: %d rows for unknown books skipped",
                         cfg.embeddings, len(skipped))
        return store
    return _fallback_store(dataset, fields or cfg.fields, cfg.fallback_dim, cfg.seed)


def _fallback_store(dataset: ingestmod.Dataset, fields: frozenset[Field],
                    dim: int, seed: int) -> EmbeddingStore:
    store = EmbeddingStore(dim)
    empty = 0
    for book in dataset.catalog:
        try:
            vec = hash_embed(metadata_summary(book, fields), dim, seed)
        except EmptySummary:
            empty += 1
            vec = np.zeros(dim)
        store.put(book.id, vec)
    if empty:
        _log.warning("%d books have no text in fields %s; zero vectors used",
                     empty, field_set_name(fields))
    return store


def _train_table(train: ReadingsTable, bct_only: bool) -> ReadingsTable:
    if not bct_only:
        return train
    used = train.filtered(lambda r: r.source is Source.BCT_LOAN)
    print(f"training readings: {len(used)} of {len(train)} (bct sources only)")
    return used


def _build_recommender(name: str, cfg: RunConfig, dataset: ingestmod.Dataset,
                       validation: ReadingsTable | None = None,
                       store: EmbeddingStore | None = None) -> Recommender:
    if name == "random":
        return RandomItems(seed=cfg.seed)
    if name == "most_read":
        return MostReadItems()
    if name == "closest":
        return ClosestItems(store if store is not None else _build_store(cfg, dataset))
    if name == "bpr":
        return bprmod.BprRecommender(
            cfg.bpr, n_users=len(dataset.users), n_books=len(dataset.books),
            validation=validation,
        )
    raise ValueError(f"unknown recommender {name!r}")


def _fit_all(names, cfg: RunConfig, dataset: ingestmod.Dataset,
             train: ReadingsTable, known: ReadingsTable,
             validation: ReadingsTable | None = None) -> dict[str, Recommender]:
    catalog_ids = np.arange(len(dataset.books))
    store = _build_store(cfg, dataset) if "closest" in names else None
    fitted = {}
    for name in names:
        rec = _build_recommender(name, cfg, dataset, validation, store)
        rec.fit(train, catalog_ids, known=known)
        fitted[name] = rec
    return fitted


def _report_rows(results: dict[str, list[evalmod.EvalReport]]):
    for name, reports in results.items():
        for rep in reports:
            yield (name, rep.k, _fmt(rep.urr), _fmt(rep.nrr),
                   _fmt(rep.precision), _fmt(rep.recall), _fmt(rep.fr))


# --- subcommands ------------------------------------------------------------


def cmd_ingest(cfg: RunConfig) -> int:
    required = ("bct_books", "bct_loans", "anobii_items",
                "anobii_ratings", "anobii_genre_votes")
    missing = [k for k in required if k not in cfg.data]
    if missing:
        raise IoError(f"config data section is missing paths for: {missing}")

    tables = {
        key: ingestmod.parse_table(cfg.data[key], schema)
        for key, schema in (
            ("bct_books", ingestmod.Schema.BCT_BOOKS),
            ("bct_loans", ingestmod.Schema.BCT_LOANS),
            ("anobii_items", ingestmod.Schema.ANOBII_ITEMS),
            ("anobii_ratings", ingestmod.Schema.ANOBII_RATINGS),
            ("anobii_genre_votes", ingestmod.Schema.ANOBII_GENRE_VOTES),
        )
    }
    link_rows = None
    if "links" in cfg.data:
        link_rows = ingestmod.parse_table(cfg.data["links"], ingestmod.Schema.LINKS).rows

    staging = Interner()
    bct_all = ingestmod.books_from_bct(tables["bct_books"].rows, staging)
    anobii_all = ingestmod.books_from_anobii(tables["anobii_items"].rows, staging)
    bct = ingestmod.filter_catalog(bct_all, cfg.merge)
    anobii = ingestmod.filter_catalog(anobii_all, cfg.merge)
    print(f"bct books: {len(bct_all)} staged, {len(bct)} admitted")
    print(f"anobii items: {len(anobii_all)} staged, {len(anobii)} admitted")

    match = ingestmod.match_books(bct, anobii, link_rows, staging)
    print(f"matched books: {len(match.mapping)} "
          f"(links {match.from_links}, keys {match.from_keys}, "
          f"ambiguous {len(match.ambiguous)})")

    dataset, summary = ingestmod.build_readings(
        tables["bct_loans"].rows, tables["anobii_ratings"].rows, match.mapping,
        cfg.merge, bct, anobii, staging,
    )
    print(f"loans on matched books: {summary.loans_on_matched}")
    print(f"ratings on matched books: {summary.ratings_on_matched} "
          f"(below min rating: {summary.ratings_below_min})")
    print(f"candidate readings: {summary.candidate_readings}")
    print(f"books: {summary.books_before_threshold} -> {summary.final_books} "
          f"(dropped {summary.books_dropped})")
    print(f"users: {summary.users_before_threshold} -> {summary.final_users} "
          f"(dropped {summary.users_dropped})")
    print(f"final readings: {summary.final_readings}")
    if summary.final_readings == 0:
        print("error: no readings survived matching and filtering", file=sys.stderr)
        return 1

    # genre votes arrive keyed by Anobii item; rekey them to final book ids
    inverse = {a: b for b, a in match.mapping.items()}
    votes: dict[tuple[int, str], int] = {}
    for row in tables["anobii_genre_votes"].rows:
        staged_item = staging.get("anobii:" + row["item_id"])
        bct_staged = inverse.get(staged_item) if staged_item is not None else None
        if bct_staged is None:
            continue
        final = dataset.books.get(staging.external(bct_staged))
        if final is None:
            continue
        key = (final, row["genre"])
        votes[key] = votes.get(key, 0) + row["votes"]

    assignments: dict[int, list[tuple[str, float]]] = {}
    if votes:
        matrix = genresmod.GenreVoteMatrix(votes)
        matrix = genresmod.prune_genres(matrix, cfg.genre_config)
        matrix = genresmod.aggregate_genres(matrix, cfg.genre_config)
        assignments = genresmod.assign_top4(matrix)
        ingestmod.attach_genres(dataset, assignments)
    print(f"books with genres: {len(assignments)}")

    staging_out = Staging(cfg.outdir)
    ingestmod.write_catalog(dataset, staging_out.path("catalog.csv"))
    ingestmod.write_readings(dataset, staging_out.path("readings.csv"))
    ingestmod.write_genre_assignments(
        assignments, dataset.books, staging_out.path("genres.csv")
    )
    for path in staging_out.commit():
        print(f"wrote {path}")
    return 0


def _cdf_rows(counts: list[int]):
    total = len(counts)
    seen = 0
    for value in sorted(set(counts)):
        seen += sum(1 for c in counts if c == value)
        yield (value, _fmt(seen / total))


def cmd_characterize(cfg: RunConfig) -> int:
    dataset = _load_dataset(cfg)
    readings = dataset.readings
    user_counts = [len(readings.books_of(u)) for u in readings.users()]
    book_counts = [readings.reader_count(b) for b in readings.books()]
    staging = Staging(cfg.outdir)
    staging.write_csv("cdf_users.csv", ["value", "cum_fraction"], _cdf_rows(user_counts))
    staging.write_csv("cdf_books.csv", ["value", "cum_fraction"], _cdf_rows(book_counts))
    dist = genresmod.genre_distribution(readings, dataset.catalog_by_id())
    staging.write_csv("genre_dist.csv", ["genre", "share"],
                      ((g, _fmt(s)) for g, s in dist))
    for path in staging.commit():
        print(f"wrote {path}")
    return 0


def cmd_train(cfg: RunConfig, bct_only: bool = False) -> int:
    dataset = _load_dataset(cfg)
    train, validation, _ = evalmod.split(dataset.readings, cfg.split)
    used = _train_table(train, bct_only)
    print(f"training on {len(used)} readings from {len(used.users())} users")
    model = bprmod.bpr_fit(
        used, cfg.bpr, n_users=len(dataset.users), n_books=len(dataset.books),
        validation=validation,
    )
    staging = Staging(cfg.outdir)
    bprmod.save_model(model, staging.path("bpr_model.txt"))
    for path in staging.commit():
        print(f"wrote {path}")
    return 0


def _evaluate_run(cfg: RunConfig, ks, bct_only: bool):
    dataset = _load_dataset(cfg)
    train, validation, test = evalmod.split(dataset.readings, cfg.split)
    known = _merge_tables(train, validation)
    used = _train_table(train, bct_only)
    fitted = _fit_all(cfg.recommenders, cfg, dataset, used, known, validation)
    results = {
        name: evalmod.evaluate_many(rec, test, ks) for name, rec in fitted.items()
    }
    return dataset, train, test, fitted, results


def cmd_evaluate(cfg: RunConfig, ks=None, bct_only: bool = False,
                 with_timing: bool = False) -> int:
    ks = tuple(ks) if ks else cfg.ks
    dataset, train, test, fitted, results = _evaluate_run(cfg, ks, bct_only)
    staging = Staging(cfg.outdir)
    staging.write_csv("eval_report.csv", EVAL_HEADER, _report_rows(results))

    cohort_k = 20 if 20 in ks else ks[0]
    rows = evalmod.cohort_nrr(fitted, train, test, k=cohort_k)
    staging.write_csv(
        "cohorts.csv", ["bin_low", "bin_high", "recommender", "nrr"],
        ((low, high, name, _fmt(v)) for low, high, name, v in rows),
    )

    if with_timing:
        sample = test.users()[: cfg.timing_sample]
        catalog_ids = np.arange(len(dataset.books))
        timing_rows = []
        for name in fitted:
            fresh = _build_recommender(name, cfg, dataset, store=None)
            t = evalmod.timing(fresh, train, catalog_ids, sample, k=cohort_k)
            timing_rows.append(
                (name,
                 "" if t.fit_seconds is None else _fmt(t.fit_seconds),
                 _fmt(t.mean_recommend_seconds))
            )
        staging.write_csv("timing.csv", ["recommender", "fit_s", "recommend_s"],
                          timing_rows)

    for name, reports in results.items():
        for rep in reports:
            print(f"{name:<10} k={rep.k:<3} urr={rep.urr:.4f} nrr={rep.nrr:.4f} "
                  f"p={rep.precision:.4f} r={rep.recall:.4f} fr={rep.fr:.2f}")
    for path in staging.commit():
        print(f"wrote {path}")
    return 0


def cmd_sweep(cfg: RunConfig, ks=None, bct_only: bool = False) -> int:
    ks = tuple(ks) if ks else cfg.sweep_ks
    _, _, _, _, results = _evaluate_run(cfg, ks, bct_only)
    staging = Staging(cfg.outdir)
    staging.write_csv("sweep.csv", EVAL_HEADER, _report_rows(results))
    for path in staging.commit():
        print(f"wrote {path}")
    return 0


def cmd_grid(cfg: RunConfig, bct_only: bool = False) -> int:
    dataset = _load_dataset(cfg)
    train, validation, _ = evalmod.split(dataset.readings, cfg.split)
    used = _train_table(train, bct_only)
    result = evalmod.grid_search(
        used, validation, cfg.grid_dims, cfg.grid_rates, k=cfg.grid_k,
        base=cfg.bpr, n_users=len(dataset.users), n_books=len(dataset.books),
    )
    staging = Staging(cfg.outdir)
    staging.write_csv(
        "grid.csv", ["latent_dim", "learning_rate", "urr", "best"],
        (
            (dim, _fmt(rate), "" if urr is None else _fmt(urr),
             int(dim == result.best.latent_dim and rate == result.best.learning_rate))
            for dim, rate, urr in result.cells
        ),
    )
    print(f"best: latent_dim={result.best.latent_dim} "
          f"learning_rate={result.best.learning_rate}")
    for path in staging.commit():
        print(f"wrote {path}")
    return 0


def cmd_ablation(cfg: RunConfig, bct_only: bool = False) -> int:
    dataset = _load_dataset(cfg)
    train, validation, test = evalmod.split(dataset.readings, cfg.split)
    known = _merge_tables(train, validation)
    used = _train_table(train, bct_only)
    catalog_ids = np.arange(len(dataset.books))

    seen: set[str] = set()
    rows = []
    for fields in cfg.ablation_sets:
        name = field_set_name(fields)
        if name in seen:
            _log.warning("duplicate ablation field set %s skipped", name)
            continue
        seen.add(name)
        if name in cfg.ablation_files:
            path = cfg.ablation_files[name]
            if not path.exists():
                _log.warning("embedding file for %s not found (%s); skipped",
                             name, path)
                continue
            store, _ = load_embeddings(path, dataset.books)
        else:
            store = _fallback_store(dataset, fields, cfg.fallback_dim, cfg.seed)
        rec = ClosestItems(store).fit(used, catalog_ids, known=known)
        rep = evalmod.evaluate(rec, test, 20)
        rows.append((name, rep.k, _fmt(rep.urr), _fmt(rep.nrr),
                     _fmt(rep.precision), _fmt(rep.recall), _fmt(rep.fr)))
        print(f"{name:<30} urr={rep.urr:.4f} nrr={rep.nrr:.4f} fr={rep.fr:.2f}")

    staging = Staging(cfg.outdir)
    staging.write_csv("ablation.csv", ["fields"] + EVAL_HEADER[1:], rows)
    for path in staging.commit():
        print(f"wrote {path}")
    return 0


def cmd_synth(args) -> int:
    spec = synthmod.SynthSpec(
        users=args.users,
        books=args.books,
        genres=args.genres,
        authors=args.authors,
        sharpness=args.sharpness,
        readings_min=args.readings_min,
        readings_max=args.readings_max or args.readings_min,
        bct_fraction=args.bct_fraction,
        author_affinity_light=args.author_affinity_light,
        author_affinity_heavy=(
            args.author_affinity_heavy
            if args.author_affinity_heavy is not None
            else args.author_affinity_light
        ),
        seed=args.seed if args.seed is not None else 0,
    )
    paths = synthmod.generate(spec, args.out)
    for name in sorted(paths):
        print(f"wrote {paths[name]}")
    return 0


def cmd_serve(cfg: RunConfig, stdin=None, stdout=None) -> int:
    stdin = stdin if stdin is not None else sys.stdin
    stdout = stdout if stdout is not None else sys.stdout
    dataset = _load_dataset(cfg)
    model = bprmod.load_model(cfg.outdir / "bpr_model.txt")
    rec = bprmod.BprRecommender.from_model(model)
    rec.fit(dataset.readings, np.arange(len(dataset.books)))
    print("ready", file=stdout, flush=True)
    for line in stdin:
        words = line.split()
        if not words:
            continue
        if words[0] == "quit":
            break
        if words[0] != "recommend" or len(words) != 3:
            print("error: expected 'recommend <user> <k>' or 'quit'",
                  file=stdout, flush=True)
            continue
        user = dataset.users.get(words[1])
        if user is None:
            print(f"error: unknown user {words[1]}", file=stdout, flush=True)
            continue
        try:
            k = int(words[2])
            if k < 1:
                raise ValueError
        except ValueError:
            print(f"error: bad k {words[2]!r}", file=stdout, flush=True)
            continue
        books = rec.recommend(user, k)
        print(" ".join(dataset.books.external(int(b)) for b in books),
              file=stdout, flush=True)
    return 0


# --- argument parsing -------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bookrec",
        description="Book recommendation pipeline: ingest, train, evaluate, report.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="YAML run configuration")
    common.add_argument("--seed", type=int, default=None,
                        help="override the config seed")

    evalflags = argparse.ArgumentParser(add_help=False)
    evalflags.add_argument("--k", type=_parse_ks, default=None,
                           help="comma-separated recommendation list sizes")
    evalflags.add_argument("--bct-only", action="store_true",
                           help="train on BCT loan readings only")
    evalflags.add_argument("--embeddings", default=None,
                           help="embedding file for the content-based recommender")
    evalflags.add_argument("--fallback-embed", type=int, default=None, metavar="DIM",
                           help="hashed bag-of-words dimension when no embedding file")

    sub.add_parser("ingest", parents=[common],
                   help="fuse the source tables into catalog/readings/genres")
    sub.add_parser("characterize", parents=[common],
                   help="emit readings CDFs and the genre distribution")
    sub.add_parser("train", parents=[common, evalflags],
                   help="fit the latent-factor model and save a checkpoint")
    p_eval = sub.add_parser("evaluate", parents=[common, evalflags],
                            help="train and score all configured recommenders")
    p_eval.add_argument("--timing", action="store_true",
                        help="also measure fit/recommend wall-clock times")
    sub.add_parser("grid", parents=[common, evalflags],
                   help="hyperparameter grid search on the validation split")
    sub.add_parser("sweep", parents=[common, evalflags],
                   help="evaluate across the configured k sweep")
    sub.add_parser("ablation", parents=[common, evalflags],
                   help="compare content-based metadata field sets")

    p_synth = sub.add_parser("synth", help="generate synthetic source tables")
    p_synth.add_argument("--users", type=int, required=True)
    p_synth.add_argument("--books", type=int, required=True)
    p_synth.add_argument("--genres", type=int, default=10)
    p_synth.add_argument("--authors", type=int, default=None)
    p_synth.add_argument("--sharpness", type=float, default=4.0,
                         help="genre affinity concentration (inf = single genre)")
    p_synth.add_argument("--readings-min", type=int, default=20)
    p_synth.add_argument("--readings-max", type=int, default=None)
    p_synth.add_argument("--bct-fraction", type=float, default=0.5)
    p_synth.add_argument("--author-affinity-light", type=float, default=0.0)
    p_synth.add_argument("--author-affinity-heavy", type=float, default=None)
    p_synth.add_argument("--seed", type=int, default=None)
    p_synth.add_argument("--out", required=True, help="output directory")

    sub.add_parser("serve", parents=[common],
                   help="answer 'recommend <user> <k>' requests on stdin")
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(message)s")
    args = build_parser().parse_args(argv)
    try:
        if args.command == "synth":
            return cmd_synth(args)
        cfg = load_config(
            args.config,
            seed=args.seed,
            ks=getattr(args, "k", None),
            embeddings=getattr(args, "embeddings", None),
            fallback_dim=getattr(args, "fallback_embed", None),
        )
        if args.command == "ingest":
            return cmd_ingest(cfg)
        if args.command == "characterize":
            return cmd_characterize(cfg)
        if args.command == "train":
            return cmd_train(cfg, bct_only=args.bct_only)
        if args.command == "evaluate":
            return cmd_evaluate(cfg, ks=args.k, bct_only=args.bct_only,
                                with_timing=args.timing)
        if args.command == "sweep":
            return cmd_sweep(cfg, ks=args.k, bct_only=args.bct_only)
        if args.command == "grid":
            return cmd_grid(cfg, bct_only=args.bct_only)
        if args.command == "ablation":
            return cmd_ablation(cfg, bct_only=args.bct_only)
        if args.command == "serve":
            return cmd_serve(cfg)
        raise ValueError(f"unknown command {args.command!r}")
    except (BookrecError, ValueError, OSError, yaml.YAMLError) as exc:
        print(f"{args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
