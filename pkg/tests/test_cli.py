import io

import pytest
import yaml

from bookrec.cli import cmd_serve, load_config, main
from bookrec.ingest import read_catalog, read_readings
from bookrec.synth import SynthSpec, generate


def write_config(root, **overrides):
    cfg = {
        "seed": 7,
        "outdir": "out",
        "data": {
            "bct_books": "data/bct_books.csv",
            "bct_loans": "data/bct_loans.csv",
            "anobii_items": "data/anobii_items.csv",
            "anobii_ratings": "data/anobii_ratings.csv",
            "anobii_genre_votes": "data/anobii_genre_votes.csv",
            "links": "data/links.csv",
        },
        "merge": {"min_rating": 3, "min_user_readings": 4, "min_book_readings": 1},
        "bpr": {"latent_dim": 4, "epochs": 4},
        "k": [5, 10],
        "fallback_embed": 32,
    }
    cfg.update(overrides)
    path = root / "config.yaml"
    path.write_text(yaml.safe_dump(cfg))
    return path


@pytest.fixture(scope="module")
def pipeline(tmp_path_factory):
    """A small ingested corpus with a trained model, shared across commands."""
    root = tmp_path_factory.mktemp("cli")
    generate(
        SynthSpec(users=40, books=80, genres=5, readings_min=6, readings_max=14,
                  seed=11),
        root / "data",
    )
    config = write_config(root)
    assert main(["ingest", "--config", str(config)]) == 0
    assert main(["train", "--config", str(config)]) == 0
    return root, config


def read_rows(path):
    header, *rows = path.read_text().splitlines()
    return header.split(","), [line.split(",") for line in rows]


# --- ingest ------------------------------------------------------------------


def test_ingest_writes_the_working_set(pipeline):
    root, _ = pipeline
    out = root / "out"
    books, interner = read_catalog(out / "catalog.csv")
    readings, users = read_readings(out / "readings.csv", interner)
    assert len(books) > 0
    assert len(readings) > 0
    assert all(len(readings.books_of(u)) >= 4 for u in readings.users())
    assert all(users.external(u).split(":", 1)[0] in ("bct", "anobii")
               for u in readings.users())
    assert not list(out.glob("*.tmp"))


def test_ingest_reports_stage_counts(pipeline, capsys):
    _, config = pipeline
    assert main(["ingest", "--config", str(config)]) == 0
    stdout = capsys.readouterr().out
    assert "books" in stdout and "readings" in stdout


def test_ingest_with_no_surviving_readings_fails(tmp_path, capsys):
    data = tmp_path / "data"
    data.mkdir()
    headers = {
        "bct_books.csv": "book_id,title,authors,item_type,language",
        "bct_loans.csv": "user_id,book_id,date",
        "anobii_items.csv": "item_id,title,authors,language,plot,keywords",
        "anobii_ratings.csv": "user_id,item_id,rating,date",
        "anobii_genre_votes.csv": "item_id,genre,votes",
        "links.csv": "bct_book_id,anobii_item_id",
    }
    for name, header in headers.items():
        (data / name).write_text(header + "\n")
    config = write_config(tmp_path)
    assert main(["ingest", "--config", str(config)]) == 1
    assert "no readings" in capsys.readouterr().err
    out = tmp_path / "out"
    assert not (out / "catalog.csv").exists()
    assert not list(out.glob("*.tmp"))


# --- characterize ------------------------------------------------------------


def test_characterize_writes_cdfs(pipeline):
    root, config = pipeline
    assert main(["characterize", "--config", str(config)]) == 0
    for name in ("cdf_users.csv", "cdf_books.csv"):
        header, rows = read_rows(root / "out" / name)
        assert header == ["value", "cum_fraction"]
        fractions = [float(r[1]) for r in rows]
        assert fractions == sorted(fractions)
        assert fractions[-1] == 1.0
    header, rows = read_rows(root / "out" / "genre_dist.csv")
    assert header == ["genre", "share"]
    assert sum(float(r[1]) for r in rows) == pytest.approx(1.0)


# --- train -------------------------------------------------------------------


def test_train_writes_checkpoint(pipeline):
    root, _ = pipeline
    first = (root / "out" / "bpr_model.txt").read_text()
    assert first.startswith("#bprv1 ")


def test_bct_only_filters_training_sources(pipeline, capsys):
    _, config = pipeline
    assert main(["train", "--config", str(config), "--bct-only"]) == 0
    assert "bct sources only" in capsys.readouterr().out


# --- evaluate / sweep --------------------------------------------------------


def test_evaluate_report_schema(pipeline, capsys):
    root, config = pipeline
    assert main(["evaluate", "--config", str(config)]) == 0
    header, rows = read_rows(root / "out" / "eval_report.csv")
    assert header == ["recommender", "k", "urr", "nrr", "precision", "recall", "fr"]
    names = {r[0] for r in rows}
    assert names == {"random", "most_read", "closest", "bpr"}
    assert {r[1] for r in rows} == {"5", "10"}
    assert all(0.0 <= float(r[2]) <= 1.0 for r in rows)
    header, rows = read_rows(root / "out" / "cohorts.csv")
    assert header == ["bin_low", "bin_high", "recommender", "nrr"]
    assert all(float(r[3]) >= 0.0 for r in rows)
    stdout = capsys.readouterr().out
    assert "urr=" in stdout and "bpr" in stdout


def test_evaluate_reruns_are_byte_identical(pipeline):
    root, config = pipeline
    assert main(["evaluate", "--config", str(config)]) == 0
    reports = [(root / "out" / n).read_bytes()
               for n in ("eval_report.csv", "cohorts.csv")]
    assert main(["evaluate", "--config", str(config)]) == 0
    assert [(root / "out" / n).read_bytes()
            for n in ("eval_report.csv", "cohorts.csv")] == reports


def test_timing_report_is_opt_in(pipeline):
    root, config = pipeline
    timing_csv = root / "out" / "timing.csv"
    if timing_csv.exists():
        timing_csv.unlink()
    assert main(["evaluate", "--config", str(config)]) == 0
    assert not timing_csv.exists()
    assert main(["evaluate", "--config", str(config), "--timing"]) == 0
    header, rows = read_rows(timing_csv)
    assert header == ["recommender", "fit_s", "recommend_s"]
    by_name = {r[0]: r for r in rows}
    assert by_name["random"][1] == ""  # no training phase
    assert float(by_name["bpr"][1]) >= 0.0
    assert all(float(r[2]) >= 0.0 for r in rows)


def test_sweep_covers_the_k_range(pipeline):
    root, config = pipeline
    assert main(["sweep", "--config", str(config)]) == 0
    header, rows = read_rows(root / "out" / "sweep.csv")
    assert header == ["recommender", "k", "urr", "nrr", "precision", "recall", "fr"]
    ks = sorted({int(r[1]) for r in rows})
    assert ks == list(range(1, 51))
    for name in ("random", "most_read", "closest", "bpr"):
        series = [float(r[2]) for r in rows if r[0] == name]
        assert all(b >= a for a, b in zip(series, series[1:]))


# --- grid / ablation ---------------------------------------------------------


def test_grid_marks_exactly_one_best(pipeline, capsys):
    root, config = pipeline
    assert main(["grid", "--config", str(config)]) == 0
    header, rows = read_rows(root / "out" / "grid.csv")
    assert header == ["latent_dim", "learning_rate", "urr", "best"]
    assert sum(int(r[3]) for r in rows) == 1
    assert len(rows) == 4  # 2 dims x 2 rates by default
    assert "best" in capsys.readouterr().out


def test_ablation_scores_each_field_set(pipeline):
    root, config = pipeline
    assert main(["ablation", "--config", str(config)]) == 0
    header, rows = read_rows(root / "out" / "ablation.csv")
    assert header[:2] == ["fields", "k"]
    assert [r[0] for r in rows] == ["title", "authors", "authors+genres"]
    assert all(0.0 <= float(r[2]) <= 1.0 for r in rows)


# --- serve -------------------------------------------------------------------


def test_serve_protocol(pipeline):
    _, config = pipeline
    cfg = load_config(config)
    out = io.StringIO()
    commands = ("recommend bct:u0 3\nrecommend nobody 2\nrecommend bct:u0 x\n"
                "help\nquit\n")
    assert cmd_serve(cfg, stdin=io.StringIO(commands), stdout=out) == 0
    lines = out.getvalue().splitlines()
    assert lines[0] == "ready"
    books = lines[1].split()
    assert len(books) == 3 and all(b.startswith("bct:") for b in books)
    assert lines[2] == "error: unknown user nobody"
    assert lines[3] == "error: bad k 'x'"
    assert lines[4].startswith("error: expected")
    assert len(lines) == 5


def test_serve_over_stdin(pipeline, capsys, monkeypatch):
    _, config = pipeline
    monkeypatch.setattr("sys.stdin", io.StringIO("recommend bct:u1 2\n"))
    assert main(["serve", "--config", str(config)]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "ready"
    assert len(lines[1].split()) == 2


# --- configuration and errors ------------------------------------------------


def test_config_overrides_and_relative_paths(pipeline):
    root, config = pipeline
    cfg = load_config(config, seed=99, ks=[3], fallback_dim=16)
    assert cfg.seed == 99
    assert cfg.split.seed == 99
    assert cfg.bpr.seed == 99
    assert cfg.ks == (3,)
    assert cfg.fallback_dim == 16
    assert cfg.outdir == root / "out"
    assert cfg.data["bct_loans"] == root / "data" / "bct_loans.csv"


def test_unknown_config_keys_warned(tmp_path, caplog):
    config = write_config(tmp_path, surprise=1)
    import logging

    with caplog.at_level(logging.WARNING, logger="bookrec.cli"):
        load_config(config)
    assert any("surprise" in r.message for r in caplog.records)


def test_missing_config_exits_two(tmp_path, capsys):
    assert main(["evaluate", "--config", str(tmp_path / "nope.yaml")]) == 2
    assert "error:" in capsys.readouterr().err


def test_malformed_config_exits_two(tmp_path, capsys):
    config = tmp_path / "config.yaml"
    config.write_text("seed: [unclosed\n")
    assert main(["ingest", "--config", str(config)]) == 2
    assert "error:" in capsys.readouterr().err


def test_unknown_command_rejected():
    with pytest.raises(SystemExit):
        main(["frobnicate"])
