"""Tests for the embedding generator.

The cross-checks against the ``bookrec`` package pin the two shared
contracts: the metadata-summary text must match its builder byte for byte,
and the EMBV1 files written here must load through its reader unchanged.
"""

from __future__ import annotations

import os
import subprocess
import sys
import textwrap

import numpy as np
import pytest

from embedgen import (
    CATALOG_HEADER,
    DEFAULT_MODEL,
    CatalogError,
    EmbedJob,
    ModelUnavailable,
    build_summary,
    generate,
    load_encoder,
    parse_fields,
    read_catalog,
)
from embedgen.cli import build_parser, main

from conftest import GOLDEN_CATALOG, FakeEncoder, hash_vectors, write_catalog_rows

from bookrec.embed import EmptySummary, load_embeddings
from bookrec.embed import metadata_summary as ref_summary
from bookrec.embed import parse_fields as ref_parse_fields
from bookrec.ingest import read_catalog as ref_read_catalog


# ---------------------------------------------------------------- field sets


def test_parse_fields_returns_canonical_order():
    assert parse_fields("genres,authors") == ("authors", "genres")
    assert parse_fields("keywords,title,plot") == ("title", "plot", "keywords")


def test_parse_fields_normalizes_case_and_whitespace():
    assert parse_fields(" Genres , AUTHORS ") == ("authors", "genres")


def test_parse_fields_rejects_unknown_name():
    with pytest.raises(ValueError, match="rating"):
        parse_fields("authors,rating")


def test_parse_fields_empty_spec_gives_empty_tuple():
    assert parse_fields("") == ()


def test_job_rejects_empty_field_set(tmp_path):
    with pytest.raises(ValueError, match="empty"):
        EmbedJob(catalog=tmp_path / "c.csv", fields=(), out=tmp_path / "o")


def test_job_rejects_unknown_field(tmp_path):
    with pytest.raises(ValueError, match="isbn"):
        EmbedJob(catalog=tmp_path / "c.csv", fields=("isbn",), out=tmp_path / "o")


@pytest.mark.parametrize("batch", [0, -3])
def test_job_rejects_nonpositive_batch(tmp_path, batch):
    with pytest.raises(ValueError, match="batch"):
        EmbedJob(catalog=tmp_path / "c.csv", fields=("title",),
                 out=tmp_path / "o", batch=batch)


# ------------------------------------------------------------ catalog input


def test_read_catalog_golden_rows():
    rows = read_catalog(GOLDEN_CATALOG)
    assert len(rows) == 20
    assert rows[0]["book_id"] == "bct:g0"
    assert rows[0]["title"] == "Il nome della rosa"
    assert all(tuple(row) == CATALOG_HEADER for row in rows)


def test_read_catalog_missing_file(tmp_path):
    with pytest.raises(CatalogError, match="not found"):
        read_catalog(tmp_path / "nope.csv")


def test_read_catalog_rejects_wrong_header(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("book_id,title\nx,y\n", encoding="utf-8")
    with pytest.raises(CatalogError, match="header"):
        read_catalog(path)


def test_read_catalog_rejects_short_row(tmp_path):
    path = tmp_path / "short.csv"
    path.write_text(",".join(CATALOG_HEADER) + "\nonly,three,cells\n",
                    encoding="utf-8")
    with pytest.raises(CatalogError, match=r":2:"):
        read_catalog(path)


# ------------------------------------------------------------------ summary


FULL_ROW = {
    "book_id": "bct:x", "title": "T", "authors": "A;B", "item_type": "monograph",
    "language": "it", "plot": "P", "keywords": "k1;k2",
    "genres": "G1:0.7;G2:0.3",
}


def test_summary_concatenates_selected_fields_in_fixed_order():
    fields = ("title", "authors", "plot", "genres", "keywords")
    assert build_summary(FULL_ROW, fields) == "T. A, B. P. G1, G2. k1, k2"
    assert build_summary(FULL_ROW, ("title", "genres")) == "T. G1, G2"


def test_summary_skips_empty_fields():
    row = dict(FULL_ROW, authors="")
    assert build_summary(row, ("title", "authors")) == "T"


def test_summary_empty_when_all_selected_fields_empty():
    row = dict(FULL_ROW, authors="", genres="")
    assert build_summary(row, ("authors", "genres")) == ""


def test_summary_keeps_genre_probability_order_and_colons_in_names():
    row = dict(FULL_ROW, genres="Sci: Fi:0.6;Giallo:0.4")
    assert build_summary(row, ("genres",)) == "Sci: Fi, Giallo"


@pytest.mark.parametrize("spec", [
    "title", "authors", "plot", "genres", "keywords",
    "authors,genres", "title,authors,plot,genres,keywords",
])
def test_golden_summaries_match_reference_builder(spec):
    books, interner = ref_read_catalog(GOLDEN_CATALOG)
    rows = read_catalog(GOLDEN_CATALOG)
    assert len(books) == len(rows)
    fields = parse_fields(spec)
    ref_fields = ref_parse_fields(spec)
    for book, row in zip(books, rows):
        assert interner.external(book.id) == row["book_id"]
        try:
            expected = ref_summary(book, ref_fields)
        except EmptySummary:
            expected = ""
        assert build_summary(row, fields) == expected


# ----------------------------------------------------------------- generate


def test_generate_writes_embv1(tmp_path, fake_encoder):
    out = tmp_path / "emb.tsv"
    job = EmbedJob(catalog=GOLDEN_CATALOG, fields=("authors", "genres"), out=out)
    assert generate(job, encoder=fake_encoder) == 19
    lines = out.read_text(encoding="utf-8").splitlines()
    assert lines[0] == f"#embv1 dim={fake_encoder.dim}"
    assert len(lines) == 20
    ids = [line.split("\t", 1)[0] for line in lines[1:]]
    assert "bct:g10" not in ids
    assert ids[0] == "bct:g0"


def test_generate_skips_empty_summary_with_log(tmp_path, fake_encoder, caplog):
    out = tmp_path / "emb.tsv"
    job = EmbedJob(catalog=GOLDEN_CATALOG, fields=("authors", "genres"), out=out)
    with caplog.at_level("WARNING", logger="embedgen.core"):
        generate(job, encoder=fake_encoder)
    assert "bct:g10" in caplog.text and "skipped" in caplog.text


def test_written_floats_match_encoder_output(tmp_path, fake_encoder):
    out = tmp_path / "emb.tsv"
    job = EmbedJob(catalog=GOLDEN_CATALOG, fields=("authors", "genres"), out=out)
    generate(job, encoder=fake_encoder)
    rows = read_catalog(GOLDEN_CATALOG)
    for line in out.read_text(encoding="utf-8").splitlines()[1:]:
        ext, *raw = line.split("\t")
        row = next(r for r in rows if r["book_id"] == ext)
        expected = hash_vectors([build_summary(row, job.fields)], fake_encoder.dim)[0]
        np.testing.assert_allclose([float(x) for x in raw], expected,
                                   rtol=1e-6, atol=1e-9)


def test_identical_summaries_give_identical_rows(tmp_path, fake_encoder):
    catalog = write_catalog_rows(tmp_path / "c.csv", [
        {"book_id": "bct:a", "title": "First", "authors": "X", "genres": "G:1.0"},
        {"book_id": "bct:b", "title": "Second", "authors": "X", "genres": "G:1.0"},
    ])
    out = tmp_path / "emb.tsv"
    generate(EmbedJob(catalog=catalog, fields=("authors", "genres"), out=out),
             encoder=fake_encoder)
    first, second = out.read_text(encoding="utf-8").splitlines()[1:]
    assert first.split("\t", 1)[1] == second.split("\t", 1)[1]


def test_generate_is_byte_deterministic(tmp_path):
    outs = []
    for name in ("one.tsv", "two.tsv"):
        out = tmp_path / name
        generate(EmbedJob(catalog=GOLDEN_CATALOG, fields=("authors", "genres"),
                          out=out), encoder=FakeEncoder())
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]


def test_generate_empty_catalog_writes_header_only(tmp_path, fake_encoder):
    catalog = write_catalog_rows(tmp_path / "c.csv", [])
    out = tmp_path / "emb.tsv"
    assert generate(EmbedJob(catalog=catalog, fields=("title",), out=out),
                    encoder=fake_encoder) == 0
    lines = out.read_text(encoding="utf-8").splitlines()
    assert len(lines) == 1 and lines[0].startswith("#embv1 dim=")


def test_no_output_file_when_encoder_fails(tmp_path):
    out = tmp_path / "emb.tsv"

    def broken(texts, batch):
        raise RuntimeError("gpu on fire")

    job = EmbedJob(catalog=GOLDEN_CATALOG, fields=("title",), out=out)
    with pytest.raises(RuntimeError):
        generate(job, encoder=broken)
    assert not out.exists()
    assert list(tmp_path.glob("*.tmp")) == []


def test_batch_size_reaches_encoder(tmp_path, fake_encoder):
    job = EmbedJob(catalog=GOLDEN_CATALOG, fields=("title",),
                   out=tmp_path / "emb.tsv", batch=7)
    generate(job, encoder=fake_encoder)
    assert fake_encoder.batches == [7]


# ------------------------------------------------- round trip into consumer


def test_embv1_loads_in_consumer_with_zero_errors(tmp_path, fake_encoder):
    out = tmp_path / "emb.tsv"
    job = EmbedJob(catalog=GOLDEN_CATALOG, fields=("authors", "genres"), out=out)
    written = generate(job, encoder=fake_encoder)

    books, interner = ref_read_catalog(GOLDEN_CATALOG)
    store, skipped = load_embeddings(out, interner)
    assert skipped == []
    assert len(store) == written
    assert store.dim == fake_encoder.dim

    for row in read_catalog(GOLDEN_CATALOG):
        summary = build_summary(row, job.fields)
        if not summary:
            assert interner.get(row["book_id"]) not in store.vectors
            continue
        original = hash_vectors([summary], fake_encoder.dim)[0]
        loaded = store[interner.get(row["book_id"])]
        cosine = float(original @ loaded
                       / (np.linalg.norm(original) * np.linalg.norm(loaded)))
        assert cosine == pytest.approx(1.0, abs=1e-6)


# -------------------------------------------------------------------- model


def test_missing_dependency_reports_model_unavailable(monkeypatch):
    monkeypatch.setitem(sys.modules, "sentence_transformers", None)
    with pytest.raises(ModelUnavailable, match="not installed"):
        load_encoder(DEFAULT_MODEL)


def test_unloadable_model_reports_download_hint():
    code = textwrap.dedent("""
        from embedgen import DEFAULT_MODEL, ModelUnavailable, load_encoder
        try:
            load_encoder(DEFAULT_MODEL)
        except ModelUnavailable as exc:
            assert "Download it once" in str(exc), str(exc)
            print("unavailable-with-hint")
    """)
    env = dict(os.environ, HF_HUB_OFFLINE="1", HF_HUB_DISABLE_TELEMETRY="1")
    result = subprocess.run([sys.executable, "-c", code], env=env,
                            capture_output=True, text=True, timeout=300)
    assert result.returncode == 0, result.stderr
    assert result.stdout.strip() == "unavailable-with-hint"


# ---------------------------------------------------------------------- CLI


def test_parser_defaults():
    args = build_parser().parse_args(["--catalog", "c.csv", "--out", "o.tsv"])
    assert args.fields == "authors,genres"
    assert args.model == DEFAULT_MODEL
    assert args.batch == 64


def test_cli_end_to_end(tmp_path, monkeypatch, capsys):
    monkeypatch.setattr("embedgen.core.load_encoder",
                        lambda name: FakeEncoder(dim=8))
    out = tmp_path / "emb.tsv"
    rc = main(["--catalog", str(GOLDEN_CATALOG), "--fields", "authors,genres",
               "--out", str(out)])
    assert rc == 0
    assert f"wrote 19 vectors to {out}" in capsys.readouterr().out
    assert out.read_text(encoding="utf-8").startswith("#embv1 dim=8\n")


def test_cli_rejects_unknown_field(tmp_path, capsys):
    rc = main(["--catalog", str(GOLDEN_CATALOG), "--fields", "authors,bogus",
               "--out", str(tmp_path / "o.tsv")])
    assert rc == 1
    assert "embedgen: error:" in capsys.readouterr().err


def test_cli_reports_missing_catalog(tmp_path, capsys):
    rc = main(["--catalog", str(tmp_path / "absent.csv"),
               "--out", str(tmp_path / "o.tsv")])
    assert rc == 1
    assert "not found" in capsys.readouterr().err


def test_cli_reports_model_unavailable(tmp_path, monkeypatch, capsys):
    def unavailable(name):
        raise ModelUnavailable("checkpoint gone; download it once")

    monkeypatch.setattr("embedgen.core.load_encoder", unavailable)
    rc = main(["--catalog", str(GOLDEN_CATALOG), "--out", str(tmp_path / "o.tsv")])
    assert rc == 1
    err = capsys.readouterr().err
    assert "embedgen: error:" in err and "download it once" in err
