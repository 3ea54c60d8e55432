"""End-to-end pipeline walkthrough on a synthetic corpus.

This script drives the same command surface a shell user would: it generates
synthetic library/community source tables, ingests and fuses them into a
working set, trains the pairwise-ranking model, and evaluates all four
recommenders, then pretty-prints the resulting KPI report.

Run it from the repository root:

    python3 demos/01_full_pipeline.py

Everything happens inside a temporary directory; nothing in the repository
is touched.
"""

import csv
import tempfile
from pathlib import Path

import yaml

from bookrec.cli import main as bookrec

# --------------------------------------------------------------------------
# 1. A disposable workspace and a synthetic corpus.
#
# The generator plants per-user genre preferences and then samples readings
# from them, so collaborative and content signals both exist by construction.
# Half the users come from the library side (loans with dates), half from the
# community side (ratings).
# --------------------------------------------------------------------------

workdir = Path(tempfile.mkdtemp(prefix="bookrec-demo-"))
raw = workdir / "raw"
print(f"workspace: {workdir}\n")

rc = bookrec([
    "synth", "--users", "150", "--books", "240", "--genres", "8",
    "--sharpness", "5.0", "--readings-min", "8", "--readings-max", "24",
    "--seed", "7", "--out", str(raw),
])
assert rc == 0
print(f"\nsource tables in {raw}:")
for path in sorted(raw.iterdir()):
    print(f"  {path.name}")

# --------------------------------------------------------------------------
# 2. One YAML file configures every subcommand.
#
# Paths are resolved relative to the config file, so the whole workspace can
# be moved around freely.
# --------------------------------------------------------------------------

config = workdir / "config.yaml"
config.write_text(yaml.safe_dump({
    "seed": 7,
    "outdir": "out",
    "data": {
        "bct_books": "raw/bct_books.csv",
        "bct_loans": "raw/bct_loans.csv",
        "anobii_items": "raw/anobii_items.csv",
        "anobii_ratings": "raw/anobii_ratings.csv",
        "anobii_genre_votes": "raw/anobii_genre_votes.csv",
        "links": "raw/links.csv",
    },
    "merge": {"min_rating": 3, "min_user_readings": 3, "min_book_readings": 2},
    "bpr": {"latent_dim": 16, "epochs": 12, "learning_rate": 0.05},
    "k": [5, 10, 20],
    "fallback_embed": 64,
}), encoding="utf-8")
print(f"\nwrote {config}")

# --------------------------------------------------------------------------
# 3. Ingest: parse, filter, match the two catalogs, fuse the readings.
#
# The step prints its own funnel (staged -> admitted -> matched -> final) and
# writes catalog.csv / readings.csv / genres.csv atomically.
# --------------------------------------------------------------------------

print("\n--- ingest " + "-" * 50)
assert bookrec(["ingest", "--config", str(config)]) == 0

# --------------------------------------------------------------------------
# 4. Train the latent-factor model and keep a reusable checkpoint.
# --------------------------------------------------------------------------

print("\n--- train " + "-" * 51)
assert bookrec(["train", "--config", str(config)]) == 0

# --------------------------------------------------------------------------
# 5. Evaluate the four recommenders on the held-out test readings.
# --------------------------------------------------------------------------

print("\n--- evaluate " + "-" * 48)
assert bookrec(["evaluate", "--config", str(config)]) == 0

print("\nKPIs by recommender and list length:")
with open(workdir / "out" / "eval_report.csv", encoding="utf-8") as fh:
    rows = list(csv.DictReader(fh))
header = ["recommender", "k", "urr", "nrr", "precision", "recall", "fr"]
print("  " + "  ".join(f"{h:>11}" for h in header))
for row in rows:
    cells = [f"{row['recommender']:>11}", f"{row['k']:>11}"]
    cells += [f"{float(row[h]):11.4f}" for h in header[2:]]
    print("  " + "  ".join(cells))

print("""
Reading the table: urr is the share of users with at least one test book in
their top-k, nrr the mean number of test books recovered there, and fr the
mean rank of the first hit in the full ranking (lower is better).  The
pairwise-ranking model should clearly beat the random and popularity
baselines, with the content-based recommender in between.
""")
