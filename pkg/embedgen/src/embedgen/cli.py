"""Command-line entry point: ``embedgen --catalog ... --out ...``."""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .core import DEFAULT_MODEL, EmbedJob, EmbedgenError, generate, parse_fields


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="embedgen",
        description="Embed book metadata summaries with a sentence-transformer "
                    "and write an EMBV1 file.",
    )
    parser.add_argument("--catalog", required=True, type=Path,
                        help="catalog.csv produced by the ingest step")
    parser.add_argument("--fields", default="authors,genres",
                        help="comma-separated metadata fields "
                             "(title, authors, plot, genres, keywords)")
    parser.add_argument("--out", required=True, type=Path,
                        help="EMBV1 output path")
    parser.add_argument("--model", default=DEFAULT_MODEL,
                        help=f"sentence-transformer name (default {DEFAULT_MODEL})")
    parser.add_argument("--batch", type=int, default=64,
                        help="encoding batch size")
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    args = build_parser().parse_args(argv)
    try:
        job = EmbedJob(catalog=args.catalog, fields=parse_fields(args.fields),
                       out=args.out, model=args.model, batch=args.batch)
        written = generate(job)
    except (EmbedgenError, ValueError, OSError) as exc:
        print(f"embedgen: error: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {written} vectors to {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
