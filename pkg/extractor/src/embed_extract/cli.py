"""embed-extract command line entry point."""

from __future__ import annotations

import argparse
import logging
import sys

from .corpus import CorpusError
from .extract import LEVELS, ExtractionError, ExtractionJob, run_extraction


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="embed-extract",
        description="Extract pooled or token-level embeddings from a pretrained encoder.",
    )
    parser.add_argument("--model", required=True, help="model identifier or local directory")
    parser.add_argument("--input", required=True, help="JSON Lines corpus ({'id','text','label'})")
    parser.add_argument("--level", required=True, choices=LEVELS)
    parser.add_argument("--out", required=True)
    parser.add_argument("--max-len", type=int, default=None,
                        help="token budget per input; longer inputs are skipped (default: model limit)")
    parser.add_argument("--layer", type=int, default=-1,
                        help="hidden-state layer to export (default: -1, the final layer)")
    parser.add_argument("--batch-size", type=int, default=16)
    parser.add_argument("--device", default="cpu")
    parser.add_argument("--word-means", default=None,
                        help="also write per-word mean vectors (word level only) to this path")
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    args = build_parser().parse_args(argv)
    try:
        job = ExtractionJob(
            model=args.model,
            input=args.input,
            level=args.level,
            out=args.out,
            max_len=args.max_len,
            layer=args.layer,
            batch_size=args.batch_size,
            device=args.device,
            word_means_out=args.word_means,
        )
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    try:
        stats = run_extraction(job)
    except (CorpusError, ExtractionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {stats.written} records (dimension {stats.dimension}, {stats.skipped} skipped) to {job.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
