"""Command-line interface for corpus embedding extraction and verification.

Exit codes: 0 success; 1 usage error; 2 corpus or embedding-file problem
(including verification findings); 3 encoder failure.
"""

from __future__ import annotations

import argparse
import sys
from typing import Optional, Sequence

from .corpusfile import parse_corpus_file
from .embedfile import verify_embedding_file
from .errors import CorpusError, EncoderError, UsageError
from .extract import DEFAULT_BATCH_SIZE, ExtractorSpec, extract

_EPILOG = """\
encoders:
  --encoder MODULE:ATTR names any Python callable that maps a list of
  sentence strings to one fixed-length numeric vector per sentence. A
  finetuned model is used the same way: finetune it with its own tooling,
  wrap it in such a callable, and point --encoder at the wrapper. --stub
  selects the deterministic hash encoder (requires --dim and --seed),
  which exists for pipeline plumbing and cross-program parity checks.
"""


class _Parser(argparse.ArgumentParser):
    """argparse that reports bad usage through the UsageError exit path."""

    def error(self, message: str) -> None:  # type: ignore[override]
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="triage-extract",
        description="Produce and check sentence-embedding files for triage corpora.",
        epilog=_EPILOG,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    sub = parser.add_subparsers(dest="command", required=True)

    ext = sub.add_parser(
        "extract",
        help="encode every sentence of a corpus into an embedding file",
        epilog=_EPILOG,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    ext.add_argument("--corpus", required=True, help="corpus file to encode")
    which = ext.add_mutually_exclusive_group(required=True)
    which.add_argument(
        "--encoder",
        metavar="MODULE:ATTR",
        help="sentence encoder callable to load",
    )
    which.add_argument(
        "--stub",
        action="store_true",
        help="use the deterministic hash encoder",
    )
    ext.add_argument(
        "--dim",
        type=int,
        help="vector dimension (required with --stub; with --encoder, "
        "asserts the encoder's dimension)",
    )
    ext.add_argument("--seed", type=int, help="stub seed (stub only)")
    ext.add_argument("--out", required=True, help="embedding file to write")
    ext.add_argument(
        "--batch-size",
        type=int,
        default=DEFAULT_BATCH_SIZE,
        help=f"sentences per encoder call (default {DEFAULT_BATCH_SIZE})",
    )

    ver = sub.add_parser(
        "verify",
        help="check an embedding file against its corpus",
    )
    ver.add_argument("--embeddings", required=True, help="embedding file to check")
    ver.add_argument("--corpus", required=True, help="corpus the file must cover")
    return parser


def run(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "extract":
        spec = ExtractorSpec(
            corpus_path=args.corpus,
            output_path=args.out,
            encoder=args.encoder,
            stub=args.stub,
            dim=args.dim,
            seed=args.seed,
            batch_size=args.batch_size,
        )
        result = extract(spec)
        print(
            f"wrote {result.output_path}: {result.sentences} vectors "
            f"({result.dim} dims) from {result.posts} posts"
        )
        return 0
    if args.command == "verify":
        corpus = parse_corpus_file(args.corpus)
        findings = verify_embedding_file(args.embeddings, corpus)
        if findings:
            for finding in findings:
                print(finding)
            print(f"{len(findings)} finding(s)")
            return 2
        print("ok")
        return 0
    raise UsageError(f"unknown command {args.command!r}")


def entrypoint(argv: Optional[Sequence[str]] = None) -> int:
    """Console-script entry; maps the error taxonomy to exit codes."""
    try:
        return run(argv)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except CorpusError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except EncoderError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except UnicodeDecodeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(entrypoint())
