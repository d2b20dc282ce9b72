"""Sentence-embedding extraction and verification for triage corpora.

This package is a standalone companion to the triage benchmarking engine.
It talks to the engine exclusively through files: it reads the engine's
tab-separated corpus format and writes sentence-embedding files in the
engine's ingestion format. Nothing here imports the engine; the text rules
(markup stripping, sentence segmentation, tokenization) and the
integer-exact stub encoder are independent reimplementations of the
documented formats, and the test suite proves byte-for-byte parity on
shared golden files.
"""

from .corpusfile import CorpusText, PostText, parse_corpus_file
from .embedfile import Finding, verify_embedding_file, write_embedding_file
from .extract import ExtractorSpec, extract
from .stub import stub_encode

__all__ = [
    "CorpusText",
    "ExtractorSpec",
    "Finding",
    "PostText",
    "extract",
    "parse_corpus_file",
    "stub_encode",
    "verify_embedding_file",
    "write_embedding_file",
]

__version__ = "0.1.0"
