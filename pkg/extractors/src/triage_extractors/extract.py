"""Run a sentence encoder over a corpus and emit an embedding file.

Two encoder pathways, selected exclusively:

* A real pretrained encoder, named ``module:attr`` — any Python callable
  taking a list of sentence strings and returning one fixed-length
  numeric vector per sentence. Finetuned models plug in the same way:
  finetuning happens outside this tool, and the resulting model is
  exposed through the same callable contract.
* The integer-exact stub (``dim``, ``seed``), for plumbing and
  cross-program parity tests.

Sentences are encoded in batches, in corpus order; the writer sorts rows
by (post id, sentence index), so batching never affects the output file.
Posts whose cleaned body yields no sentences contribute no rows.
"""

from __future__ import annotations

import importlib
from dataclasses import dataclass
from typing import Callable, Sequence

from .corpusfile import CorpusText, parse_corpus_file
from .embedfile import write_embedding_file
from .errors import EncoderError, UsageError
from .stub import stub_encode

Encoder = Callable[[list[str]], Sequence[Sequence[float]]]

DEFAULT_BATCH_SIZE = 64


@dataclass(frozen=True)
class ExtractorSpec:
    """A fully-specified extraction run.

    Exactly one of ``encoder`` (a ``module:attr`` callable name) and
    ``stub`` must be selected. The stub requires ``dim`` and ``seed``;
    a real encoder defines its own dimension, so ``dim`` is optional
    there (when given it is enforced, and it is required to write a
    well-formed header for a corpus with no sentences) and ``seed`` is
    meaningless.
    """

    corpus_path: str
    output_path: str
    encoder: str | None = None
    stub: bool = False
    dim: int | None = None
    seed: int | None = None
    batch_size: int = DEFAULT_BATCH_SIZE

    def __post_init__(self) -> None:
        if (self.encoder is not None) == self.stub:
            raise UsageError("select exactly one of a real encoder and the stub")
        if self.dim is not None and self.dim < 1:
            raise UsageError(f"dimension must be >= 1, got {self.dim}")
        if self.batch_size < 1:
            raise UsageError(f"batch size must be >= 1, got {self.batch_size}")
        if self.stub:
            if self.dim is None or self.seed is None:
                raise UsageError("the stub requires both a dimension and a seed")
        elif self.seed is not None:
            raise UsageError("a seed applies only to the stub encoder")


@dataclass(frozen=True)
class ExtractResult:
    """What an extraction run produced."""

    output_path: str
    dim: int
    posts: int
    sentences: int


def load_encoder(name: str) -> Encoder:
    """Resolve a ``module:attr`` name to a callable; EncoderError on failure."""
    module_name, sep, attr_path = name.partition(":")
    if not sep or not module_name or not attr_path:
        raise EncoderError(
            f"encoder name {name!r} is not of the form 'module:attr'"
        )
    try:
        target = importlib.import_module(module_name)
    except ImportError as exc:
        raise EncoderError(f"cannot import encoder module {module_name!r}: {exc}") from exc
    for part in attr_path.split("."):
        try:
            target = getattr(target, part)
        except AttributeError:
            raise EncoderError(
                f"encoder module {module_name!r} has no attribute {attr_path!r}"
            ) from None
    if not callable(target):
        raise EncoderError(f"encoder {name!r} is not callable")
    return target


def _encode_batch(
    encoder: Encoder, batch: list[str], name: str, dim: int | None
) -> tuple[list[list[float]], int]:
    """Run one batch; validate shape; return (vectors, dimension)."""
    try:
        raw = encoder(batch)
    except Exception as exc:
        raise EncoderError(f"encoder {name!r} failed on a batch: {exc}") from exc
    vectors: list[list[float]] = []
    try:
        for row in raw:
            vectors.append([float(v) for v in row])
    except (TypeError, ValueError) as exc:
        raise EncoderError(
            f"encoder {name!r} returned non-numeric output: {exc}"
        ) from exc
    if len(vectors) != len(batch):
        raise EncoderError(
            f"encoder {name!r} returned {len(vectors)} vectors "
            f"for a batch of {len(batch)} sentences"
        )
    for vec in vectors:
        if dim is None:
            dim = len(vec)
            if dim < 1:
                raise EncoderError(f"encoder {name!r} returned empty vectors")
        if len(vec) != dim:
            raise EncoderError(
                f"encoder {name!r} returned a {len(vec)}-dim vector, "
                f"expected {dim}"
            )
    if dim is None:
        raise EncoderError(f"encoder {name!r} produced no vectors for a batch")
    return vectors, dim


def extract(spec: ExtractorSpec) -> ExtractResult:
    """Encode every sentence of every post; write the embedding file."""
    corpus: CorpusText = parse_corpus_file(spec.corpus_path)
    work: list[tuple[str, int, str]] = [
        (post.id, index, sentence)
        for post in corpus
        for index, sentence in enumerate(post.sentences)
    ]

    vectors: dict[tuple[str, int], Sequence[float]] = {}
    if spec.stub:
        assert spec.dim is not None and spec.seed is not None
        dim = spec.dim
        for post_id, index, sentence in work:
            vectors[(post_id, index)] = stub_encode(sentence, dim, spec.seed)
    else:
        assert spec.encoder is not None
        encoder = load_encoder(spec.encoder)
        dim = spec.dim  # type: ignore[assignment]
        for begin in range(0, len(work), spec.batch_size):
            chunk = work[begin : begin + spec.batch_size]
            encoded, dim = _encode_batch(
                encoder, [sentence for _, _, sentence in chunk], spec.encoder, dim
            )
            for (post_id, index, _), vec in zip(chunk, encoded):
                vectors[(post_id, index)] = vec
        if not work and dim is None:
            raise UsageError(
                "the corpus has no sentences, so the encoder's dimension is "
                "unknown; pass an explicit dimension to write the header"
            )

    write_embedding_file(spec.output_path, dim, vectors)
    return ExtractResult(
        output_path=spec.output_path,
        dim=dim,
        posts=len(corpus),
        sentences=len(vectors),
    )
