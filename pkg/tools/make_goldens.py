#!/usr/bin/env python3
"""Regenerate the shared golden files under goldens/.

The goldens pin the file formats both programs exchange:

* ``parity_corpus.tsv``     — 20 posts exercising every corpus-format and
  text-cleaning rule (escapes, quote blocks, URLs, abbreviations,
  degenerate posts, unicode, labels and splits).
* ``parity_sentences.tsv``  — the deterministic sentence segmentation of
  that corpus, one row per sentence, body-escaped.
* ``parity_stub_dim8_seed7.tsv`` — the stub embeddings (dim=8, seed=7)
  for that corpus, produced through the training-side command line.
* ``embedding_cases/``      — accept/reject cases for the embedding
  format, with verdicts in ``expected.tsv``. Both programs' test suites
  run the same cases; a file must be accepted by both or rejected by
  both.

Run from the repository root: ``python3 tools/make_goldens.py``.
Everything is deterministic, so reruns are byte-stable.
"""

from __future__ import annotations

import os
import shutil
import sys
import tempfile

from triagekit.cli import main as triagekit_main
from triagekit.corpus import (
    CoarseLabel,
    Corpus,
    TriageLabel,
    make_post,
    save_corpus,
)
from triagekit.ioutil import escape_field, write_text_atomic

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
GOLDENS = os.path.join(ROOT, "goldens")

# (id, thread, split, coarse, granular, body) — bodies chosen to exercise
# every cleaning/segmentation rule at least once.
POSTS: list[tuple[str, str, str, CoarseLabel | None, str, str]] = [
    (
        "p01",
        "t-alpha",
        "train",
        CoarseLabel.GREEN,
        "greenA",
        "Feeling grateful today. The walk by the river helped a lot.",
    ),
    (
        "p02",
        "t-alpha",
        "train",
        CoarseLabel.AMBER,
        "amberA",
        "Worried about tomorrow.\nMy checklist:\n\titem one\n\titem two\nStill anxious tonight.",
    ),
    (
        "p03",
        "t-beta",
        "test",
        CoarseLabel.RED,
        "redA",
        "<blockquote>Earlier someone wrote a long reply here.</blockquote>I feel desperate and frantic right now. Nothing is working!",
    ),
    (
        "p04",
        "t-beta",
        "train",
        CoarseLabel.CRISIS,
        "crisisA",
        "This feels like a farewell. I keep thinking about ending things and the pills in the cabinet.",
    ),
    (
        "p05",
        "t-gamma",
        "",
        None,
        "",
        "I found https://example.org/coping?tips=3 useful last spring. Maybe it helps someone else.",
    ),
    (
        "p06",
        "t-gamma",
        "",
        None,
        "",
        "www.example.com/forums was down again.\nAnyone else see that today?",
    ),
    (
        "p07",
        "t-delta",
        "external",
        CoarseLabel.GREEN,
        "greenB",
        "> thanks for checking in yesterday\n> it meant a lot\nReplying properly now: I am calm and improving.",
    ),
    (
        "p08",
        "t-delta",
        "",
        None,
        "",
        "<blockquote>quoted text only</blockquote>\n> nothing but a quote line\nhttps://example.net/only-a-link",
    ),
    (
        "p09",
        "t-epsilon",
        "train",
        CoarseLabel.AMBER,
        "amberB",
        "Dr. Smith saw me at 9 a.m. today. I tried e.g. breathing drills. J. said to rest vs. pushing through.",
    ),
    (
        "p10",
        "t-epsilon",
        "",
        None,
        "",
        'What now?! I honestly can\'t tell... My sister said "Stay calm!") and left the room.',
    ),
    (
        "p11",
        "t-zeta",
        "test",
        CoarseLabel.GREEN,
        "greenA",
        "I keep a journal at C:\\notes\\day1 on the old laptop. Writing helps me stay steady.",
    ),
    (
        "p12",
        "t-zeta",
        "",
        None,
        "",
        "My sleep log:\t8h\t7h\t6h this week. The numbers are slipping.",
    ),
    (
        "p13",
        "t-eta",
        "",
        None,
        "",
        "Before <blockquote attr='x'>outer <blockquote>inner</blockquote> rest</blockquote> after.</blockquote> Done now.",
    ),
    (
        "p14",
        "t-eta",
        "train",
        CoarseLabel.GREEN,
        "greenB",
        "Le café du matin m'aide. Mes émotions sont plus calmes\u2014merci à tous. \u2602",
    ),
    ("p15", "t-theta", "", None, "", ""),
    ("p16", "t-theta", "", None, "", "Thanks"),
    (
        "p17",
        "t-iota",
        "test",
        CoarseLabel.AMBER,
        "",
        "Week three of the new routine. Sleep is uneven, appetite is fine. I get restless around 2 p.m. and again at night. Tracking it all in the app. Next review is on Friday.",
    ),
    (
        "p18",
        "t-iota",
        "",
        None,
        "",
        "!!! That was the whole message my brother sent. I stared at it for an hour.",
    ),
    (
        "p19",
        "t-kappa",
        "test",
        CoarseLabel.CRISIS,
        "crisisB",
        "   I wrote a goodbye note last night.   \n   Then I deleted it and called the line.   ",
    ),
    (
        "p20",
        "t-alpha",
        "train",
        CoarseLabel.RED,
        "redB",
        "Panicking again — second time today?! It peaks (usually!) around midnight. \"I can't keep doing this.\"",
    ),
]


def build_corpus() -> Corpus:
    posts = []
    labels = {}
    split = {}
    for post_id, thread, split_tag, coarse, granular, body in POSTS:
        posts.append(make_post(post_id, body, thread_id=thread))
        if coarse is not None:
            labels[post_id] = TriageLabel(coarse, granular)
        if split_tag:
            split[post_id] = split_tag
    return Corpus(posts=tuple(posts), labels=labels, split=split)


def write_sentences_file(corpus: Corpus, path: str) -> None:
    rows = ["post_id\tsentence_index\tsentence"]
    for post in corpus.posts:
        for idx, sentence in enumerate(post.sentences):
            rows.append(f"{post.id}\t{idx}\t{escape_field(sentence)}")
    write_text_atomic(path, "\n".join(rows) + "\n")


def dump_stub_embeddings(corpus_path: str, out_path: str) -> None:
    """Produce the stub embedding file through the training-side CLI."""
    with tempfile.TemporaryDirectory() as tmp:
        config_path = os.path.join(tmp, "config.toml")
        write_text_atomic(
            config_path,
            "\n".join(
                [
                    "[run]",
                    "seed = 0",
                    "[corpus]",
                    f'path = "{corpus_path}"',
                    "[features]",
                    "vader = false",
                    "categories = false",
                    "stub_dim = 8",
                    "stub_seed = 7",
                    "dump_embeddings = true",
                ]
            )
            + "\n",
        )
        out_dir = os.path.join(tmp, "artifacts")
        rc = triagekit_main(["featurize", "--config", config_path, "--out", out_dir])
        if rc != 0:
            raise SystemExit(f"featurize failed with exit code {rc}")
        shutil.copyfile(os.path.join(out_dir, "stub_embeddings.tsv"), out_path)


def build_embedding_cases(parity_embeddings: str, cases_dir: str) -> None:
    with open(parity_embeddings, "r", encoding="utf-8") as fh:
        canonical = fh.read()
    lines = canonical.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    header, columns, rows = lines[0], lines[1], lines[2:]

    def emit(name: str, content_lines: list[str]) -> None:
        write_text_atomic(
            os.path.join(cases_dir, name), "\n".join(content_lines) + "\n"
        )

    cases: list[tuple[str, str]] = []

    def case(name: str, verdict: str, content_lines: list[str]) -> None:
        emit(name, content_lines)
        cases.append((name, verdict))

    case("good_canonical.tsv", "accept", [header, columns, *rows])
    case("good_unsorted.tsv", "accept", [header, columns, *rows[::-1]])

    # Alternate float spellings the shared numeric parse admits.
    first = rows[0].split("\t")
    dim = len(first[2].split(","))
    exotic = ",".join(["1e-3", "+0.5", "nan", "inf", "-0.0", "2.", ".5", "1_0"][:dim])
    case(
        "good_float_forms.tsv",
        "accept",
        [header, columns, f"{first[0]}\t{first[1]}\t{exotic}", *rows[1:]],
    )

    case("reject_missing_dim.tsv", "reject", [columns, *rows])
    case("reject_bad_dim.tsv", "reject", ["#dim=eight", columns, *rows])
    case("reject_zero_dim.tsv", "reject", ["#dim=0", columns, *rows])
    case(
        "reject_bad_header.tsv",
        "reject",
        [header, "post\tindex\tvalues", *rows],
    )
    case("reject_missing_row.tsv", "reject", [header, columns, *rows[1:]])
    ragged = rows[0].replace("\t", " ", 1)
    case("reject_ragged_row.tsv", "reject", [header, columns, ragged, *rows[1:]])
    pid, idx, values = rows[0].split("\t")
    short = ",".join(values.split(",")[:-1])
    case(
        "reject_short_vector.tsv",
        "reject",
        [header, columns, f"{pid}\t{idx}\t{short}", *rows[1:]],
    )
    case(
        "reject_unknown_post.tsv",
        "reject",
        [header, columns, *rows, f"ghost\t0\t{values}"],
    )
    case(
        "reject_bad_index.tsv",
        "reject",
        [header, columns, f"{pid}\tone\t{values}", *rows[1:]],
    )
    case(
        "reject_range_index.tsv",
        "reject",
        [header, columns, *rows, f"{pid}\t9999\t{values}"],
    )
    # p15's body is empty, so any row for it is out of range.
    case(
        "reject_degenerate_row.tsv",
        "reject",
        [header, columns, *rows, f"p15\t0\t{values}"],
    )
    case("reject_duplicate.tsv", "reject", [header, columns, *rows, rows[0]])
    bad_value = ",".join(["abc"] + values.split(",")[1:])
    case(
        "reject_non_numeric.tsv",
        "reject",
        [header, columns, f"{pid}\t{idx}\t{bad_value}", *rows[1:]],
    )
    write_text_atomic(os.path.join(cases_dir, "reject_empty_file.tsv"), "")
    cases.append(("reject_empty_file.tsv", "reject"))
    # An extra blank line after the trailing newline reads as a ragged row.
    write_text_atomic(
        os.path.join(cases_dir, "reject_double_trailing_newline.tsv"),
        "\n".join([header, columns, *rows]) + "\n\n",
    )
    cases.append(("reject_double_trailing_newline.tsv", "reject"))

    write_text_atomic(
        os.path.join(cases_dir, "expected.tsv"),
        "\n".join(f"{name}\t{verdict}" for name, verdict in cases) + "\n",
    )


def main() -> int:
    os.makedirs(GOLDENS, exist_ok=True)
    cases_dir = os.path.join(GOLDENS, "embedding_cases")
    os.makedirs(cases_dir, exist_ok=True)

    corpus = build_corpus()
    corpus_path = os.path.join(GOLDENS, "parity_corpus.tsv")
    save_corpus(corpus, corpus_path)
    write_sentences_file(corpus, os.path.join(GOLDENS, "parity_sentences.tsv"))

    embeddings_path = os.path.join(GOLDENS, "parity_stub_dim8_seed7.tsv")
    dump_stub_embeddings(corpus_path, embeddings_path)
    build_embedding_cases(embeddings_path, cases_dir)

    degenerate = [p.id for p in corpus.posts if p.degenerate]
    print(f"corpus: {len(corpus)} posts, degenerate: {degenerate}")
    print(f"sentences: {sum(len(p.sentences) for p in corpus.posts)}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
