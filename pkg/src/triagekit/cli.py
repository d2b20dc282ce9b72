"""Command-line orchestration of the full triage-benchmarking workflow.

One declarative TOML config drives every subcommand; any config field has a
command-line override, and the command line wins. A single master seed fans
out to named subsystem streams (cross-validation, baseline shuffles, pipeline
search, the stub encoder, ...) so that results never depend on scheduling.
Every run writes its artifacts atomically under the output directory plus a
machine-readable manifest (resolved config, config hash, seed, versions,
wall time) sufficient to reproduce it.

Exit codes: 0 success, 1 usage/config errors, 2 data validation errors,
3 runtime failures.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import platform
import sys
import time
from typing import Optional, Sequence

import numpy as np

try:
    import tomllib  # Python >= 3.11
except ModuleNotFoundError:  # pragma: no cover - depends on interpreter
    import tomli as tomllib

from . import __version__
from .analysis import (
    mantel_grid,
    mask_explain,
    pairwise_euclidean,
    permutation_importance,
    save_attributions,
    save_importance_report,
    save_named_matrix,
)
from .automl import SearchConfig, save_leaderboard, search
from .corpus import (
    BENCHMARK_CLASS_PROPORTIONS,
    CoarseLabel,
    Corpus,
    LabelMap,
    default_granular_map,
    gen_synthetic,
    load_corpus,
    load_labelmap,
    save_corpus,
    save_labelmap,
)
from .errors import ConfigError, DataError, TriageKitError
from .evaluation import (
    CVPlan,
    CVResult,
    cross_validate,
    evaluate_heldout,
    format_baseline_report,
    format_metric_report,
    parse_baseline_report,
    random_baseline,
)
from .featurize import (
    CategoryExtractor,
    EmbeddingSet,
    FileEmbeddingExtractor,
    StubEmbeddingExtractor,
    VaderExtractor,
    build_feature_table,
    load_category_lexicon,
    load_embeddings,
    save_embeddings,
    save_feature_table,
    stub_encode,
)
from .ioutil import write_text_atomic
from .model import fit, load_model, parse_pipeline, predict, save_model
from .report import (
    BenchmarkRow,
    emit_benchmark_table,
    emit_highlight_doc,
    emit_violin_data,
    save_violin_data,
)
from .seeds import derive_seed
from .vader import load_valence_lexicon

SUBCOMMANDS = (
    "ingest",
    "featurize",
    "train",
    "crossval",
    "evaluate",
    "automl",
    "mantel",
    "importance",
    "explain",
    "baseline",
    "synth",
    "report",
)

CROSSVAL_FORMAT = "triagekit-crossval/1"
MANIFEST_FORMAT = "triagekit-manifest/1"


# --- configuration -----------------------------------------------------------------


class RunConfig:
    """Nested configuration mapping with override-aware accessors."""

    def __init__(self, data: dict):
        self.data = data

    @classmethod
    def load(cls, path: Optional[str]) -> "RunConfig":
        if path is None:
            return cls({})
        if not os.path.isfile(path):
            raise ConfigError(f"config file not found: {path}")
        with open(path, "rb") as fh:
            try:
                return cls(tomllib.load(fh))
            except tomllib.TOMLDecodeError as exc:
                raise ConfigError(f"{path}: bad config syntax: {exc}") from None

    def override(self, section: str, key: str, value) -> None:
        """Apply one command-line override (None means 'not given')."""
        if value is None:
            return
        self.data.setdefault(section, {})[key] = value

    def get(self, section: str, key: str, default=None):
        block = self.data.get(section, {})
        if not isinstance(block, dict):
            raise ConfigError(f"config section [{section}] must be a table")
        return block.get(key, default)

    def require(self, section: str, key: str):
        value = self.get(section, key)
        if value is None:
            raise ConfigError(f"missing required config field {section}.{key}")
        return value

    def require_file(self, section: str, key: str) -> str:
        path = str(self.require(section, key))
        if not os.path.isfile(path):
            raise ConfigError(f"config field {section}.{key}: file not found: {path}")
        return path

    def optional_file(self, section: str, key: str) -> Optional[str]:
        value = self.get(section, key)
        if value is None:
            return None
        path = str(value)
        if not os.path.isfile(path):
            raise ConfigError(f"config field {section}.{key}: file not found: {path}")
        return path


def _master_seed(cfg: RunConfig) -> int:
    seed = cfg.get("run", "seed")
    if seed is None:
        raise ConfigError(
            "missing required config field run.seed (set it in the config or pass --seed)"
        )
    return int(seed)


def _out_dir(cfg: RunConfig) -> str:
    out = str(cfg.get("run", "out", "artifacts"))
    os.makedirs(out, exist_ok=True)
    return out


def _threads(cfg: RunConfig) -> int:
    threads = int(cfg.get("run", "threads", 1))
    if threads < 1:
        raise ConfigError(f"run.threads must be >= 1, got {threads}")
    # Every subcommand currently executes serially regardless of the pool
    # size, so results are identical for any thread count.
    return threads


# --- shared plumbing ----------------------------------------------------------------


def _load_corpus(cfg: RunConfig) -> Corpus:
    return load_corpus(cfg.require_file("corpus", "path"))


def _effective_labelmap(cfg: RunConfig) -> LabelMap:
    """User label map plus identity entries for the bare coarse tags."""
    entries: dict[str, CoarseLabel] = {c.tag: c for c in CoarseLabel}
    path = cfg.optional_file("corpus", "labelmap")
    if path is not None:
        entries.update(load_labelmap(path).entries)
    return LabelMap(entries)


def _stub_seed(cfg: RunConfig, master_seed: int) -> int:
    configured = cfg.get("features", "stub_seed")
    if configured is not None:
        return int(configured)
    return derive_seed(master_seed, "stub-encoder")


def _build_extractors(cfg: RunConfig, master_seed: int, corpus: Corpus) -> list:
    extractors = []
    if bool(cfg.get("features", "vader", True)):
        lex_path = cfg.optional_file("features", "valence_lexicon")
        lexicon = load_valence_lexicon(lex_path) if lex_path else None
        extractors.append(VaderExtractor(lexicon))
    if bool(cfg.get("features", "categories", True)):
        lex_path = cfg.optional_file("features", "category_lexicon")
        lexicon = load_category_lexicon(lex_path) if lex_path else None
        extractors.append(CategoryExtractor(lexicon))
    stub_dim = cfg.get("features", "stub_dim")
    if stub_dim is not None:
        extractors.append(
            StubEmbeddingExtractor(
                dim=int(stub_dim),
                seed=_stub_seed(cfg, master_seed),
                name=str(cfg.get("features", "stub_name", "stub")),
            )
        )
    emb_path = cfg.optional_file("features", "embeddings")
    if emb_path is not None:
        extractors.append(
            FileEmbeddingExtractor(
                load_embeddings(emb_path, corpus),
                name=str(cfg.get("features", "embeddings_name", "embed")),
            )
        )
    if not extractors:
        raise ConfigError(
            "no feature extractors configured: enable features.vader or "
            "features.categories, or set features.stub_dim / features.embeddings"
        )
    return extractors


def _labeled_ids(corpus: Corpus, split: Optional[str]) -> list[str]:
    ids = [p.id for p in corpus.labeled_posts(split)]
    if not ids:
        where = f"split {split!r}" if split else "the corpus"
        raise DataError(f"no labeled posts in {where}")
    return ids


def _granular_labels(corpus: Corpus, ids: Sequence[str]) -> list[str]:
    out = []
    for pid in ids:
        label = corpus.labels[pid]
        out.append(label.granular if label.granular else label.coarse.tag)
    return out


def _split_arg(cfg: RunConfig, section: str, default: str) -> Optional[str]:
    split = str(cfg.get(section, "split", default))
    return None if split == "all" else split


def _model_path(cfg: RunConfig, section: str, out_dir: str) -> str:
    configured = cfg.get(section, "model")
    path = str(configured) if configured is not None else os.path.join(out_dir, "model.json")
    if not os.path.isfile(path):
        field = f"{section}.model" if configured is not None else f"{section}.model (default)"
        raise ConfigError(f"config field {field}: file not found: {path}")
    return path


def _write_manifest(
    out_dir: str,
    subcommand: str,
    cfg: RunConfig,
    seed: int,
    artifacts: Sequence[str],
    started: float,
    extra: Optional[dict] = None,
) -> str:
    config_text = json.dumps(cfg.data, sort_keys=True, default=str)
    manifest = {
        "format": MANIFEST_FORMAT,
        "subcommand": subcommand,
        "seed": seed,
        "threads": _threads(cfg),
        "config": cfg.data,
        "config_sha256": hashlib.sha256(config_text.encode("utf-8")).hexdigest(),
        "versions": {
            "triagekit": __version__,
            "python": platform.python_version(),
            "numpy": np.__version__,
        },
        "wall_time_s": time.perf_counter() - started,
        "artifacts": sorted(os.path.basename(a) for a in artifacts),
    }
    if extra:
        manifest.update(extra)
    path = os.path.join(out_dir, f"{subcommand}_manifest.json")
    write_text_atomic(path, json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path


# --- crossval artifact --------------------------------------------------------------


def format_cv_result(result: CVResult, pipeline_text: str) -> str:
    lines = [
        f"format = {CROSSVAL_FORMAT}",
        f"pipeline = {pipeline_text}",
        f"folds = {result.plan.folds}",
        f"repeats = {result.plan.repeats}",
        f"n_scores = {len(result.fold_scores)}",
        f"mean_macro_f1_all = {result.mean_macro_f1_all!r}",
        f"mean_macro_f1_excl_green = {result.mean_macro_f1_excl_green!r}",
        "[scores]",
        "repeat\tfold\tmacro_f1_all\tmacro_f1_excl_green\tn_test",
    ]
    for s in result.fold_scores:
        lines.append(
            f"{s.repeat}\t{s.fold}\t{s.macro_f1_all!r}\t{s.macro_f1_excl_green!r}\t{s.n_test}"
        )
    return "\n".join(lines) + "\n"


def read_crossval_summary(path: str) -> dict:
    """Parse the scalar `key = value` lines of a crossval artifact."""
    out: dict = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh.read().splitlines():
            if line.startswith("["):
                break
            if " = " not in line:
                continue
            key, value = line.split(" = ", 1)
            out[key] = value
    if out.get("format") != CROSSVAL_FORMAT:
        raise DataError(f"{path}: not a crossval artifact")
    for key in ("mean_macro_f1_all", "mean_macro_f1_excl_green"):
        out[key] = float(out[key])
    for key in ("folds", "repeats", "n_scores"):
        out[key] = int(out[key])
    return out


# --- subcommand handlers --------------------------------------------------------------


def _cmd_synth(cfg: RunConfig, out_dir: str, seed: int) -> tuple[list[str], dict]:
    n = int(cfg.get("synth", "n", 200))
    probs = cfg.get("synth", "class_probs", list(BENCHMARK_CLASS_PROPORTIONS))
    granular_per_class = int(cfg.get("synth", "granular_per_class", 2))
    test_fraction = float(cfg.get("synth", "test_fraction", 0.25))
    corpus = gen_synthetic(
        derive_seed(seed, "synth"),
        n,
        probs,
        granular_per_class=granular_per_class,
        test_fraction=test_fraction,
    )
    corpus_path = os.path.join(out_dir, "corpus.tsv")
    labelmap_path = os.path.join(out_dir, "labelmap.tsv")
    save_corpus(corpus, corpus_path)
    save_labelmap(default_granular_map(granular_per_class), labelmap_path)
    return [corpus_path, labelmap_path], {"posts": len(corpus)}


def _cmd_ingest(cfg: RunConfig, out_dir: str, seed: int) -> tuple[list[str], dict]:
    corpus = _load_corpus(cfg)
    label_map = _effective_labelmap(cfg)
    for pid, label in corpus.labels.items():
        if label.granular and label.granular not in label_map:
            raise DataError(
                f"post {pid!r} has granular tag {label.granular!r} not in the label map"
            )
    normalized_path = os.path.join(out_dir, "corpus_normalized.tsv")
    save_corpus(corpus, normalized_path)
    counts = corpus.class_counts()
    lines = [
        f"posts = {len(corpus)}",
        f"labeled = {len(corpus.labels)}",
        f"degenerate = {sum(1 for p in corpus.posts if p.degenerate)}",
    ]
    for tag in ("train", "test", "external"):
        lines.append(f"split_{tag} = {sum(1 for t in corpus.split.values() if t == tag)}")
    for coarse in CoarseLabel:
        lines.append(f"class_{coarse.tag} = {counts[coarse]}")
    summary_path = os.path.join(out_dir, "ingest_summary.txt")
    write_text_atomic(summary_path, "\n".join(lines) + "\n")
    return [normalized_path, summary_path], {"posts": len(corpus)}


def _cmd_featurize(cfg: RunConfig, out_dir: str, seed: int) -> tuple[list[str], dict]:
    corpus = _load_corpus(cfg)
    extractors = _build_extractors(cfg, seed, corpus)
    ids = [p.id for p in corpus.posts]
    table = build_feature_table(corpus, extractors, post_ids=ids)
    features_path = os.path.join(out_dir, "features.tsv")
    save_feature_table(table, features_path)
    artifacts = [features_path]
    extra: dict = {"rows": table.n_rows, "columns": table.n_columns}
    stub_dim = cfg.get("features", "stub_dim")
    if stub_dim is not None and bool(cfg.get("features", "dump_embeddings", False)):
        dim = int(stub_dim)
        stub_seed = _stub_seed(cfg, seed)
        vectors = {}
        for post in corpus.posts:
            for idx, sentence in enumerate(post.sentences):
                vectors[(post.id, idx)] = stub_encode(sentence, dim, stub_seed)
        embeddings_path = os.path.join(out_dir, "stub_embeddings.tsv")
        save_embeddings(EmbeddingSet(dim=dim, vectors=vectors), embeddings_path)
        artifacts.append(embeddings_path)
        extra["stub_seed"] = stub_seed
    return artifacts, extra


def _cmd_train(cfg: RunConfig, out_dir: str, seed: int) -> tuple[list[str], dict]:
    corpus = _load_corpus(cfg)
    extractors = _build_extractors(cfg, seed, corpus)
    split = _split_arg(cfg, "train", "train")
    ids = _labeled_ids(corpus, split)
    table = build_feature_table(corpus, extractors, post_ids=ids)
    y = _granular_labels(corpus, ids)
    label_map = _effective_labelmap(cfg)
    pipeline_text = str(cfg.require("pipeline", "text"))
    fp = fit(parse_pipeline(pipeline_text), table, y, label_map, seed=derive_seed(seed, "fit"))
    model_path = os.path.join(out_dir, "model.json")
    save_model(fp, model_path)
    return [model_path], {
        "pipeline": fp.spec.canonical(),
        "train_rows": table.n_rows,
        "warnings": list(fp.warnings),
    }


def _cmd_crossval(cfg: RunConfig, out_dir: str, seed: int) -> tuple[list[str], dict]:
    corpus = _load_corpus(cfg)
    extractors = _build_extractors(cfg, seed, corpus)
    split = _split_arg(cfg, "cv", "train")
    ids = _labeled_ids(corpus, split)
    table = build_feature_table(corpus, extractors, post_ids=ids)
    y = _granular_labels(corpus, ids)
    label_map = _effective_labelmap(cfg)
    pipeline_text = str(cfg.require("pipeline", "text"))
    spec = parse_pipeline(pipeline_text)
    plan = CVPlan(
        folds=int(cfg.get("cv", "folds", 10)),
        repeats=int(cfg.get("cv", "repeats", 5)),
        seed=derive_seed(seed, "cv"),
    )
    result = cross_validate(spec, table, y, label_map, plan)
    crossval_path = os.path.join(out_dir, "crossval.txt")
    write_text_atomic(crossval_path, format_cv_result(result, spec.canonical()))
    return [crossval_path], {
        "mean_macro_f1_all": result.mean_macro_f1_all,
        "mean_macro_f1_excl_green": result.mean_macro_f1_excl_green,
    }


def _cmd_evaluate(cfg: RunConfig, out_dir: str, seed: int) -> tuple[list[str], dict]:
    corpus = _load_corpus(cfg)
    extractors = _build_extractors(cfg, seed, corpus)
    fp = load_model(_model_path(cfg, "evaluate", out_dir))
    split = _split_arg(cfg, "evaluate", "test")
    ids = _labeled_ids(corpus, split)
    table = build_feature_table(corpus, extractors, post_ids=ids)
    y = _granular_labels(corpus, ids)
    report = evaluate_heldout(fp, table, y)
    suffix = split if split else "all"
    metrics_path = os.path.join(out_dir, f"metrics_{suffix}.txt")
    write_text_atomic(metrics_path, format_metric_report(report))
    return [metrics_path], {
        "macro_f1_all": report.macro_f1_all,
        "macro_f1_excl_green": report.macro_f1_excl_green,
        "n": report.n,
    }


def _cmd_automl(cfg: RunConfig, out_dir: str, seed: int) -> tuple[list[str], dict]:
    corpus = _load_corpus(cfg)
    extractors = _build_extractors(cfg, seed, corpus)
    split = _split_arg(cfg, "automl", "train")
    ids = _labeled_ids(corpus, split)
    table = build_feature_table(corpus, extractors, post_ids=ids)
    y = _granular_labels(corpus, ids)
    label_map = _effective_labelmap(cfg)
    config = SearchConfig(
        population_size=int(cfg.get("automl", "population", 20)),
        per_candidate_timeout=float(cfg.get("automl", "per_candidate_timeout", 300.0)),
        total_budget=float(cfg.get("automl", "total_budget", 120.0)),
        generations=int(cfg.get("automl", "generations", 5)),
        parsimony=float(cfg.get("automl", "parsimony", 0.01)),
        mutation_rate=float(cfg.get("automl", "mutation_rate", 0.8)),
        crossover_rate=float(cfg.get("automl", "crossover_rate", 0.2)),
        folds=int(cfg.get("automl", "folds", 3)),
        repeats=int(cfg.get("automl", "repeats", 1)),
        seed=derive_seed(seed, "automl"),
    )
    result = search(config, table, y, label_map)
    leaderboard_path = os.path.join(out_dir, "leaderboard.tsv")
    model_path = os.path.join(out_dir, "model.json")
    save_leaderboard(result.leaderboard, leaderboard_path)
    save_model(result.best_pipeline, model_path)
    return [leaderboard_path, model_path], {
        "best_genome": result.best_record.genome.canonical(),
        "best_penalized_fitness": result.best_record.penalized,
        "evaluations": result.evaluations,
    }


def _cmd_mantel(cfg: RunConfig, out_dir: str, seed: int) -> tuple[list[str], dict]:
    corpus = _load_corpus(cfg)
    extractors = _build_extractors(cfg, seed, corpus)
    if len(extractors) < 2:
        raise ConfigError(
            "mantel needs at least two feature extractors to compare; "
            f"got {len(extractors)}"
        )
    ids = [p.id for p in corpus.posts]
    named = []
    for extractor in extractors:
        table = build_feature_table(corpus, [extractor], post_ids=ids)
        named.append((extractor.name, pairwise_euclidean(table)))
    n_perm = int(cfg.get("mantel", "n_permutations", 999))
    names, r_grid, p_grid = mantel_grid(named, n_perm=n_perm, seed=derive_seed(seed, "mantel"))
    r_path = os.path.join(out_dir, "mantel_r.tsv")
    p_path = os.path.join(out_dir, "mantel_p.tsv")
    save_named_matrix(names, r_grid, r_path)
    save_named_matrix(names, p_grid, p_path)
    return [r_path, p_path], {"feature_sets": list(names), "n_permutations": n_perm}


def _cmd_importance(cfg: RunConfig, out_dir: str, seed: int) -> tuple[list[str], dict]:
    corpus = _load_corpus(cfg)
    extractors = _build_extractors(cfg, seed, corpus)
    fp = load_model(_model_path(cfg, "importance", out_dir))
    split = _split_arg(cfg, "importance", "test")
    ids = _labeled_ids(corpus, split)
    table = build_feature_table(corpus, extractors, post_ids=ids)
    y_coarse = [corpus.labels[pid].coarse for pid in ids]
    report = permutation_importance(
        fp,
        table,
        y_coarse,
        n_repeats=int(cfg.get("importance", "n_repeats", 10)),
        seed=derive_seed(seed, "importance"),
    )
    importance_path = os.path.join(out_dir, "importance.tsv")
    save_importance_report(report, importance_path)
    return [importance_path], {"base_score": report.base_score}


def _cmd_explain(cfg: RunConfig, out_dir: str, seed: int) -> tuple[list[str], dict]:
    corpus = _load_corpus(cfg)
    extractors = _build_extractors(cfg, seed, corpus)
    fp = load_model(_model_path(cfg, "explain", out_dir))
    post_id = str(cfg.require("explain", "post_id"))
    posts = corpus.by_id()
    if post_id not in posts:
        raise DataError(f"no post with id {post_id!r} in the corpus")
    post = posts[post_id]
    attributions = mask_explain(fp, post, extractors)
    attributions_path = os.path.join(out_dir, "attributions.tsv")
    save_attributions(attributions, attributions_path)
    table = build_feature_table(corpus, extractors, post_ids=[post_id])
    granular = predict(fp, table)[0]
    fmt = str(cfg.get("explain", "format", "markdown"))
    doc = emit_highlight_doc(attributions, granular, fmt=fmt)
    doc_path = os.path.join(out_dir, "highlight.md" if fmt == "markdown" else "highlight.html")
    write_text_atomic(doc_path, doc)
    return [attributions_path, doc_path], {
        "post_id": post_id,
        "prediction": f"{attributions[0].original.tag} ({granular})",
    }


def _cmd_baseline(cfg: RunConfig, out_dir: str, seed: int) -> tuple[list[str], dict]:
    counts = cfg.get("baseline", "counts")
    if counts is not None:
        counts = [int(c) for c in counts]
        if len(counts) != len(CoarseLabel) or any(c < 0 for c in counts):
            raise ConfigError(
                f"baseline.counts must be {len(CoarseLabel)} non-negative integers"
            )
        y_true: list[str] = []
        for coarse, count in zip(CoarseLabel, counts):
            y_true.extend([coarse.tag] * count)
    else:
        corpus = _load_corpus(cfg)
        split = _split_arg(cfg, "baseline", "all")
        ids = _labeled_ids(corpus, split)
        y_true = [corpus.labels[pid].coarse.tag for pid in ids]
    report = random_baseline(
        y_true,
        n_shuffles=int(cfg.get("baseline", "n_shuffles", 10000)),
        alpha=float(cfg.get("baseline", "alpha", 0.05)),
        n_tests=int(cfg.get("baseline", "n_tests", 8)),
        seed=derive_seed(seed, "baseline"),
    )
    baseline_path = os.path.join(out_dir, "baseline.txt")
    write_text_atomic(baseline_path, format_baseline_report(report))
    return [baseline_path], {
        "mean_macro_f1": report.mean_macro_f1,
        "threshold": report.threshold,
    }


def _cmd_report(cfg: RunConfig, out_dir: str, seed: int) -> tuple[list[str], dict]:
    artifacts: list[str] = []
    extra: dict = {}
    rows_config = cfg.get("report", "rows")
    if rows_config:
        baseline_path = cfg.require_file("report", "baseline")
        with open(baseline_path, "r", encoding="utf-8") as fh:
            baseline = parse_baseline_report(fh.read())
        rows = []
        for i, row in enumerate(rows_config):
            try:
                rows.append(
                    BenchmarkRow(
                        feature_set=str(row["feature_set"]),
                        trainer=str(row["trainer"]),
                        n_features=int(row["n_features"]),
                        cv_score=float(row["cv_score"]),
                        test_score=float(row["test_score"]),
                        external_score=float(row["external_score"]),
                    )
                )
            except (KeyError, TypeError) as exc:
                raise ConfigError(f"report.rows[{i}]: missing or bad field: {exc}") from None
        benchmark_path = os.path.join(out_dir, "benchmark.tsv")
        write_text_atomic(benchmark_path, emit_benchmark_table(rows, baseline))
        artifacts.append(benchmark_path)
        extra["benchmark_rows"] = len(rows)
    importance_path = cfg.optional_file("report", "importance")
    if importance_path is not None:
        from .analysis import load_importance_report

        corpus = _load_corpus(cfg)
        extractors = _build_extractors(cfg, seed, corpus)
        ids = [p.id for p in corpus.posts]
        table = build_feature_table(corpus, extractors, post_ids=ids)
        labels = [
            corpus.labels[pid].coarse if pid in corpus.labels else None for pid in ids
        ]
        violin = emit_violin_data(
            table,
            labels,
            load_importance_report(importance_path),
            top_k=int(cfg.get("report", "top_k", 10)),
        )
        violin_path = os.path.join(out_dir, "violin.tsv")
        save_violin_data(violin, violin_path)
        artifacts.append(violin_path)
        extra["violin_rows"] = len(violin)
    if not artifacts:
        raise ConfigError(
            "report needs report.rows (benchmark table) and/or "
            "report.importance (violin data)"
        )
    return artifacts, extra


_HANDLERS = {
    "synth": _cmd_synth,
    "ingest": _cmd_ingest,
    "featurize": _cmd_featurize,
    "train": _cmd_train,
    "crossval": _cmd_crossval,
    "evaluate": _cmd_evaluate,
    "automl": _cmd_automl,
    "mantel": _cmd_mantel,
    "importance": _cmd_importance,
    "explain": _cmd_explain,
    "baseline": _cmd_baseline,
    "report": _cmd_report,
}


# --- argument parsing -----------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    """argparse with usage errors mapped to exit code 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    shared = argparse.ArgumentParser(add_help=False)
    shared.add_argument("--config", help="TOML config file")
    shared.add_argument("--seed", type=int, help="master seed (required here or in config)")
    shared.add_argument("--out", help="output directory (default: artifacts)")
    shared.add_argument("--threads", type=int, help="worker pool size (default 1, serial)")
    shared.add_argument("--corpus", help="corpus TSV path")
    shared.add_argument("--labelmap", help="granular->coarse label map TSV path")

    parser = _Parser(prog="triagekit", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="subcommand", metavar="SUBCOMMAND")

    def add(name: str, help_text: str) -> argparse.ArgumentParser:
        return sub.add_parser(name, parents=[shared], help=help_text, add_help=True)

    p = add("synth", "generate a labeled synthetic corpus")
    p.add_argument("--n", type=int, help="number of posts")
    p.add_argument("--test-fraction", type=float, dest="test_fraction")
    p.add_argument("--granular-per-class", type=int, dest="granular_per_class")

    add("ingest", "validate a corpus and write its normalized form")

    p = add("featurize", "build and save the feature table")
    p.add_argument("--stub-dim", type=int, dest="stub_dim", help="add stub embeddings")
    p.add_argument(
        "--dump-embeddings",
        action="store_true",
        dest="dump_embeddings",
        default=None,
        help="also write the stub sentence embeddings file",
    )

    p = add("train", "fit a pipeline on the train split")
    p.add_argument("--pipeline", help="pipeline text, e.g. 'select_k_anova(100)|binarize(0.0)|knn(21)'")
    p.add_argument("--stub-dim", type=int, dest="stub_dim")

    p = add("crossval", "repeated stratified cross-validation of a pipeline")
    p.add_argument("--pipeline", help="pipeline text")
    p.add_argument("--folds", type=int)
    p.add_argument("--repeats", type=int)
    p.add_argument("--stub-dim", type=int, dest="stub_dim")

    p = add("evaluate", "score a saved model on a held-out split")
    p.add_argument("--model", help="model file (default: <out>/model.json)")
    p.add_argument("--split", help="split tag: train, test, external, or all")
    p.add_argument("--stub-dim", type=int, dest="stub_dim")

    p = add("automl", "evolutionary pipeline search")
    p.add_argument("--population", type=int)
    p.add_argument("--generations", type=int)
    p.add_argument("--total-budget", type=float, dest="total_budget")
    p.add_argument("--stub-dim", type=int, dest="stub_dim")

    p = add("mantel", "distance-structure correlation between feature sets")
    p.add_argument("--n-permutations", type=int, dest="n_permutations")
    p.add_argument("--stub-dim", type=int, dest="stub_dim")

    p = add("importance", "permutation feature importance of a saved model")
    p.add_argument("--model")
    p.add_argument("--split")
    p.add_argument("--n-repeats", type=int, dest="n_repeats")
    p.add_argument("--stub-dim", type=int, dest="stub_dim")

    p = add("explain", "token-masking explanation for one post")
    p.add_argument("--model")
    p.add_argument("--post-id", dest="post_id")
    p.add_argument("--format", choices=("markdown", "html"))
    p.add_argument("--stub-dim", type=int, dest="stub_dim")

    p = add("baseline", "chance distribution of the evaluation metric")
    p.add_argument("--counts", help="comma-separated class counts, e.g. 32,36,85,26")
    p.add_argument("--n-shuffles", type=int, dest="n_shuffles")
    p.add_argument("--alpha", type=float)
    p.add_argument("--n-tests", type=int, dest="n_tests")

    p = add("report", "benchmark table and violin-plot data export")
    p.add_argument("--baseline", help="baseline report file")
    p.add_argument("--importance", help="importance TSV for the violin export")
    p.add_argument("--top-k", type=int, dest="top_k")

    return parser


_OVERRIDES = {
    # argparse dest -> (config section, key)
    "seed": ("run", "seed"),
    "out": ("run", "out"),
    "threads": ("run", "threads"),
    "corpus": ("corpus", "path"),
    "labelmap": ("corpus", "labelmap"),
    "n": ("synth", "n"),
    "test_fraction": ("synth", "test_fraction"),
    "granular_per_class": ("synth", "granular_per_class"),
    "stub_dim": ("features", "stub_dim"),
    "dump_embeddings": ("features", "dump_embeddings"),
    "pipeline": ("pipeline", "text"),
    "n_shuffles": ("baseline", "n_shuffles"),
    "alpha": ("baseline", "alpha"),
    "n_tests": ("baseline", "n_tests"),
    "population": ("automl", "population"),
    "generations": ("automl", "generations"),
    "total_budget": ("automl", "total_budget"),
    "n_permutations": ("mantel", "n_permutations"),
    "post_id": ("explain", "post_id"),
    "baseline": ("report", "baseline"),
    "importance": ("report", "importance"),
    "top_k": ("report", "top_k"),
}

_SECTION_OVERRIDES = {
    # (subcommand, dest) -> (section, key) when the flag is section-specific
    ("crossval", "folds"): ("cv", "folds"),
    ("crossval", "repeats"): ("cv", "repeats"),
    ("automl", "folds"): ("automl", "folds"),
    ("evaluate", "model"): ("evaluate", "model"),
    ("evaluate", "split"): ("evaluate", "split"),
    ("importance", "model"): ("importance", "model"),
    ("importance", "split"): ("importance", "split"),
    ("importance", "n_repeats"): ("importance", "n_repeats"),
    ("explain", "model"): ("explain", "model"),
    ("explain", "format"): ("explain", "format"),
}


def _resolve_config(args: argparse.Namespace) -> RunConfig:
    cfg = RunConfig.load(args.config)
    for dest, value in vars(args).items():
        if dest in ("config", "subcommand"):
            continue
        target = _SECTION_OVERRIDES.get((args.subcommand, dest)) or _OVERRIDES.get(dest)
        if target is None:
            continue
        cfg.override(target[0], target[1], value)
    if args.subcommand == "baseline" and getattr(args, "counts", None) is not None:
        cfg.override("baseline", "counts", [int(p) for p in str(args.counts).split(",")])
    return cfg


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.subcommand is None:
        parser.print_usage(sys.stderr)
        print("error: a subcommand is required", file=sys.stderr)
        return 1
    try:
        cfg = _resolve_config(args)
        seed = _master_seed(cfg)
        out_dir = _out_dir(cfg)
        _threads(cfg)
        started = time.perf_counter()
        artifacts, extra = _HANDLERS[args.subcommand](cfg, out_dir, seed)
        manifest_path = _write_manifest(
            out_dir, args.subcommand, cfg, seed, artifacts, started, extra
        )
        for path in artifacts + [manifest_path]:
            print(f"wrote {path}")
        return 0
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except TriageKitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
