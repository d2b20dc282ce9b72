"""Evolutionary search over classifier pipelines.

Candidates are scored by repeated stratified CV on the macro F1 that
excludes the lowest-urgency class, minus a linear parsimony penalty per
extra component. Selection is tournament-of-3 with single elitism, so the
best penalized fitness never decreases across generations. Budgets are
enforced cooperatively between CV folds: a candidate that overruns its
deadline is recorded with fitness -inf rather than killed.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .corpus import LabelMap, map_label
from .errors import ConfigError, DataError, SearchBudgetError
from .evaluation import COARSE_ORDER, CVPlan, iter_cv_splits, macro_f1, stratified_repeated_cv
from .featurize import FeatureTable
from .ioutil import write_text_atomic
from .model import (
    Component,
    FittedPipeline,
    PipelineSpec,
    fit,
    majority_pipeline,
    parse_pipeline,
    predict_coarse,
    reference_pipeline,
)
from .seeds import rng_for

LEADERBOARD_COLUMNS = (
    "genome",
    "mean_score",
    "score_std",
    "components",
    "penalized_fitness",
    "wall_time",
)

_MAX_PREPROCESSORS = 4


@dataclass(frozen=True)
class SearchConfig:
    population_size: int = 200
    per_candidate_timeout: float = 300.0
    total_budget: float = 120.0
    generations: int = 5
    parsimony: float = 0.01
    mutation_rate: float = 0.8
    crossover_rate: float = 0.2
    folds: int = 3
    repeats: int = 1
    seed: int = 0

    def __post_init__(self) -> None:
        if self.population_size < 2:
            raise ConfigError(f"population_size must be >= 2, got {self.population_size}")
        if self.per_candidate_timeout <= 0 or self.total_budget <= 0:
            raise ConfigError("search budgets must be > 0")
        if self.generations < 1:
            raise ConfigError(f"generations must be >= 1, got {self.generations}")
        if self.parsimony < 0:
            raise ConfigError(f"parsimony must be >= 0, got {self.parsimony}")
        if not (0.0 <= self.mutation_rate <= 1.0 and 0.0 <= self.crossover_rate <= 1.0):
            raise ConfigError("operator rates must lie in [0, 1]")
        if self.mutation_rate + self.crossover_rate > 1.0 + 1e-12:
            raise ConfigError("mutation_rate + crossover_rate must not exceed 1")

    def cv_plan(self) -> CVPlan:
        return CVPlan(folds=self.folds, repeats=self.repeats, seed=self.seed)


@dataclass(frozen=True)
class FitnessRecord:
    genome: PipelineSpec
    mean_score: float
    score_std: float
    n_components: int
    penalized: float
    wall_time: float = field(compare=False)
    timed_out: bool = False
    warnings: tuple[str, ...] = field(default=(), compare=False)


def rank_key(record: FitnessRecord) -> tuple[float, int, str]:
    """Total order: higher penalized fitness, then fewer components, then text."""
    return (-record.penalized, record.n_components, record.genome.canonical())


class EvalCache:
    """Fitness records keyed by canonical genome text, plus a refit counter."""

    def __init__(self) -> None:
        self.records: dict[str, FitnessRecord] = {}
        self.evaluations = 0


# --- genome operators ----------------------------------------------------------


def _random_preprocessor(rng: np.random.Generator) -> Component:
    kind = ("scale", "binarize", "select_k_anova")[int(rng.integers(3))]
    if kind == "scale":
        return Component("scale")
    if kind == "binarize":
        return Component("binarize", (float(rng.uniform(-2.0, 2.0)),))
    return Component("select_k_anova", (int(rng.integers(1, 201)),))


def _random_classifier(rng: np.random.Generator) -> Component:
    kind = ("knn", "linear_svm", "logistic", "majority")[int(rng.integers(4))]
    if kind == "knn":
        return Component("knn", (int(rng.integers(1, 52)),))
    if kind == "linear_svm":
        return Component(
            "linear_svm",
            (float(10.0 ** rng.uniform(-3, 3)), int(rng.integers(5, 101))),
        )
    if kind == "logistic":
        return Component(
            "logistic",
            (float(10.0 ** rng.uniform(-4, 1)), int(rng.integers(5, 101))),
        )
    return Component("majority")


def random_genome(rng: np.random.Generator) -> PipelineSpec:
    preproc = tuple(
        _random_preprocessor(rng) for _ in range(int(rng.integers(0, 3)))
    )
    return PipelineSpec(preproc + (_random_classifier(rng),))


def _jitter(component: Component, rng: np.random.Generator) -> Component:
    """Perturb one hyperparameter, clamped back into its valid range."""
    if component.kind == "binarize":
        return Component("binarize", (component.args[0] + float(rng.normal(0, 0.25)),))
    if component.kind == "select_k_anova":
        k = max(1, component.args[0] + int(rng.integers(-20, 21)))
        return Component("select_k_anova", (k,))
    if component.kind == "knn":
        k = max(1, component.args[0] + int(rng.integers(-5, 6)))
        return Component("knn", (k,))
    if component.kind in ("linear_svm", "logistic"):
        scale_or_l2, epochs = component.args
        if rng.random() < 0.5:
            factor = float(math.exp(rng.normal(0, 0.5)))
            value = scale_or_l2 * factor
            if component.kind == "linear_svm":
                value = min(max(value, 1e-6), 1e6)
            else:
                value = min(max(value, 0.0), 1e6)
        else:
            value = scale_or_l2
            epochs = max(1, epochs + int(rng.integers(-10, 11)))
        return Component(component.kind, (value, epochs))
    return component  # scale/majority have nothing to jitter


def mutate(genome: PipelineSpec, rng: np.random.Generator) -> PipelineSpec:
    """One of insert / delete / replace / jitter; always returns a valid genome.

    The terminal classifier is never deleted. After bounded retries the
    genome is returned unchanged.
    """
    for _ in range(8):
        preproc = list(genome.components[:-1])
        classifier = genome.components[-1]
        op = ("insert", "delete", "replace", "jitter")[int(rng.integers(4))]
        if op == "insert" and len(preproc) < _MAX_PREPROCESSORS:
            pos = int(rng.integers(len(preproc) + 1))
            preproc.insert(pos, _random_preprocessor(rng))
        elif op == "delete" and preproc:
            preproc.pop(int(rng.integers(len(preproc))))
        elif op == "replace":
            pos = int(rng.integers(len(preproc) + 1))
            if pos == len(preproc):
                classifier = _random_classifier(rng)
            else:
                preproc[pos] = _random_preprocessor(rng)
        elif op == "jitter":
            pos = int(rng.integers(len(preproc) + 1))
            if pos == len(preproc):
                classifier = _jitter(classifier, rng)
            else:
                preproc[pos] = _jitter(preproc[pos], rng)
        else:
            continue  # inapplicable op drawn; retry
        candidate = PipelineSpec(tuple(preproc) + (classifier,))
        if candidate != genome:
            return candidate
    return genome


def crossover(
    first: PipelineSpec, second: PipelineSpec, rng: np.random.Generator
) -> PipelineSpec:
    """Splice one parent's preprocessor prefix onto the other's suffix."""
    head = list(first.components[:-1])
    tail = list(second.components[:-1])
    cut_head = int(rng.integers(len(head) + 1))
    cut_tail = int(rng.integers(len(tail) + 1))
    preproc = (head[:cut_head] + tail[cut_tail:])[:_MAX_PREPROCESSORS]
    classifier = (first if rng.random() < 0.5 else second).components[-1]
    return PipelineSpec(tuple(preproc) + (classifier,))


# --- fitness -------------------------------------------------------------------


def evaluate_genome(
    genome: PipelineSpec,
    table: FeatureTable,
    y: Sequence[str],
    label_map: LabelMap,
    plan: CVPlan,
    timeout: float,
    parsimony: float = 0.01,
    cache: Optional[EvalCache] = None,
) -> FitnessRecord:
    """Reduced-CV fitness with a cooperative deadline checked between folds."""
    key = genome.canonical()
    if cache is not None and key in cache.records:
        return cache.records[key]
    start = time.perf_counter()
    assignments = stratified_repeated_cv(plan, y)
    coarse_true = [map_label(label, label_map) for label in y]
    scores: list[float] = []
    warnings: set[str] = set()
    timed_out = False
    for _r, _f, train_idx, test_idx in iter_cv_splits(assignments):
        if time.perf_counter() - start > timeout:
            timed_out = True
            break
        train_table = table.subset_rows([table.row_ids[i] for i in train_idx])
        test_table = table.subset_rows([table.row_ids[i] for i in test_idx])
        fitted = fit(genome, train_table, [y[i] for i in train_idx], label_map, seed=plan.seed)
        warnings.update(fitted.warnings)
        got = predict_coarse(fitted, test_table)
        truth = [coarse_true[i] for i in test_idx]
        scores.append(macro_f1(truth, got, COARSE_ORDER[1:]))
    wall = time.perf_counter() - start
    if cache is not None:
        cache.evaluations += 1
    if timed_out:
        record = FitnessRecord(
            genome=genome,
            mean_score=-math.inf,
            score_std=0.0,
            n_components=genome.n_components,
            penalized=-math.inf,
            wall_time=wall,
            timed_out=True,
            warnings=tuple(sorted(warnings)),
        )
    else:
        mean = sum(scores) / len(scores)
        std = float(np.std(np.array(scores))) if len(scores) > 1 else 0.0
        record = FitnessRecord(
            genome=genome,
            mean_score=mean,
            score_std=std,
            n_components=genome.n_components,
            penalized=mean - parsimony * (genome.n_components - 1),
            wall_time=wall,
            timed_out=False,
            warnings=tuple(sorted(warnings)),
        )
    if cache is not None:
        cache.records[key] = record
    return record


# --- search --------------------------------------------------------------------


@dataclass(frozen=True)
class SearchResult:
    leaderboard: tuple[FitnessRecord, ...]
    best_record: FitnessRecord
    best_pipeline: FittedPipeline
    best_per_generation: tuple[float, ...]
    evaluations: int
    wall_time: float


def search(
    config: SearchConfig,
    table: FeatureTable,
    y: Sequence[str],
    label_map: LabelMap,
) -> SearchResult:
    """Run the evolutionary search and refit the winner on all training rows.

    Deterministic for a fixed seed in serial execution. Raises
    SearchBudgetError (carrying the partial evaluation log) if the total
    budget expires before any candidate completes its CV.
    """
    if len(y) != table.n_rows:
        raise DataError(f"{table.n_rows} rows but {len(y)} labels")
    start = time.perf_counter()
    deadline = start + config.total_budget
    plan = config.cv_plan()
    rng = rng_for(config.seed, "search")
    cache = EvalCache()

    def out_of_budget() -> bool:
        return time.perf_counter() >= deadline

    def evaluate(genome: PipelineSpec) -> Optional[FitnessRecord]:
        if genome.canonical() in cache.records:
            return cache.records[genome.canonical()]
        if out_of_budget():
            return None
        candidate_timeout = min(
            config.per_candidate_timeout, deadline - time.perf_counter()
        )
        return evaluate_genome(
            genome, table, y, label_map, plan, candidate_timeout,
            parsimony=config.parsimony, cache=cache,
        )

    genomes = [majority_pipeline(), reference_pipeline()]
    while len(genomes) < config.population_size:
        genomes.append(random_genome(rng))
    genomes = genomes[: config.population_size]

    population: list[FitnessRecord] = []
    stopped = False
    for genome in genomes:
        record = evaluate(genome)
        if record is None:
            stopped = True
            break
        population.append(record)
    if not any(not r.timed_out for r in population):
        raise SearchBudgetError(
            "search budget exhausted before one full candidate evaluation",
            records=list(population),
        )

    best_per_generation = [min(population, key=rank_key).penalized]
    for _generation in range(1, config.generations):
        if stopped or out_of_budget():
            break
        elite = min(population, key=rank_key)
        offspring: list[FitnessRecord] = [elite]
        while len(offspring) < config.population_size:
            draw = rng.random()
            if draw < config.crossover_rate:
                child = crossover(
                    _tournament(population, rng).genome,
                    _tournament(population, rng).genome,
                    rng,
                )
            elif draw < config.crossover_rate + config.mutation_rate:
                child = mutate(_tournament(population, rng).genome, rng)
            else:
                child = _tournament(population, rng).genome
            record = evaluate(child)
            if record is None:
                stopped = True
                break
            offspring.append(record)
        if len(offspring) > 1:
            population = offspring
        best_per_generation.append(min(population, key=rank_key).penalized)

    leaderboard = tuple(sorted(cache.records.values(), key=rank_key))
    best_record = leaderboard[0]
    best_pipeline = fit(best_record.genome, table, y, label_map, seed=config.seed)
    return SearchResult(
        leaderboard=leaderboard,
        best_record=best_record,
        best_pipeline=best_pipeline,
        best_per_generation=tuple(best_per_generation),
        evaluations=cache.evaluations,
        wall_time=time.perf_counter() - start,
    )


def _tournament(
    population: Sequence[FitnessRecord], rng: np.random.Generator, size: int = 3
) -> FitnessRecord:
    picks = [population[int(i)] for i in rng.integers(len(population), size=size)]
    return min(picks, key=rank_key)


# --- leaderboard file ------------------------------------------------------------


def save_leaderboard(records: Sequence[FitnessRecord], path: str) -> None:
    lines = ["\t".join(LEADERBOARD_COLUMNS)]
    for r in records:
        lines.append(
            "\t".join(
                [
                    r.genome.canonical(),
                    repr(r.mean_score),
                    repr(r.score_std),
                    str(r.n_components),
                    repr(r.penalized),
                    repr(r.wall_time),
                ]
            )
        )
    write_text_atomic(path, "\n".join(lines) + "\n")


def load_leaderboard(path: str) -> list[FitnessRecord]:
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or tuple(lines[0].split("\t")) != LEADERBOARD_COLUMNS:
        raise DataError(f"{path}: not a leaderboard file")
    records = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line:
            continue
        parts = line.split("\t")
        if len(parts) != len(LEADERBOARD_COLUMNS):
            raise DataError(f"{path}:{lineno}: expected {len(LEADERBOARD_COLUMNS)} columns")
        genome = parse_pipeline(parts[0])
        mean = float(parts[1])
        records.append(
            FitnessRecord(
                genome=genome,
                mean_score=mean,
                score_std=float(parts[2]),
                n_components=int(parts[3]),
                penalized=float(parts[4]),
                wall_time=float(parts[5]),
                timed_out=math.isinf(mean) and mean < 0,
            )
        )
    return records
