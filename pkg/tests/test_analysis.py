"""Distance matrices, Mantel test, permutation importance, token masking."""

import itertools
import math
from fractions import Fraction

import numpy as np
import pytest

from triagekit.analysis import (
    DistanceMatrix,
    ImportanceEntry,
    ImportanceReport,
    TokenAttribution,
    load_attributions,
    load_importance_report,
    mantel,
    mantel_grid,
    mask_explain,
    pairwise_euclidean,
    permutation_importance,
    save_attributions,
    save_importance_report,
    save_named_matrix,
    shift_to_color,
)
from triagekit.corpus import CoarseLabel, Corpus, LabelMap, make_post
from triagekit.errors import ConfigError, DataError, FeatureMismatchError
from triagekit.featurize import (
    CategoryExtractor,
    ColumnDesc,
    FeatureTable,
    build_feature_table,
    packaged_category_lexicon,
)
from triagekit.model import fit, majority_pipeline, parse_pipeline

GREEN, AMBER, RED, CRISIS = (
    CoarseLabel.GREEN,
    CoarseLabel.AMBER,
    CoarseLabel.RED,
    CoarseLabel.CRISIS,
)

COARSE_MAP = LabelMap({"green": GREEN, "amber": AMBER, "red": RED, "crisis": CRISIS})


def make_table(matrix, names=None, row_ids=None):
    matrix = np.asarray(matrix, dtype=np.float64)
    if names is None:
        names = [f"ext|f{j}|post" for j in range(matrix.shape[1])]
    if row_ids is None:
        row_ids = tuple(f"p{i:04d}" for i in range(matrix.shape[0]))
    return FeatureTable(
        row_ids=tuple(row_ids),
        columns=tuple(ColumnDesc.from_name(n) for n in names),
        values=matrix,
    )


def distance_from_upper(n, upper):
    values = np.zeros((n, n), dtype=np.float64)
    it = iter(upper)
    for i in range(n):
        for j in range(i + 1, n):
            values[i, j] = values[j, i] = float(next(it))
    return DistanceMatrix(values=values)


# --- distance matrices ------------------------------------------------------------


class TestDistanceMatrix:
    def test_valid_matrix_accepted_and_frozen(self):
        dm = distance_from_upper(3, [1.0, 2.0, 3.0])
        assert dm.n == 3
        with pytest.raises(ValueError):
            dm.values[0, 1] = 9.0

    @pytest.mark.parametrize(
        "values",
        [
            np.zeros((2, 3)),
            np.array([[0.0, 1.0], [2.0, 0.0]]),  # asymmetric
            np.array([[0.0, -1.0], [-1.0, 0.0]]),  # negative
            np.array([[1.0, 2.0], [2.0, 0.0]]),  # nonzero diagonal
            np.array([[0.0, np.nan], [np.nan, 0.0]]),
        ],
    )
    def test_invalid_matrices_rejected(self, values):
        with pytest.raises(DataError):
            DistanceMatrix(values=values)


class TestPairwiseEuclidean:
    def test_identical_rows_all_zero(self):
        table = make_table([[1.0, 2.0]] * 4)
        dm = pairwise_euclidean(table)
        assert np.all(dm.values == 0.0)

    def test_three_four_five_triangle(self):
        table = make_table([[0.0, 0.0], [3.0, 4.0]])
        dm = pairwise_euclidean(table)
        assert dm.values[0, 1] == 5.0
        assert dm.values[1, 0] == 5.0

    def test_brute_force_oracle_ten_rows(self):
        rng = np.random.default_rng(97)
        matrix = rng.normal(size=(10, 6))
        dm = pairwise_euclidean(make_table(matrix))
        for i in range(10):
            for j in range(10):
                expected = math.dist(matrix[i], matrix[j])
                assert abs(dm.values[i, j] - expected) <= 1e-9

    def test_exactly_symmetric_with_zero_diagonal(self):
        rng = np.random.default_rng(101)
        dm = pairwise_euclidean(make_table(rng.normal(size=(12, 4))))
        assert np.array_equal(dm.values, dm.values.T)
        assert np.all(np.diag(dm.values) == 0.0)


# --- Mantel test --------------------------------------------------------------------


class TestMantel:
    def test_identical_matrices_r_exactly_one(self):
        dm = distance_from_upper(5, [3, 1, 4, 7, 5, 9, 2, 6, 8, 11])
        result = mantel(dm, dm, n_perm=999, seed=0)
        assert result.r == 1.0

    def test_positive_affine_r_exactly_one(self):
        # upper-triangle sum 50 is divisible by the 10 pairs, so the
        # centered entries of 2a+1 are exactly twice those of a
        upper = [1, 2, 3, 4, 5, 6, 7, 8, 9, 5]
        d1 = distance_from_upper(5, upper)
        d2 = distance_from_upper(5, [2 * u + 1 for u in upper])
        result = mantel(d1, d2, n_perm=999, seed=0)
        assert result.r == 1.0

    def test_r_symmetric_in_arguments(self):
        rng = np.random.default_rng(103)
        d1 = pairwise_euclidean(make_table(rng.normal(size=(8, 3))))
        d2 = pairwise_euclidean(make_table(rng.normal(size=(8, 3))))
        assert mantel(d1, d2, n_perm=99, seed=1).r == mantel(d2, d1, n_perm=99, seed=1).r

    def test_r_invariant_under_joint_relabeling(self):
        rng = np.random.default_rng(107)
        d1 = pairwise_euclidean(make_table(rng.normal(size=(7, 3))))
        d2 = pairwise_euclidean(make_table(rng.normal(size=(7, 3))))
        base = mantel(d1, d2, n_perm=9, seed=2).r
        perm = rng.permutation(7)
        d1p = DistanceMatrix(values=d1.values[np.ix_(perm, perm)])
        d2p = DistanceMatrix(values=d2.values[np.ix_(perm, perm)])
        assert mantel(d1p, d2p, n_perm=9, seed=2).r == pytest.approx(base, abs=1e-12)

    def test_exhaustive_p_matches_exact_enumeration(self):
        upper_a = [3, 1, 4, 7, 5, 9, 2, 6, 8, 11]
        upper_b = [2, 12, 6, 5, 9, 1, 8, 3, 10, 4]
        d1 = distance_from_upper(5, upper_a)
        d2 = distance_from_upper(5, upper_b)
        result = mantel(d1, d2, n_perm=999, seed=0)
        assert result.exhaustive
        assert result.n_permutations == 120

        # exact-rational oracle: variance of the permuted triangle is
        # permutation-invariant, so |r_perm| >= |r_obs| iff N_perm^2 >= N_obs^2
        a = np.zeros((5, 5))
        b = np.zeros((5, 5))
        it_a, it_b = iter(upper_a), iter(upper_b)
        for i in range(5):
            for j in range(i + 1, 5):
                a[i, j] = a[j, i] = next(it_a)
                b[i, j] = b[j, i] = next(it_b)
        pairs = [(i, j) for i in range(5) for j in range(i + 1, 5)]
        mean_a = Fraction(sum(int(a[i, j]) for i, j in pairs), len(pairs))
        mean_b = Fraction(sum(int(b[i, j]) for i, j in pairs), len(pairs))

        def numerator(perm):
            total = Fraction(0)
            for i, j in pairs:
                total += (Fraction(int(a[i, j])) - mean_a) * (
                    Fraction(int(b[perm[i], perm[j]])) - mean_b
                )
            return total

        n_obs = numerator(tuple(range(5)))
        hits = sum(
            1
            for perm in itertools.permutations(range(5))
            if numerator(perm) ** 2 >= n_obs**2
        )
        assert hits >= 1
        assert result.p == hits / 120

    def test_exhaustive_p_floor_for_strong_structure(self):
        rng = np.random.default_rng(109)
        d1 = pairwise_euclidean(make_table(rng.normal(size=(5, 4))))
        result = mantel(d1, d1, n_perm=999, seed=0)
        assert result.p == 1 / 120

    def test_sampled_path_properties(self):
        rng = np.random.default_rng(113)
        d1 = pairwise_euclidean(make_table(rng.normal(size=(9, 4))))
        d2 = pairwise_euclidean(make_table(rng.normal(size=(9, 4))))
        result = mantel(d1, d2, n_perm=199, seed=5)
        assert not result.exhaustive
        assert result.n_permutations == 199
        assert 0.0 < result.p <= 1.0
        assert result.p >= 1 / 200
        again = mantel(d1, d2, n_perm=199, seed=5)
        assert again == result

    def test_size_mismatch_rejected(self):
        d1 = distance_from_upper(3, [1, 2, 3])
        d2 = distance_from_upper(4, [1, 2, 3, 4, 5, 6])
        with pytest.raises(DataError):
            mantel(d1, d2)

    def test_too_few_points_rejected(self):
        d = distance_from_upper(2, [1.0])
        with pytest.raises(DataError):
            mantel(d, d)

    def test_constant_triangle_rejected(self):
        d1 = distance_from_upper(4, [2.0] * 6)
        d2 = distance_from_upper(4, [1, 2, 3, 4, 5, 6])
        with pytest.raises(DataError):
            mantel(d1, d2)

    def test_bad_n_perm_rejected(self):
        d = distance_from_upper(3, [1, 2, 3])
        with pytest.raises(ConfigError):
            mantel(d, d, n_perm=0)


class TestMantelGrid:
    def _three(self):
        rng = np.random.default_rng(127)
        return [
            (name, pairwise_euclidean(make_table(rng.normal(size=(6, 3)))))
            for name in ("alpha", "beta", "gamma")
        ]

    def test_grid_shape_and_symmetry(self):
        names, r_grid, p_grid = mantel_grid(self._three(), n_perm=99, seed=1)
        assert names == ("alpha", "beta", "gamma")
        assert np.array_equal(r_grid, r_grid.T)
        assert np.array_equal(p_grid, p_grid.T)
        assert np.all(np.diag(r_grid) == 1.0)

    def test_duplicate_names_rejected(self):
        named = self._three()
        named[1] = ("alpha", named[1][1])
        with pytest.raises(ConfigError):
            mantel_grid(named)

    def test_named_matrix_file_layout(self, tmp_path):
        names, r_grid, _ = mantel_grid(self._three(), n_perm=99, seed=1)
        path = str(tmp_path / "grid.tsv")
        save_named_matrix(names, r_grid, path)
        lines = open(path, encoding="utf-8").read().splitlines()
        assert lines[0] == "\talpha\tbeta\tgamma"
        assert lines[1].startswith("alpha\t")
        assert len(lines) == 4
        cell = lines[1].split("\t")[1]
        assert float(cell) == 1.0


# --- permutation importance ----------------------------------------------------------


class TestPermutationImportance:
    def _planted(self, seed=131):
        # column 0 fully determines the label; columns 1-2 are noise
        rng = np.random.default_rng(seed)
        n = 40
        labels = ["green" if i % 2 == 0 else "crisis" for i in range(n)]
        signal = np.array([0.0 if t == "green" else 5.0 for t in labels])
        matrix = np.column_stack([signal, rng.normal(size=n), rng.normal(size=n)])
        table = make_table(matrix)
        fp = fit(parse_pipeline("knn(1)"), table, labels, COARSE_MAP)
        coarse = [GREEN if t == "green" else CRISIS for t in labels]
        return fp, table, coarse

    def test_planted_signal_column_has_maximal_drop(self):
        fp, table, coarse = self._planted()
        report = permutation_importance(fp, table, coarse, n_repeats=5, seed=3)
        assert report.entries[0].column == "ext|f0|post"
        assert report.entries[0].mean_drop > 0.05
        assert all(
            report.entries[0].mean_drop > e.mean_drop for e in report.entries[1:]
        )
        assert report.base_score == pytest.approx(1 / 3)  # crisis perfect, amber/red absent

    def test_constant_column_drop_exactly_zero(self):
        rng = np.random.default_rng(137)
        matrix = np.column_stack([rng.normal(size=20), np.full(20, 7.0)])
        labels = ["green"] * 10 + ["crisis"] * 10
        table = make_table(matrix)
        fp = fit(parse_pipeline("knn(3)"), table, labels, COARSE_MAP)
        coarse = [GREEN] * 10 + [CRISIS] * 10
        report = permutation_importance(fp, table, coarse, n_repeats=4, seed=4)
        constant = next(e for e in report.entries if e.column == "ext|f1|post")
        assert constant.mean_drop == 0.0
        assert constant.std_drop == 0.0

    def test_unselected_column_drop_exactly_zero(self):
        fp_table_coarse = self._planted(seed=139)
        _, table, coarse = fp_table_coarse
        labels = ["green" if c == GREEN else "crisis" for c in coarse]
        fp = fit(parse_pipeline("select_k_anova(1)|knn(1)"), table, labels, COARSE_MAP)
        report = permutation_importance(fp, table, coarse, n_repeats=3, seed=5)
        for entry in report.entries:
            if entry.column != "ext|f0|post":
                assert entry.mean_drop == 0.0

    def test_deterministic_across_runs(self):
        fp, table, coarse = self._planted(seed=149)
        first = permutation_importance(fp, table, coarse, n_repeats=3, seed=6)
        second = permutation_importance(fp, table, coarse, n_repeats=3, seed=6)
        assert first == second

    def test_entries_sorted_by_mean_drop_descending(self):
        fp, table, coarse = self._planted(seed=151)
        report = permutation_importance(fp, table, coarse, n_repeats=3, seed=7)
        drops = [e.mean_drop for e in report.entries]
        assert drops == sorted(drops, reverse=True)

    def test_single_repeat_has_zero_std(self):
        fp, table, coarse = self._planted(seed=157)
        report = permutation_importance(fp, table, coarse, n_repeats=1, seed=8)
        assert all(e.std_drop == 0.0 for e in report.entries)
        assert all(e.n_repeats == 1 for e in report.entries)

    def test_bad_arguments_rejected(self):
        fp, table, coarse = self._planted(seed=163)
        with pytest.raises(ConfigError):
            permutation_importance(fp, table, coarse, n_repeats=0)
        with pytest.raises(DataError):
            permutation_importance(fp, table, coarse[:-1])

    def test_report_file_round_trip(self, tmp_path):
        fp, table, coarse = self._planted(seed=167)
        report = permutation_importance(fp, table, coarse, n_repeats=2, seed=9)
        path = str(tmp_path / "importance.tsv")
        save_importance_report(report, path)
        assert load_importance_report(path) == report

    def test_bad_report_file_rejected(self, tmp_path):
        path = str(tmp_path / "importance.tsv")
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("column\tmean_drop\n")
        with pytest.raises(DataError):
            load_importance_report(path)


# --- token masking ---------------------------------------------------------------------


def category_training_corpus():
    posts = (
        make_post("t1", "I am grateful today."),
        make_post("t2", "I feel worried and anxious."),
        make_post("t3", "I am desperate and unsafe."),
        make_post("t4", "I took an overdose of pills."),
    )
    labels = ["green", "amber", "red", "crisis"]
    return Corpus(posts=posts), labels


def fit_category_knn():
    corpus, labels = category_training_corpus()
    extractors = [CategoryExtractor(packaged_category_lexicon())]
    table = build_feature_table(corpus, extractors, post_ids=[p.id for p in corpus.posts])
    fp = fit(parse_pipeline("knn(1)"), table, labels, COARSE_MAP)
    return fp, extractors


class TestMaskExplain:
    def test_majority_classifier_all_shifts_zero(self):
        corpus, labels = category_training_corpus()
        extractors = [CategoryExtractor(packaged_category_lexicon())]
        table = build_feature_table(corpus, extractors, post_ids=[p.id for p in corpus.posts])
        fp = fit(majority_pipeline(), table, ["green"] * 3 + ["crisis"], COARSE_MAP)
        post = make_post("q1", "I feel calm near the window today.")
        attributions = mask_explain(fp, post, extractors)
        assert len(attributions) == 7
        assert all(a.shift == 0 for a in attributions)
        assert all(a.original == a.masked for a in attributions)

    def test_masking_planted_crisis_word_lowers_severity(self):
        fp, extractors = fit_category_knn()
        post = make_post("q2", "Tonight I wrote a goodbye letter.")
        attributions = mask_explain(fp, post, extractors)
        assert len(attributions) == 6
        by_token = {a.token: a for a in attributions}
        assert by_token["goodbye"].original == CRISIS
        assert by_token["goodbye"].shift < 0

    def test_masking_filler_tokens_shift_zero(self):
        fp, extractors = fit_category_knn()
        post = make_post("q3", "Tonight I wrote a goodbye letter.")
        attributions = mask_explain(fp, post, extractors)
        by_token = {a.token: a for a in attributions}
        for token in ("Tonight", "wrote", "letter"):
            assert by_token[token].shift == 0

    def test_reruns_identical(self):
        fp, extractors = fit_category_knn()
        post = make_post("q4", "Tonight I wrote a goodbye letter.")
        first = mask_explain(fp, post, extractors)
        second = mask_explain(fp, post, extractors)
        assert first == second

    def test_attribution_indices_cover_tokens(self):
        fp, extractors = fit_category_knn()
        post = make_post("q5", "No sleep again; everything feels unbearable, honestly.")
        attributions = mask_explain(fp, post, extractors)
        assert [a.index for a in attributions] == list(range(len(attributions)))

    def test_empty_post_rejected(self):
        fp, extractors = fit_category_knn()
        with pytest.raises(DataError):
            mask_explain(fp, make_post("q6", "..."), extractors)

    def test_feature_mismatch_rejected(self):
        fp, _ = fit_category_knn()
        renamed = [CategoryExtractor(packaged_category_lexicon(), name="othername")]
        with pytest.raises(FeatureMismatchError):
            mask_explain(fp, make_post("q7", "I feel calm."), renamed)

    def test_shift_color_mapping(self):
        assert shift_to_color(-3) == "red"
        assert shift_to_color(-2) == "red"
        assert shift_to_color(-1) == "yellow"
        assert shift_to_color(0) is None
        assert shift_to_color(1) == "green"
        assert shift_to_color(3) == "green"

    def test_attribution_file_round_trip(self, tmp_path):
        fp, extractors = fit_category_knn()
        post = make_post("q8", "Tonight I wrote a goodbye letter.")
        attributions = mask_explain(fp, post, extractors)
        path = str(tmp_path / "attr.tsv")
        save_attributions(attributions, path)
        assert load_attributions(path) == attributions

    def test_bad_attribution_file_rejected(self, tmp_path):
        path = str(tmp_path / "attr.tsv")
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("token\tshift\n")
        with pytest.raises(DataError):
            load_attributions(path)
