"""Pipeline grammar, ANOVA-F, components, KNN oracle parity, serialization."""

import json
import math
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from triagekit.corpus import (
    BENCHMARK_CLASS_PROPORTIONS,
    CoarseLabel,
    LabelMap,
    default_granular_map,
    gen_synthetic,
    map_label,
)
from triagekit.errors import (
    ConfigError,
    DataError,
    FeatureMismatchError,
    ModelFormatError,
    UnknownLabelError,
)
from triagekit.featurize import (
    CategoryExtractor,
    ColumnDesc,
    FeatureTable,
    VaderExtractor,
    build_feature_table,
    packaged_category_lexicon,
)
from triagekit.model import (
    Component,
    FittedLinear,
    FittedSelect,
    PipelineSpec,
    anova_f,
    fit,
    load_model,
    majority_pipeline,
    parse_pipeline,
    predict,
    predict_coarse,
    reference_pipeline,
    save_model,
)

GREEN, AMBER, RED, CRISIS = (
    CoarseLabel.GREEN,
    CoarseLabel.AMBER,
    CoarseLabel.RED,
    CoarseLabel.CRISIS,
)


def make_table(matrix, names=None, row_ids=None):
    matrix = np.asarray(matrix, dtype=np.float64)
    m = matrix.shape[1]
    if names is None:
        names = [f"ext|f{j}|post" for j in range(m)]
    columns = tuple(ColumnDesc.from_name(n) for n in names)
    if row_ids is None:
        row_ids = tuple(f"p{i:04d}" for i in range(matrix.shape[0]))
    return FeatureTable(row_ids=tuple(row_ids), columns=columns, values=matrix)


def flat_map(**tags):
    return LabelMap({tag: coarse for tag, coarse in tags.items()})


# --- pipeline grammar ---------------------------------------------------------


class TestPipelineGrammar:
    def test_reference_canonical_text(self):
        spec = reference_pipeline()
        assert spec.canonical() == "select_k_anova(100)|binarize(0.0)|knn(21)"

    def test_parse_reference(self):
        spec = parse_pipeline("select_k_anova(100)|binarize(0.0)|knn(21)")
        assert [c.kind for c in spec.components] == ["select_k_anova", "binarize", "knn"]
        assert spec.components[0].args == (100,)
        assert spec.components[1].args == (0.0,)
        assert spec.components[2].args == (21,)
        assert spec.n_components == 3

    def test_round_trip_exact_text(self):
        for text in [
            "majority()",
            "knn(1)",
            "scale()|logistic(0.01,25)",
            "scale()|binarize(1.5)|select_k_anova(7)|linear_svm(2.0,10)",
        ]:
            assert parse_pipeline(text).canonical() == text

    def test_linear_params_formatting(self):
        spec = PipelineSpec((Component("linear_svm", (1, 50)),))
        assert spec.canonical() == "linear_svm(1.0,50)"

    @pytest.mark.parametrize(
        "bad",
        [
            "",
            "knn",
            "knn(21",
            "frobnicate(3)",
            "knn(zero)",
            "knn(21.5)",
            "scale()",  # no classifier
            "knn(3)|majority()",  # two classifiers
            "majority()|scale()",  # classifier not terminal
            "knn(0)",
            "select_k_anova(0)|knn(3)",
            "linear_svm(0.0,10)",
            "linear_svm(-1.0,10)",
            "logistic(-0.5,10)",
            "logistic(0.1,0)",
            "binarize(0.0,1.0)|knn(3)",
            "knn(3,5)",
        ],
    )
    def test_parse_rejects(self, bad):
        with pytest.raises(ConfigError):
            parse_pipeline(bad)

    @given(
        st.lists(
            st.one_of(
                st.just(Component("scale")),
                st.builds(
                    lambda t: Component("binarize", (t,)),
                    st.floats(-100.0, 100.0, allow_nan=False),
                ),
                st.builds(
                    lambda k: Component("select_k_anova", (k,)), st.integers(1, 500)
                ),
            ),
            max_size=4,
        ),
        st.one_of(
            st.builds(lambda k: Component("knn", (k,)), st.integers(1, 99)),
            st.builds(
                lambda c, e: Component("linear_svm", (c, e)),
                st.floats(1e-3, 1e3, allow_nan=False),
                st.integers(1, 50),
            ),
            st.builds(
                lambda l2, e: Component("logistic", (l2, e)),
                st.floats(0.0, 1e3, allow_nan=False),
                st.integers(1, 50),
            ),
            st.just(Component("majority")),
        ),
    )
    @settings(max_examples=60, deadline=None)
    def test_round_trip_random_specs(self, preproc, classifier):
        spec = PipelineSpec(tuple(preproc) + (classifier,))
        again = parse_pipeline(spec.canonical())
        assert again == spec
        assert again.canonical() == spec.canonical()


# --- ANOVA F -------------------------------------------------------------------


class TestAnovaF:
    def test_hand_computed_two_groups(self):
        # groups {0,1} and {2,3}: between SS 4 over 1 df, within SS 1 over 2 df
        f = anova_f(np.array([0.0, 1.0, 2.0, 3.0]), ["a", "a", "b", "b"])
        assert f == pytest.approx(8.0, abs=1e-12)

    def test_identical_group_means_zero(self):
        f = anova_f(np.array([0.0, 2.0, 0.0, 2.0]), ["a", "a", "b", "b"])
        assert f == 0.0

    def test_zero_within_variance_sentinel(self):
        f = anova_f(np.array([0.0, 0.0, 1.0, 1.0]), ["a", "a", "b", "b"])
        assert f == math.inf

    def test_constant_column_is_zero_not_nan(self):
        assert anova_f(np.array([5.0, 5.0, 5.0, 5.0]), ["a", "a", "b", "b"]) == 0.0

    def test_single_class_rejected(self):
        with pytest.raises(DataError):
            anova_f(np.array([1.0, 2.0, 3.0]), ["a", "a", "a"])

    def test_length_mismatch_rejected(self):
        with pytest.raises(DataError):
            anova_f(np.array([1.0, 2.0]), ["a", "b", "a"])

    def test_three_group_textbook_value(self):
        # n=9, three groups of 3: grand mean 5; means 2, 5, 8
        # SSb = 3*(9+0+9)=54 over 2 df; SSw = 6*(1)=... computed below by loop
        column = np.array([1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0])
        y = ["a"] * 3 + ["b"] * 3 + ["c"] * 3
        groups = {"a": column[:3], "b": column[3:6], "c": column[6:]}
        grand = column.mean()
        ssb = sum(len(g) * (g.mean() - grand) ** 2 for g in groups.values())
        ssw = sum(((g - g.mean()) ** 2).sum() for g in groups.values())
        expected = (ssb / 2) / (ssw / 6)
        assert anova_f(column, y) == pytest.approx(expected, rel=1e-12)

    @given(st.integers(0, 2**32 - 1))
    @settings(max_examples=30, deadline=None)
    def test_selection_matches_per_column_statistic(self, seed):
        rng = np.random.default_rng(seed)
        n, m = 24, 6
        matrix = rng.normal(size=(n, m))
        matrix[:, 0] = np.where(np.arange(n) % 2 == 0, 1.0, 0.0)  # inf sentinel column
        y = ["a" if i % 2 == 0 else "b" for i in range(n)]
        per_column = [anova_f(matrix[:, j], y) for j in range(m)]
        order = sorted(range(m), key=lambda j: (-per_column[j], j))
        lmap = flat_map(a=GREEN, b=RED)
        fp = fit(
            parse_pipeline("select_k_anova(3)|knn(1)"),
            make_table(matrix),
            y,
            lmap,
        )
        select = next(s for s in fp.fitted if isinstance(s, FittedSelect))
        assert select.indices == tuple(sorted(order[:3]))
        assert 0 in select.indices  # the zero-within-variance column ranks first


# --- individual components -----------------------------------------------------


class TestComponents:
    def test_binarize_strict_threshold(self):
        table = make_table([[-1.0], [0.0], [2.0]])
        lmap = flat_map(a=GREEN, b=RED)
        fp = fit(parse_pipeline("binarize(0.0)|knn(1)"), table, ["a", "a", "b"], lmap)
        knn_state = fp.fitted[-1]
        assert knn_state.train.ravel().tolist() == [0.0, 0.0, 1.0]

    def test_scale_standardizes_and_zeroes_constant_columns(self):
        matrix = np.array([[1.0, 7.0], [3.0, 7.0], [5.0, 7.0]])
        table = make_table(matrix)
        lmap = flat_map(a=GREEN, b=RED)
        fp = fit(parse_pipeline("scale()|knn(1)"), table, ["a", "a", "b"], lmap)
        scaled = fp.fitted[-1].train
        assert scaled[:, 0].mean() == pytest.approx(0.0, abs=1e-12)
        assert scaled[:, 0].std() == pytest.approx(1.0, abs=1e-12)
        assert scaled[:, 1].tolist() == [0.0, 0.0, 0.0]

    def test_select_tie_breaks_to_lower_column_index(self):
        rng = np.random.default_rng(7)
        signal = np.where(np.arange(20) % 2 == 0, 1.0, 0.0)
        noise = rng.normal(scale=0.01, size=20)
        # columns 1 and 3 are identical copies of the same signal (tied F)
        matrix = np.column_stack([noise, signal, noise * 0.5, signal.copy()])
        y = ["a" if i % 2 == 0 else "b" for i in range(20)]
        lmap = flat_map(a=GREEN, b=RED)
        fp = fit(parse_pipeline("select_k_anova(1)|knn(1)"), make_table(matrix), y, lmap)
        select = next(s for s in fp.fitted if isinstance(s, FittedSelect))
        assert select.indices == (1,)

    def test_select_indices_strictly_increasing(self):
        rng = np.random.default_rng(11)
        matrix = rng.normal(size=(30, 8))
        y = ["a" if i < 15 else "b" for i in range(30)]
        lmap = flat_map(a=GREEN, b=RED)
        fp = fit(parse_pipeline("select_k_anova(5)|knn(3)"), make_table(matrix), y, lmap)
        select = next(s for s in fp.fitted if isinstance(s, FittedSelect))
        assert list(select.indices) == sorted(set(select.indices))

    def test_select_k_above_width_clamps_with_warning(self):
        rng = np.random.default_rng(3)
        matrix = rng.normal(size=(20, 4))
        y = ["a" if i < 10 else "b" for i in range(20)]
        lmap = flat_map(a=GREEN, b=RED)
        fp = fit(parse_pipeline("select_k_anova(100)|knn(3)"), make_table(matrix), y, lmap)
        select = next(s for s in fp.fitted if isinstance(s, FittedSelect))
        assert select.indices == (0, 1, 2, 3)
        assert any("clamped" in w for w in fp.warnings)

    def test_select_all_columns_is_identity_composition(self):
        rng = np.random.default_rng(5)
        train = rng.normal(size=(40, 6))
        test = rng.normal(size=(25, 6))
        y = ["a" if i % 2 == 0 else "b" for i in range(40)]
        lmap = flat_map(a=GREEN, b=RED)
        with_select = fit(parse_pipeline("select_k_anova(6)|knn(3)"), make_table(train), y, lmap)
        without = fit(parse_pipeline("knn(3)"), make_table(train), y, lmap)
        table = make_table(test)
        assert predict(with_select, table) == predict(without, table)

    def test_knn_k_above_train_size_clamps_with_warning(self):
        matrix = np.array([[0.0], [1.0], [2.0]])
        lmap = flat_map(a=GREEN, b=RED)
        fp = fit(parse_pipeline("knn(21)"), make_table(matrix), ["a", "a", "b"], lmap)
        assert fp.fitted[-1].k == 3
        assert any("clamped" in w for w in fp.warnings)
        # all three vote: a is the 2-of-3 majority everywhere
        assert predict(fp, make_table([[5.0]], row_ids=["q"])) == ["a"]


# --- KNN determinism and oracle parity -------------------------------------------


def oracle_knn(train_x, train_labels, query, k, class_freq, label_map):
    """Independent exhaustive nearest-neighbor vote with the documented ties."""
    ranked = sorted(
        range(len(train_x)), key=lambda i: (math.dist(train_x[i], query), i)
    )
    votes = Counter(train_labels[i] for i in ranked[:k])
    best = max(votes.values())
    tied = [label for label, c in votes.items() if c == best]
    return min(
        tied, key=lambda lab: (-class_freq[lab], int(map_label(lab, label_map)), lab)
    )


class TestKnn:
    def test_knn1_reproduces_training_labels(self):
        rng = np.random.default_rng(19)
        matrix = rng.normal(size=(30, 5))
        y = [["a", "b", "c"][i % 3] for i in range(30)]
        lmap = flat_map(a=GREEN, b=AMBER, c=RED)
        table = make_table(matrix)
        fp = fit(parse_pipeline("knn(1)"), table, y, lmap)
        assert predict(fp, table) == y

    def test_brute_force_oracle_parity_200_points(self):
        rng = np.random.default_rng(23)
        train = rng.normal(size=(120, 8))
        queries = rng.normal(size=(200, 8))
        y = [["a", "b", "c", "d"][i % 4] for i in range(120)]
        lmap = flat_map(a=GREEN, b=AMBER, c=RED, d=CRISIS)
        fp = fit(parse_pipeline("knn(7)"), make_table(train), y, lmap)
        got = predict(fp, make_table(queries))
        freq = Counter(y)
        expected = [
            oracle_knn(train.tolist(), y, q.tolist(), 7, freq, lmap) for q in queries
        ]
        assert got == expected

    def test_brute_force_oracle_parity_binarized_many_ties(self):
        rng = np.random.default_rng(29)
        train = (rng.random(size=(60, 5)) > 0.5).astype(float)
        queries = (rng.random(size=(80, 5)) > 0.5).astype(float)
        y = [["a", "b", "c"][i % 3] for i in range(60)]
        lmap = flat_map(a=GREEN, b=AMBER, c=RED)
        fp = fit(parse_pipeline("knn(5)"), make_table(train), y, lmap)
        got = predict(fp, make_table(queries))
        freq = Counter(y)
        expected = [
            oracle_knn(train.tolist(), y, q.tolist(), 5, freq, lmap) for q in queries
        ]
        assert got == expected

    def test_distance_tie_prefers_lower_training_row(self):
        # identical rows, different labels: index 0 must win at k=1
        matrix = np.array([[1.0, 1.0], [1.0, 1.0], [9.0, 9.0]])
        lmap = flat_map(a=GREEN, b=RED)
        fp = fit(parse_pipeline("knn(1)"), make_table(matrix), ["b", "a", "a"], lmap)
        assert predict(fp, make_table([[1.0, 1.0]], row_ids=["q"])) == ["b"]

    def test_vote_tie_prefers_training_frequency(self):
        # neighbors split 1-1 between a and b; b is more frequent overall
        matrix = np.array([[0.0], [2.0], [50.0]])
        lmap = flat_map(a=GREEN, b=GREEN)
        fp = fit(parse_pipeline("knn(2)"), make_table(matrix), ["a", "b", "b"], lmap)
        assert predict(fp, make_table([[1.0]], row_ids=["q"])) == ["b"]

    def test_vote_tie_then_lowest_coarse_ordinal(self):
        # equal votes, equal training frequency; green beats red despite
        # sorting after it alphabetically
        matrix = np.array([[0.0], [2.0]])
        lmap = flat_map(apple=RED, zebra=GREEN)
        fp = fit(parse_pipeline("knn(2)"), make_table(matrix), ["apple", "zebra"], lmap)
        assert predict(fp, make_table([[1.0]], row_ids=["q"])) == ["zebra"]

    def test_vote_tie_final_lexicographic(self):
        matrix = np.array([[0.0], [2.0]])
        lmap = flat_map(alpha=AMBER, beta=AMBER)
        fp = fit(parse_pipeline("knn(2)"), make_table(matrix), ["beta", "alpha"], lmap)
        assert predict(fp, make_table([[1.0]], row_ids=["q"])) == ["alpha"]

    def test_orthogonal_transform_invariance(self):
        rng = np.random.default_rng(31)
        train = rng.normal(size=(50, 6))
        test = rng.normal(size=(40, 6))
        q, _ = np.linalg.qr(rng.normal(size=(6, 6)))
        y = [["a", "b", "c"][i % 3] for i in range(50)]
        lmap = flat_map(a=GREEN, b=AMBER, c=RED)
        plain = fit(parse_pipeline("knn(5)"), make_table(train), y, lmap)
        rotated = fit(parse_pipeline("knn(5)"), make_table(train @ q), y, lmap)
        assert predict(plain, make_table(test)) == predict(rotated, make_table(test @ q))


# --- linear classifiers and majority ---------------------------------------------


class TestLinearAndMajority:
    def _blobs(self, seed=41, n_per=30):
        rng = np.random.default_rng(seed)
        centers = np.array([[0.0, 0.0], [4.0, 0.0], [0.0, 4.0]])
        rows, labels = [], []
        for label, center in zip(["a", "b", "c"], centers):
            rows.append(rng.normal(size=(n_per, 2)) * 0.5 + center)
            labels.extend([label] * n_per)
        return np.concatenate(rows), labels

    @pytest.mark.parametrize("text", ["scale()|linear_svm(1.0,40)", "scale()|logistic(0.01,40)"])
    def test_loss_history_non_increasing(self, text):
        matrix, y = self._blobs()
        lmap = flat_map(a=GREEN, b=AMBER, c=RED)
        fp = fit(parse_pipeline(text), make_table(matrix), y, lmap)
        linear = next(s for s in fp.fitted if isinstance(s, FittedLinear))
        history = linear.loss_history
        assert len(history) == 41
        assert all(later <= earlier for earlier, later in zip(history, history[1:]))
        assert history[-1] < history[0]

    @pytest.mark.parametrize("text", ["linear_svm(1.0,60)", "logistic(0.001,60)"])
    def test_separable_blobs_fit_well(self, text):
        matrix, y = self._blobs()
        lmap = flat_map(a=GREEN, b=AMBER, c=RED)
        table = make_table(matrix)
        fp = fit(parse_pipeline(text), table, y, lmap)
        got = predict(fp, table)
        accuracy = sum(g == t for g, t in zip(got, y)) / len(y)
        assert accuracy >= 0.9

    @pytest.mark.parametrize(
        "text", ["scale()|linear_svm(1.0,30)", "scale()|logistic(0.01,30)", "knn(5)"]
    )
    def test_fit_deterministic_across_runs(self, text):
        matrix, y = self._blobs(seed=43)
        lmap = flat_map(a=GREEN, b=AMBER, c=RED)
        table = make_table(matrix)
        first = fit(parse_pipeline(text), table, y, lmap, seed=9)
        second = fit(parse_pipeline(text), table, y, lmap, seed=9)
        queries = make_table(np.linspace(-2, 6, 40).reshape(20, 2))
        assert predict(first, queries) == predict(second, queries)
        for a, b in zip(first.fitted, second.fitted):
            if isinstance(a, FittedLinear):
                assert np.array_equal(a.weights, b.weights)

    def test_majority_predicts_mode(self):
        table = make_table([[0.0], [1.0], [2.0]])
        lmap = flat_map(a=GREEN, b=RED)
        fp = fit(majority_pipeline(), table, ["a", "a", "b"], lmap)
        assert predict(fp, make_table([[9.0], [-3.0]], row_ids=["q1", "q2"])) == ["a", "a"]

    def test_majority_tie_uses_coarse_then_lexicographic(self):
        table = make_table([[0.0], [1.0]])
        fp = fit(majority_pipeline(), table, ["apple", "zebra"], flat_map(apple=RED, zebra=GREEN))
        assert predict(fp, make_table([[0.0]], row_ids=["q"])) == ["zebra"]
        fp2 = fit(majority_pipeline(), table, ["beta", "alpha"], flat_map(alpha=AMBER, beta=AMBER))
        assert predict(fp2, make_table([[0.0]], row_ids=["q"])) == ["alpha"]


# --- fit/predict contract ---------------------------------------------------------


class TestFitPredictContract:
    def test_empty_training_set_rejected(self):
        table = make_table(np.zeros((0, 2)))
        with pytest.raises(DataError):
            fit(majority_pipeline(), table, [], flat_map(a=GREEN))

    def test_label_missing_from_map_rejected(self):
        table = make_table([[0.0], [1.0]])
        with pytest.raises(UnknownLabelError):
            fit(majority_pipeline(), table, ["a", "mystery"], flat_map(a=GREEN))

    def test_row_label_length_mismatch_rejected(self):
        table = make_table([[0.0], [1.0]])
        with pytest.raises(DataError):
            fit(majority_pipeline(), table, ["a"], flat_map(a=GREEN))

    def test_codebook_covers_training_labels(self):
        table = make_table([[0.0], [1.0], [2.0]])
        lmap = flat_map(a=GREEN, b=RED)
        fp = fit(majority_pipeline(), table, ["b", "a", "b"], lmap)
        assert fp.codebook == ("a", "b")
        assert fp.class_freq == {"a": 1, "b": 2}

    def test_empty_query_table_gives_empty_predictions(self):
        table = make_table([[0.0], [1.0]])
        lmap = flat_map(a=GREEN, b=RED)
        fp = fit(parse_pipeline("knn(1)"), table, ["a", "b"], lmap)
        empty = make_table(np.zeros((0, 1)), row_ids=())
        assert predict(fp, empty) == []
        assert predict_coarse(fp, empty) == []

    def test_column_mismatch_lists_missing_and_extra(self):
        table = make_table([[0.0, 1.0]], names=["e|x|post", "e|y|post"])
        lmap = flat_map(a=GREEN)
        fp = fit(majority_pipeline(), table, ["a"], lmap)
        other = make_table([[0.0, 1.0]], names=["e|x|post", "e|z|post"])
        with pytest.raises(FeatureMismatchError) as err:
            predict(fp, other)
        assert "e|y|post" in str(err.value) and "e|z|post" in str(err.value)

    def test_column_order_mismatch_rejected(self):
        table = make_table([[0.0, 1.0]], names=["e|x|post", "e|y|post"])
        lmap = flat_map(a=GREEN)
        fp = fit(majority_pipeline(), table, ["a"], lmap)
        swapped = make_table([[1.0, 0.0]], names=["e|y|post", "e|x|post"])
        with pytest.raises(FeatureMismatchError):
            predict(fp, swapped)

    def test_predict_coarse_composes_label_map(self):
        rng = np.random.default_rng(47)
        matrix = rng.normal(size=(20, 3))
        y = ["a" if i % 2 == 0 else "b" for i in range(20)]
        lmap = flat_map(a=GREEN, b=CRISIS)
        table = make_table(matrix)
        fp = fit(parse_pipeline("knn(3)"), table, y, lmap)
        granular = predict(fp, table)
        coarse = predict_coarse(fp, table)
        assert coarse == [map_label(g, lmap) for g in granular]
        assert all(isinstance(c, CoarseLabel) for c in coarse)


# --- reference pipeline beats majority on synthetic data ---------------------------


def simple_macro_f1(truth, guesses):
    classes = sorted(set(truth))
    scores = []
    for cls in classes:
        tp = sum(1 for t, g in zip(truth, guesses) if t == cls and g == cls)
        fp_ = sum(1 for t, g in zip(truth, guesses) if t != cls and g == cls)
        fn = sum(1 for t, g in zip(truth, guesses) if t == cls and g != cls)
        denom = 2 * tp + fp_ + fn
        scores.append(0.0 if denom == 0 else 2 * tp / denom)
    return sum(scores) / len(scores)


class TestReferenceOnSyntheticCorpus:
    def test_reference_beats_majority_on_training_split(self):
        corpus = gen_synthetic(seed=202, n=300, class_probs=BENCHMARK_CLASS_PROPORTIONS)
        lmap = default_granular_map()
        ids = sorted(p.id for p in corpus.labeled_posts("train"))
        extractors = [
            VaderExtractor(),
            CategoryExtractor(packaged_category_lexicon()),
        ]
        table = build_feature_table(corpus, extractors, post_ids=ids)
        y = [corpus.labels[i].granular for i in ids]
        truth_coarse = [int(map_label(g, lmap)) for g in y]

        ref = fit(reference_pipeline(), table, y, lmap)
        majority = fit(majority_pipeline(), table, y, lmap)
        ref_f1 = simple_macro_f1(truth_coarse, [int(c) for c in predict_coarse(ref, table)])
        maj_f1 = simple_macro_f1(
            truth_coarse, [int(c) for c in predict_coarse(majority, table)]
        )
        assert ref_f1 > maj_f1


# --- serialization -----------------------------------------------------------------


class TestSerialization:
    def _fitted(self, text, seed=53):
        rng = np.random.default_rng(seed)
        matrix = rng.normal(size=(40, 6))
        y = [["a", "b", "c"][i % 3] for i in range(40)]
        lmap = flat_map(a=GREEN, b=AMBER, c=RED)
        fp = fit(parse_pipeline(text), make_table(matrix), y, lmap)
        queries = make_table(rng.normal(size=(100, 6)), row_ids=[f"q{i}" for i in range(100)])
        return fp, queries

    @pytest.mark.parametrize(
        "text",
        [
            "select_k_anova(100)|binarize(0.0)|knn(21)",
            "scale()|select_k_anova(4)|linear_svm(1.0,20)",
            "scale()|logistic(0.01,15)",
            "majority()",
        ],
    )
    def test_round_trip_predictions_identical(self, text, tmp_path):
        fp, queries = self._fitted(text)
        path = str(tmp_path / "model.json")
        save_model(fp, path)
        again = load_model(path)
        assert again.spec.canonical() == fp.spec.canonical()
        assert again.codebook == fp.codebook
        assert again.class_freq == dict(fp.class_freq)
        assert again.columns == fp.columns
        assert predict(again, queries) == predict(fp, queries)

    def test_saved_file_declares_format_version(self, tmp_path):
        fp, _ = self._fitted("majority()")
        path = str(tmp_path / "model.json")
        save_model(fp, path)
        payload = json.loads(open(path, encoding="utf-8").read())
        assert payload["format"] == "triagekit-model/1"

    def test_corrupted_file_rejected(self, tmp_path):
        path = str(tmp_path / "model.json")
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("{this is not json")
        with pytest.raises(ModelFormatError):
            load_model(path)

    def test_wrong_version_rejected(self, tmp_path):
        fp, _ = self._fitted("majority()")
        path = str(tmp_path / "model.json")
        save_model(fp, path)
        payload = json.loads(open(path, encoding="utf-8").read())
        payload["format"] = "triagekit-model/0"
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(payload, fh)
        with pytest.raises(ModelFormatError):
            load_model(path)

    def test_truncated_file_rejected(self, tmp_path):
        fp, _ = self._fitted("knn(3)")
        path = str(tmp_path / "model.json")
        save_model(fp, path)
        blob = open(path, encoding="utf-8").read()
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(blob[: len(blob) // 2])
        with pytest.raises(ModelFormatError):
            load_model(path)

    def test_missing_section_rejected(self, tmp_path):
        fp, _ = self._fitted("majority()")
        path = str(tmp_path / "model.json")
        save_model(fp, path)
        payload = json.loads(open(path, encoding="utf-8").read())
        del payload["codebook"]
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(payload, fh)
        with pytest.raises(ModelFormatError):
            load_model(path)

    def test_save_is_deterministic(self, tmp_path):
        fp, _ = self._fitted("select_k_anova(3)|binarize(0.0)|knn(5)")
        path_a = str(tmp_path / "a.json")
        path_b = str(tmp_path / "b.json")
        save_model(fp, path_a)
        save_model(fp, path_b)
        assert open(path_a, "rb").read() == open(path_b, "rb").read()
