import logging

import numpy as np
import pytest

from duorec.errors import ConfigError, InputError, OutOfCoverageError, UndefinedSimilarityError
from duorec.retrieval import (
    INPUT_SIDE,
    OUTPUT_SIDE,
    AnnIndexConfig,
    ExactIndex,
    HnswIndex,
    RecommendationList,
    RetrievalVariant,
    build_ann_index,
    build_exact_index,
    cosine,
    load_ann_index,
    query,
    save_ann_index,
)
from duorec.sgns import DualEmbedding, save_model

from conftest import make_catalog


class TestCosine:
    def test_identical(self):
        assert cosine([1.0, 2.0], [1.0, 2.0]) == pytest.approx(1.0)

    def test_orthogonal(self):
        assert cosine([1.0, 0.0], [0.0, 3.0]) == 0.0

    def test_forty_five_degrees(self):
        assert cosine([1.0, 1.0], [1.0, 0.0]) == pytest.approx(
            0.7071067811865475, abs=1e-15
        )

    def test_opposite(self):
        assert cosine([2.0, 0.0], [-1.0, 0.0]) == pytest.approx(-1.0)

    def test_scale_invariant(self, rng):
        u = rng.normal(size=6)
        v = rng.normal(size=6)
        assert cosine(u, v) == pytest.approx(cosine(1000 * u, 1e-3 * v))

    @pytest.mark.parametrize("u,v", [
        ([0.0, 0.0], [1.0, 0.0]),
        ([1.0, 0.0], [0.0, 0.0]),
        ([0.0, 0.0], [0.0, 0.0]),
    ])
    def test_zero_vector_undefined(self, u, v):
        with pytest.raises(UndefinedSimilarityError):
            cosine(u, v)


class TestRetrievalVariant:
    @pytest.mark.parametrize("name,expected", [
        ("in_out", RetrievalVariant.IN_OUT),
        ("IN-OUT", RetrievalVariant.IN_OUT),
        (" in_in ", RetrievalVariant.IN_IN),
        ("out_out", RetrievalVariant.OUT_OUT),
        ("out_in", RetrievalVariant.OUT_IN),
    ])
    def test_parse(self, name, expected):
        assert RetrievalVariant.parse(name) is expected

    def test_parse_unknown(self):
        with pytest.raises(ConfigError):
            RetrievalVariant.parse("sideways")

    def test_sides(self):
        assert RetrievalVariant.IN_OUT.query_side == INPUT_SIDE
        assert RetrievalVariant.IN_OUT.index_side == OUTPUT_SIDE
        assert RetrievalVariant.OUT_IN.query_side == OUTPUT_SIDE
        assert RetrievalVariant.OUT_IN.index_side == INPUT_SIDE
        assert RetrievalVariant.IN_IN.index_side == INPUT_SIDE


class TestRecommendationList:
    def test_valid_list(self):
        rl = RecommendationList("t", RetrievalVariant.IN_OUT,
                                [("a", 0.9), ("b", 0.9), ("c", 0.1)])
        rl.validate()
        assert rl.items() == ["a", "b", "c"]

    def test_target_leak(self):
        rl = RecommendationList("t", RetrievalVariant.IN_OUT, [("t", 0.5)])
        with pytest.raises(AssertionError):
            rl.validate()

    def test_duplicate(self):
        rl = RecommendationList("t", RetrievalVariant.IN_OUT,
                                [("a", 0.5), ("a", 0.4)])
        with pytest.raises(AssertionError):
            rl.validate()

    def test_score_order(self):
        rl = RecommendationList("t", RetrievalVariant.IN_OUT,
                                [("a", 0.2), ("b", 0.5)])
        with pytest.raises(AssertionError):
            rl.validate()

    def test_score_range(self):
        rl = RecommendationList("t", RetrievalVariant.IN_OUT, [("a", 1.5)])
        with pytest.raises(AssertionError):
            rl.validate()


def _random_model(n=30, d=8, seed=0):
    rng = np.random.default_rng(seed)
    vocab = [f"it{i:02d}" for i in range(n)]
    return DualEmbedding(
        vocab,
        rng.normal(size=(n, d)),
        rng.normal(size=(n, d)),
    )


class TestExactIndex:
    def test_matches_brute_force(self):
        model = _random_model()
        index = build_exact_index(model, OUTPUT_SIDE)
        q = np.random.default_rng(1).normal(size=8)
        got = index.top_k(q, 5)
        mat = model.output_matrix / np.linalg.norm(model.output_matrix, axis=1)[:, None]
        scores = mat @ (q / np.linalg.norm(q))
        best = sorted(zip(model.vocab, scores), key=lambda p: -p[1])[:5]
        assert [it for it, _ in got] == [it for it, _ in best]
        for (_, s_got), (_, s_ref) in zip(got, best):
            assert s_got == pytest.approx(s_ref)

    def test_ties_break_by_item_id(self):
        vocab = ["zz", "aa", "mm"]
        mat = np.array([[1.0, 0.0], [1.0, 0.0], [1.0, 0.0]])
        index = ExactIndex(vocab, mat)
        got = index.top_k(np.array([1.0, 0.0]), 3)
        assert [it for it, _ in got] == ["aa", "mm", "zz"]

    def test_k_zero(self):
        index = ExactIndex(["a"], np.array([[1.0]]))
        assert index.top_k(np.array([1.0]), 0) == []

    def test_k_exceeds_size(self):
        index = ExactIndex(["a", "b"], np.eye(2))
        assert len(index.top_k(np.array([1.0, 0.5]), 10)) == 2

    def test_exclusion(self):
        index = ExactIndex(["a", "b", "c"], np.eye(3))
        got = index.top_k(np.array([1.0, 0.0, 0.0]), 3, exclude={"a"})
        assert "a" not in [it for it, _ in got]

    def test_zero_query_vector(self):
        index = ExactIndex(["a"], np.array([[1.0]]))
        with pytest.raises(UndefinedSimilarityError):
            index.top_k(np.array([0.0]), 1)

    def test_zero_rows_dropped_with_warning(self, caplog):
        mat = np.array([[1.0, 0.0], [0.0, 0.0], [0.0, 1.0]])
        with caplog.at_level(logging.WARNING):
            index = ExactIndex(["a", "b", "c"], mat)
        assert len(index) == 2
        assert "zero rows" in caplog.text
        got = index.top_k(np.array([1.0, 1.0]), 5)
        assert {it for it, _ in got} == {"a", "c"}


class TestQuery:
    def _model(self):
        # Hand-built 4-item geometry: input of a points at output of b, etc.
        vocab = ["a", "b", "c", "d"]
        w_in = np.array([
            [1.0, 0.0, 0.0],
            [0.0, 1.0, 0.0],
            [0.0, 0.0, 1.0],
            [1.0, 1.0, 0.0],
        ])
        w_out = np.array([
            [0.0, 1.0, 0.0],
            [1.0, 0.0, 0.0],
            [1.0, 1.0, 1.0],
            [0.0, 0.0, 1.0],
        ])
        return DualEmbedding(vocab, w_in, w_out)

    def test_in_out_ranking(self):
        model = self._model()
        index = build_exact_index(model, OUTPUT_SIDE)
        got = query(model, "a", RetrievalVariant.IN_OUT, 3, index)
        # input a = e_x; cosines with outputs: b=1, c=1/sqrt(3), d=0, a=0.
        assert got.items()[0] == "b"
        assert got.items()[1] == "c"
        assert got.entries[0][1] == pytest.approx(1.0)

    def test_self_always_excluded(self):
        model = self._model()
        index = build_exact_index(model, INPUT_SIDE)
        got = query(model, "a", RetrievalVariant.IN_IN, 3, index)
        assert "a" not in got.items()

    def test_in_in_uses_input_matrix_both_sides(self):
        model = self._model()
        index = build_exact_index(model, INPUT_SIDE)
        got = query(model, "a", RetrievalVariant.IN_IN, 3, index)
        # input a = e_x: nearest input row is d (cos 1/sqrt 2), b and c are 0.
        assert got.items()[0] == "d"
        assert got.entries[0][1] == pytest.approx(1 / np.sqrt(2))

    def test_out_in_mirrors_in_out(self):
        model = self._model()
        out_index = build_exact_index(model, OUTPUT_SIDE)
        in_index = build_exact_index(model, INPUT_SIDE)
        fwd = query(model, "a", RetrievalVariant.IN_OUT, 3, out_index)
        rev = query(model, "b", RetrievalVariant.OUT_IN, 3, in_index)
        score_fwd = dict(fwd.entries)["b"]
        score_rev = dict(rev.entries)["a"]
        assert score_fwd == pytest.approx(score_rev)

    def test_k_below_one(self):
        model = self._model()
        index = build_exact_index(model, OUTPUT_SIDE)
        with pytest.raises(ConfigError):
            query(model, "a", RetrievalVariant.IN_OUT, 0, index)

    def test_side_mismatch(self):
        model = self._model()
        index = build_exact_index(model, INPUT_SIDE)
        with pytest.raises(ConfigError):
            query(model, "a", RetrievalVariant.IN_OUT, 2, index)

    def test_unknown_target(self):
        model = self._model()
        index = build_exact_index(model, OUTPUT_SIDE)
        with pytest.raises(OutOfCoverageError):
            query(model, "nope", RetrievalVariant.IN_OUT, 2, index)

    def test_truncates_to_k(self):
        model = self._model()
        index = build_exact_index(model, OUTPUT_SIDE)
        got = query(model, "a", RetrievalVariant.IN_OUT, 2, index)
        assert len(got.entries) == 2

    def test_taxonomy_filter(self):
        model = self._model()
        index = build_exact_index(model, OUTPUT_SIDE)
        catalog = make_catalog(a="x>y", b="x>y", c="x>z", d="q>r")
        got = query(model, "a", RetrievalVariant.IN_OUT, 3, index,
                    taxonomy_filter=catalog)
        # b shares a's full taxonomy path and is filtered out.
        assert "b" not in got.items()
        assert got.items()[0] == "c"

    def test_taxonomy_filter_keeps_uncataloged(self):
        model = self._model()
        index = build_exact_index(model, OUTPUT_SIDE)
        catalog = make_catalog(a="x>y", c="x>y")
        got = query(model, "a", RetrievalVariant.IN_OUT, 3, index,
                    taxonomy_filter=catalog)
        assert "b" in got.items()  # not in catalog -> kept
        assert "c" not in got.items()


class TestHnswIndex:
    def test_two_items_exact(self):
        mat = np.array([[1.0, 0.0], [0.0, 1.0]])
        index = HnswIndex(["a", "b"], mat, AnnIndexConfig(seed=1))
        got = index.top_k(np.array([0.9, 0.1]), 2)
        assert [it for it, _ in got] == ["a", "b"]

    def test_too_few_rows(self):
        with pytest.raises(ConfigError):
            HnswIndex(["a"], np.array([[1.0]]), AnnIndexConfig())

    def test_degree_validation(self):
        with pytest.raises(ConfigError):
            AnnIndexConfig(graph_degree=1)
        with pytest.raises(ConfigError):
            AnnIndexConfig(ef_search=0)

    def test_wide_beam_matches_exact(self):
        rng = np.random.default_rng(7)
        n, d = 120, 10
        vocab = [f"v{i:03d}" for i in range(n)]
        mat = rng.normal(size=(n, d))
        cfg = AnnIndexConfig(graph_degree=8, ef_construction=n, ef_search=n, seed=3)
        ann = HnswIndex(vocab, mat, cfg)
        exact = ExactIndex(vocab, mat)
        for qi in range(20):
            q = rng.normal(size=d)
            a = [it for it, _ in ann.top_k(q, 10)]
            e = [it for it, _ in exact.top_k(q, 10)]
            assert a == e, f"query {qi} diverged"

    def test_recall_at_ten(self):
        rng = np.random.default_rng(19)
        n, d = 800, 16
        vocab = [f"v{i:04d}" for i in range(n)]
        mat = rng.normal(size=(n, d))
        ann = HnswIndex(vocab, mat, AnnIndexConfig(graph_degree=16,
                                                   ef_construction=100,
                                                   ef_search=100, seed=5))
        exact = ExactIndex(vocab, mat)
        hits = total = 0
        for _ in range(50):
            q = rng.normal(size=d)
            approx = {it for it, _ in ann.top_k(q, 10)}
            truth = {it for it, _ in exact.top_k(q, 10)}
            hits += len(approx & truth)
            total += len(truth)
        assert hits / total >= 0.95

    def test_zero_query(self):
        index = HnswIndex(["a", "b"], np.eye(2), AnnIndexConfig())
        with pytest.raises(UndefinedSimilarityError):
            index.top_k(np.zeros(2), 1)

    def test_exclusion_still_fills_k(self):
        rng = np.random.default_rng(2)
        n = 50
        vocab = [f"v{i:02d}" for i in range(n)]
        mat = rng.normal(size=(n, 6))
        index = HnswIndex(vocab, mat, AnnIndexConfig(graph_degree=8,
                                                     ef_construction=n,
                                                     ef_search=n))
        got = index.top_k(mat[0], 5, exclude={"v00", "v01"})
        assert len(got) == 5
        assert not {"v00", "v01"} & {it for it, _ in got}

    def test_deterministic_given_seed(self):
        rng = np.random.default_rng(4)
        mat = rng.normal(size=(60, 8))
        vocab = [f"v{i:02d}" for i in range(60)]
        cfg = AnnIndexConfig(graph_degree=6, ef_construction=40, ef_search=40, seed=9)
        a = HnswIndex(vocab, mat, cfg)
        b = HnswIndex(vocab, mat, cfg)
        q = rng.normal(size=8)
        assert a.top_k(q, 10) == b.top_k(q, 10)


class TestAnnPersistence:
    def _setup(self, tmp_path):
        model = _random_model(n=40, d=6, seed=21)
        model_path = tmp_path / "model.txt"
        save_model(model, model_path)
        cfg = AnnIndexConfig(graph_degree=6, ef_construction=40, ef_search=40, seed=2)
        index = build_ann_index(model, cfg, OUTPUT_SIDE)
        return model, model_path, index

    def test_round_trip_same_results(self, tmp_path):
        model, model_path, index = self._setup(tmp_path)
        p = tmp_path / "ann.idx"
        save_ann_index(index, p, model_path)
        loaded = load_ann_index(p, model, model_path)
        assert loaded.side == OUTPUT_SIDE
        assert loaded.items == index.items
        rng = np.random.default_rng(0)
        for _ in range(10):
            q = rng.normal(size=6)
            assert loaded.top_k(q, 8) == index.top_k(q, 8)

    def test_fingerprint_mismatch(self, tmp_path):
        model, model_path, index = self._setup(tmp_path)
        p = tmp_path / "ann.idx"
        save_ann_index(index, p, model_path)
        other = _random_model(n=40, d=6, seed=99)
        other_path = tmp_path / "other.txt"
        save_model(other, other_path)
        with pytest.raises(InputError, match="fingerprint"):
            load_ann_index(p, other, other_path)

    def test_not_an_index_file(self, tmp_path):
        model, model_path, _ = self._setup(tmp_path)
        p = tmp_path / "junk.idx"
        p.write_bytes(b"hello world\n")
        with pytest.raises(InputError):
            load_ann_index(p, model, model_path)

    def test_missing_file(self, tmp_path):
        model, model_path, _ = self._setup(tmp_path)
        with pytest.raises(InputError):
            load_ann_index(tmp_path / "absent.idx", model, model_path)
