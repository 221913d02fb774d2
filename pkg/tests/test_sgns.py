import math

import numpy as np
import pytest

from duorec.errors import ConfigError, InputError, TrainingStreamError
from duorec.sgns import (
    HAVE_NUMBA,
    DevSet,
    DualEmbedding,
    NoiseTable,
    TrainConfig,
    _epoch_numpy,
    build_noise_table,
    dev_precision_recall_at_k,
    dev_recall_at_k,
    enumerate_window_pairs,
    init_model,
    keep_probability,
    load_model,
    save_model,
    sgd_step,
    sgns_loss,
    sgns_loss_gradients,
    sidecar_path,
    train_pairs,
    train_sequences,
)

from conftest import make_pairs, make_sessions


class TestInitModel:
    def test_shapes_and_bounds(self):
        model = init_model(["a", "b", "c"], dim=10, seed=0)
        assert model.input_matrix.shape == (3, 10)
        assert model.output_matrix.shape == (3, 10)
        assert np.all(np.abs(model.input_matrix) <= 0.5 / 10)
        assert np.all(model.output_matrix == 0.0)

    def test_deterministic(self):
        a = init_model(["x", "y"], dim=6, seed=42)
        b = init_model(["x", "y"], dim=6, seed=42)
        assert np.array_equal(a.input_matrix, b.input_matrix)
        c = init_model(["x", "y"], dim=6, seed=43)
        assert not np.array_equal(a.input_matrix, c.input_matrix)

    def test_empty_vocab(self):
        with pytest.raises(ConfigError):
            init_model([], dim=4, seed=0)

    def test_bad_dim(self):
        with pytest.raises(ConfigError):
            init_model(["a"], dim=0, seed=0)

    def test_duplicate_vocab(self):
        with pytest.raises(ConfigError):
            DualEmbedding(["a", "a"], np.zeros((2, 2)), np.zeros((2, 2)))

    def test_unknown_item_lookup(self):
        model = init_model(["a"], dim=2, seed=0)
        with pytest.raises(TrainingStreamError):
            model.row("missing")


class TestTrainConfig:
    @pytest.mark.parametrize("kwargs", [
        {"negatives": 0},
        {"dim": 0},
        {"learning_rate": 0.0},
        {"learning_rate": -0.1},
        {"window": 0},
        {"max_epochs": 0},
        {"early_stop_patience": 0},
        {"count_clamp": 0},
        {"subsample_t": 0.0},
        {"subsample_t": -1e-3},
    ])
    def test_validation(self, kwargs):
        with pytest.raises(ConfigError):
            TrainConfig(**kwargs)

    def test_subsample_none_allowed(self):
        assert TrainConfig(subsample_t=None).subsample_t is None


class TestNoiseTable:
    def test_unsmoothed_proportional(self):
        table = build_noise_table({"a": 3, "b": 1}, alpha=1.0)
        assert table.probability("a") == pytest.approx(0.75)
        assert table.probability("b") == pytest.approx(0.25)

    def test_alpha_zero_uniform(self):
        table = build_noise_table({"a": 100, "b": 1, "c": 7}, alpha=0.0)
        for item in "abc":
            assert table.probability(item) == pytest.approx(1 / 3)

    def test_smoothed_three_quarters(self):
        table = build_noise_table({"a": 16, "b": 1}, alpha=0.75)
        # 16^0.75 = 8, 1^0.75 = 1
        assert table.probability("a") == pytest.approx(8 / 9)
        assert table.probability("b") == pytest.approx(1 / 9)

    def test_zero_counts_excluded(self):
        table = build_noise_table({"a": 5, "b": 0}, alpha=0.75)
        assert table.items == ["a"]
        assert table.probability("b") == 0.0

    def test_all_zero_counts(self):
        with pytest.raises(ConfigError):
            build_noise_table({"a": 0}, alpha=0.75)

    def test_sampling_matches_distribution(self, rng):
        table = build_noise_table({"a": 9, "b": 1}, alpha=1.0)
        draws = table.sample_items(rng, 20_000)
        frac_a = draws.count("a") / len(draws)
        assert frac_a == pytest.approx(0.9, abs=0.02)

    def test_sampling_deterministic(self):
        table = build_noise_table({"a": 1, "b": 2, "c": 3}, alpha=0.75)
        r1 = table.sample_items(np.random.default_rng(5), 50)
        r2 = table.sample_items(np.random.default_rng(5), 50)
        assert r1 == r2

    def test_cdf_covers_unit_interval(self):
        table = build_noise_table({"a": 1, "b": 1, "c": 1}, alpha=0.3)
        assert table.cdf[-1] == 1.0
        positions = table.sample_positions(np.random.default_rng(0), 1000)
        assert positions.min() >= 0 and positions.max() < 3


class TestKeepProbability:
    def test_frequent_item_downsampled(self):
        assert keep_probability(0.01, 1e-4) == pytest.approx(0.1)

    def test_rare_item_always_kept(self):
        assert keep_probability(1e-6, 1e-4) == 1.0

    def test_boundary(self):
        assert keep_probability(1e-3, 1e-3) == 1.0

    def test_disabled(self):
        assert keep_probability(0.9, None) == 1.0

    def test_invalid_frequency(self):
        with pytest.raises(ValueError):
            keep_probability(0.0, 1e-3)


class TestLossAndGradients:
    def test_frozen_value(self):
        t = np.array([1.0, 0.0])
        c = np.array([1.0, 0.0])
        n = np.array([0.0, 1.0])
        # log sigmoid(1) + log sigmoid(0)
        assert sgns_loss(t, c, [n]) == pytest.approx(-1.0064088680781682, abs=1e-14)

    def test_orthogonal_everything(self):
        t = np.array([1.0, 0.0])
        assert sgns_loss(t, np.array([0.0, 1.0]), []) == pytest.approx(math.log(0.5))

    def test_loss_increases_with_alignment(self):
        t = np.array([0.5, 0.5])
        near = sgns_loss(t, t, [])
        far = sgns_loss(t, -t, [])
        assert near > far

    def test_gradients_match_loss(self, rng):
        t = rng.normal(size=4)
        c = rng.normal(size=4)
        negs = [rng.normal(size=4) for _ in range(3)]
        loss, *_ = sgns_loss_gradients(t, c, negs)
        assert loss == pytest.approx(sgns_loss(t, c, negs), abs=1e-12)

    def test_gradients_vs_finite_differences(self, rng):
        h = 1e-6
        for _ in range(20):
            t = rng.normal(size=5)
            c = rng.normal(size=5)
            negs = [rng.normal(size=5) for _ in range(2)]
            _, g_t, g_c, g_n = sgns_loss_gradients(t, c, negs)

            def fd(vec, grad, rebuild):
                for j in range(5):
                    bump = np.zeros(5)
                    bump[j] = h
                    hi = sgns_loss(*rebuild(vec + bump))
                    lo = sgns_loss(*rebuild(vec - bump))
                    assert (hi - lo) / (2 * h) == pytest.approx(grad[j], abs=1e-6)

            fd(t, g_t, lambda v: (v, c, negs))
            fd(c, g_c, lambda v: (t, v, negs))
            fd(negs[0], g_n[0], lambda v: (t, c, [v, negs[1]]))

    def test_zero_negatives(self):
        t = np.array([0.3, -0.2])
        c = np.array([0.1, 0.4])
        loss, g_t, g_c, g_n = sgns_loss_gradients(t, c, [])
        assert g_n == []
        sig = 1 / (1 + math.exp(-float(t @ c)))
        assert np.allclose(g_t, (1 - sig) * c)
        assert np.allclose(g_c, (1 - sig) * t)


def _tiny_model_and_noise(seed=0):
    model = init_model(["a", "b", "c", "d"], dim=4, seed=seed)
    model.output_matrix[:] = np.random.default_rng(seed + 1).normal(
        scale=0.1, size=model.output_matrix.shape
    )
    noise = build_noise_table({"a": 1, "b": 1, "c": 1, "d": 1}, alpha=0.75)
    return model, noise


class TestSgdStep:
    def test_zero_learning_rate_is_noop(self):
        model, noise = _tiny_model_and_noise()
        before_in = model.input_matrix.copy()
        before_out = model.output_matrix.copy()
        sgd_step(model, "a", "b", noise, TrainConfig(dim=4), lr=0.0,
                 rng=np.random.default_rng(0))
        assert np.array_equal(model.input_matrix, before_in)
        assert np.array_equal(model.output_matrix, before_out)

    def test_unknown_item(self):
        model, noise = _tiny_model_and_noise()
        with pytest.raises(TrainingStreamError):
            sgd_step(model, "zzz", "b", noise, TrainConfig(dim=4), lr=0.1,
                     rng=np.random.default_rng(0))

    def test_positive_dot_increases(self):
        model, _ = _tiny_model_and_noise()
        # Noise drawn away from the true context so the positive update
        # is what we observe.
        noise = build_noise_table({"c": 1, "d": 1}, alpha=1.0)
        before = float(model.input_vector("a") @ model.output_vector("b"))
        rng = np.random.default_rng(3)
        for _ in range(30):
            sgd_step(model, "a", "b", noise, TrainConfig(dim=4), lr=0.1, rng=rng)
        after = float(model.input_vector("a") @ model.output_vector("b"))
        assert after > before

    def test_mutates_in_place(self):
        model, noise = _tiny_model_and_noise()
        got = sgd_step(model, "a", "b", noise, TrainConfig(dim=4), lr=0.05,
                       rng=np.random.default_rng(0))
        assert got is model


class TestEpochKernels:
    @pytest.mark.skipif(not HAVE_NUMBA, reason="numba not installed")
    def test_numba_matches_numpy(self):
        from duorec.sgns import _epoch_kernel_numba

        rng = np.random.default_rng(11)
        n_vocab, d, n_ex, k = 12, 6, 200, 4
        w_in_a = rng.normal(scale=0.1, size=(n_vocab, d))
        w_out_a = rng.normal(scale=0.1, size=(n_vocab, d))
        w_in_b = w_in_a.copy()
        w_out_b = w_out_a.copy()
        targets = rng.integers(0, n_vocab, n_ex)
        contexts = rng.integers(0, n_vocab, n_ex)
        negatives = rng.integers(0, n_vocab, (n_ex, k))
        keep = rng.random(n_ex) < 0.8

        la = _epoch_kernel_numba(w_in_a, w_out_a, targets, contexts, negatives,
                                 keep, 0.1, 0, float(n_ex * 2))
        lb = _epoch_numpy(w_in_b, w_out_b, targets, contexts, negatives,
                          keep, 0.1, 0, float(n_ex * 2))
        assert la[1] == lb[1] == int(keep.sum())
        assert la[0] == pytest.approx(lb[0], rel=1e-10)
        assert np.allclose(w_in_a, w_in_b, atol=1e-12)
        assert np.allclose(w_out_a, w_out_b, atol=1e-12)

    def test_lr_decay_clamps_at_zero(self):
        rng = np.random.default_rng(1)
        w_in = rng.normal(size=(3, 2))
        w_out = rng.normal(size=(3, 2))
        snap_in = w_in.copy()
        targets = np.array([0, 1], dtype=np.int64)
        contexts = np.array([1, 2], dtype=np.int64)
        negatives = np.array([[2], [0]], dtype=np.int64)
        keep = np.ones(2, dtype=np.bool_)
        # processed0 already past the budget: every step sees lr = 0.
        _epoch_numpy(w_in, w_out, targets, contexts, negatives, keep,
                     0.5, 100, 10.0)
        assert np.array_equal(w_in, snap_in)


class TestTrainPairs:
    def test_empty_dataset(self):
        with pytest.raises(ConfigError):
            train_pairs(make_pairs(), TrainConfig())

    def test_basic_run_and_vocab(self):
        pairs = make_pairs(("a", "b", 3), ("b", "c", 2))
        model = train_pairs(pairs, TrainConfig(dim=8, max_epochs=2, subsample_t=None))
        assert sorted(model.vocab) == ["a", "b", "c"]
        assert model.meta["mode"] == "pair"
        assert len(model.meta["history"]) == 2
        assert model.meta["history"][0]["examples"] > 0

    def test_deterministic_across_runs(self):
        pairs = make_pairs(("a", "b", 5), ("b", "c", 4), ("a", "c", 2))
        cfg = TrainConfig(dim=6, max_epochs=3, seed=9, subsample_t=None)
        m1 = train_pairs(pairs, cfg)
        m2 = train_pairs(pairs, cfg)
        assert np.array_equal(m1.input_matrix, m2.input_matrix)
        assert np.array_equal(m1.output_matrix, m2.output_matrix)

    def test_seed_changes_result(self):
        pairs = make_pairs(("a", "b", 5), ("b", "c", 4))
        m1 = train_pairs(pairs, TrainConfig(dim=6, max_epochs=2, seed=1, subsample_t=None))
        m2 = train_pairs(pairs, TrainConfig(dim=6, max_epochs=2, seed=2, subsample_t=None))
        assert not np.array_equal(m1.input_matrix, m2.input_matrix)

    def test_count_clamp_warns(self, caplog):
        pairs = make_pairs(("a", "b", 50), ("b", "c", 1))
        cfg = TrainConfig(dim=4, max_epochs=1, count_clamp=10, subsample_t=None)
        with caplog.at_level("WARNING"):
            train_pairs(pairs, cfg)
        assert "clamped 1 pair counts" in caplog.text

    def test_subsampling_reduces_examples(self):
        pairs = make_pairs(("a", "b", 200), ("c", "d", 1))
        base = train_pairs(pairs, TrainConfig(dim=4, max_epochs=1, seed=0,
                                              subsample_t=None))
        sub = train_pairs(pairs, TrainConfig(dim=4, max_epochs=1, seed=0,
                                             subsample_t=1e-3))
        assert sub.meta["history"][0]["examples"] < base.meta["history"][0]["examples"]

    def test_early_stop_and_best_checkpoint(self):
        pairs = make_pairs(("a", "b", 30), ("c", "d", 30), ("a", "c", 5))
        dev = DevSet({"a": ["b"], "c": ["d"]})
        cfg = TrainConfig(dim=8, max_epochs=12, early_stop_patience=2,
                          subsample_t=None, seed=4)
        model = train_pairs(pairs, cfg, dev=dev)
        history = model.meta["history"]
        assert model.meta["best_epoch"] is not None
        recalls = [row["dev_recall@20"] for row in history]
        assert recalls[model.meta["best_epoch"]] == max(recalls)
        # With patience 2 the run never continues more than 2 epochs past
        # its best.
        assert len(history) <= model.meta["best_epoch"] + 1 + cfg.early_stop_patience

    def test_progress_callback(self):
        seen = []
        pairs = make_pairs(("a", "b", 2))
        train_pairs(pairs, TrainConfig(dim=4, max_epochs=2, subsample_t=None),
                    progress=lambda *row: seen.append(row))
        assert len(seen) == 2
        assert seen[0][0] == 0 and seen[1][0] == 1

    def test_learning_separates_pairs(self):
        # Two disjoint strongly-coupled pairs: cross-matrix scores should
        # favour the true partner.
        pairs = make_pairs(("a", "b", 60), ("c", "d", 60))
        cfg = TrainConfig(dim=8, max_epochs=8, subsample_t=None, seed=7,
                          learning_rate=0.1)
        model = train_pairs(pairs, cfg)
        score_ab = float(model.input_vector("a") @ model.output_vector("b"))
        score_ad = float(model.input_vector("a") @ model.output_vector("d"))
        assert score_ab > score_ad


class TestWindowPairs:
    def test_three_items_window_one(self):
        got = enumerate_window_pairs(["a", "b", "c"], window=1)
        assert got == [("a", "b"), ("b", "a"), ("b", "c"), ("c", "b")]

    def test_window_spans_whole_list(self):
        got = enumerate_window_pairs(["a", "b", "c"], window=10)
        assert len(got) == 6  # every ordered pair

    def test_single_item(self):
        assert enumerate_window_pairs(["a"], window=3) == []

    def test_repeated_tokens(self):
        got = enumerate_window_pairs(["a", "a"], window=1)
        assert got == [("a", "a"), ("a", "a")]


class TestTrainSequences:
    def test_empty_sessions(self):
        from duorec.corpus import SessionSet

        with pytest.raises(ConfigError):
            train_sequences(SessionSet(), TrainConfig())

    def test_basic_run(self):
        sessions = make_sessions(["a", "b", "c"], ["b", "c", "d"], channel="click")
        cfg = TrainConfig(dim=6, max_epochs=2, window=2, subsample_t=None)
        model = train_sequences(sessions, cfg)
        assert sorted(model.vocab) == ["a", "b", "c", "d"]
        assert model.meta["mode"] == "sequence"

    def test_deterministic(self):
        sessions = make_sessions(["a", "b", "c", "d"], ["a", "c"], channel="click")
        cfg = TrainConfig(dim=5, max_epochs=3, window=2, seed=2, subsample_t=None)
        m1 = train_sequences(sessions, cfg)
        m2 = train_sequences(sessions, cfg)
        assert np.array_equal(m1.input_matrix, m2.input_matrix)

    def test_neighbours_align(self):
        # a and b always adjacent; a and e never co-occur.
        sessions = make_sessions(*[["a", "b"] for _ in range(40)],
                                 *[["d", "e"] for _ in range(40)],
                                 channel="click")
        cfg = TrainConfig(dim=8, max_epochs=8, window=2, subsample_t=None,
                          learning_rate=0.1, seed=1)
        model = train_sequences(sessions, cfg)
        assert (model.input_vector("a") @ model.output_vector("b")
                > model.input_vector("a") @ model.output_vector("e"))


class TestDevEvaluation:
    def _fixture(self):
        # Input a points at output b; input c points at output d.
        vocab = ["a", "b", "c", "d"]
        w_in = np.array([
            [1.0, 0.0],
            [0.0, 1.0],
            [0.0, 1.0],
            [1.0, 1.0],
        ])
        w_out = np.array([
            [0.1, 0.1],
            [1.0, 0.0],
            [0.0, 1.0],
            [0.0, 1.0],
        ])
        return DualEmbedding(vocab, w_in, w_out)

    def test_hand_computed(self):
        model = self._fixture()
        dev = DevSet({"a": ["b"], "c": ["b"]})
        # Query a: ranking by cosine against outputs (self-row excluded)
        # puts b first (cos=1). Query c: nearest outputs are c,d (excluded/..)
        precision, recall = dev_precision_recall_at_k(model, dev, k=1)
        # a hits (b at rank 1); c misses (rank-1 item is d, cos=1).
        assert recall == pytest.approx(0.5)
        assert precision == pytest.approx(0.5)

    def test_out_of_vocab_query_scores_zero(self):
        model = self._fixture()
        dev = DevSet({"zzz": ["b"], "a": ["b"]})
        _, recall = dev_precision_recall_at_k(model, dev, k=1)
        assert recall == pytest.approx(0.5)

    def test_empty_dev(self):
        assert dev_precision_recall_at_k(self._fixture(), DevSet({})) == (0.0, 0.0)

    def test_zero_output_rows_excluded(self):
        vocab = ["a", "b", "c"]
        w_in = np.eye(3)
        w_out = np.array([[0.0, 0.0, 0.0], [0.0, 0.0, 0.0], [1.0, 0.0, 0.0]])
        model = DualEmbedding(vocab, w_in, w_out)
        dev = DevSet({"a": ["c"]})
        _, recall = dev_precision_recall_at_k(model, dev, k=2)
        # b's output row is zero, so only c can be retrieved.
        assert recall == pytest.approx(1.0)

    def test_recall_wrapper(self):
        model = self._fixture()
        dev = DevSet({"a": ["b"]})
        assert dev_recall_at_k(model, dev, 1) == dev_precision_recall_at_k(model, dev, 1)[1]


class TestModelIo:
    def _model(self, meta=None):
        rng = np.random.default_rng(3)
        model = init_model(["alpha", "beta", "gamma"], dim=4, seed=3)
        model.output_matrix[:] = rng.normal(size=model.output_matrix.shape)
        if meta:
            model.meta.update(meta)
        return model

    def test_text_round_trip_exact(self, tmp_path):
        model = self._model()
        p = tmp_path / "model.txt"
        save_model(model, p)
        got = load_model(p)
        assert got.vocab == model.vocab
        assert np.array_equal(got.input_matrix, model.input_matrix)
        assert np.array_equal(got.output_matrix, model.output_matrix)

    def test_binary_round_trip(self, tmp_path):
        model = self._model()
        p = tmp_path / "model.bin"
        save_model(model, p, binary=True)
        got = load_model(p)
        assert got.vocab == model.vocab
        assert np.allclose(got.input_matrix, model.input_matrix, atol=1e-6)

    def test_sidecar_round_trip(self, tmp_path):
        model = self._model(meta={"mode": "pair", "best_epoch": 3})
        p = tmp_path / "model.txt"
        save_model(model, p)
        assert sidecar_path(p).exists()
        got = load_model(p)
        assert got.meta["mode"] == "pair"
        assert got.meta["best_epoch"] == 3

    def test_no_sidecar_without_meta(self, tmp_path):
        p = tmp_path / "model.txt"
        save_model(self._model(), p)
        assert not sidecar_path(p).exists()

    def test_save_is_byte_stable(self, tmp_path):
        model = self._model()
        p1, p2 = tmp_path / "m1.txt", tmp_path / "m2.txt"
        save_model(model, p1)
        save_model(model, p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_missing_file(self, tmp_path):
        with pytest.raises(InputError):
            load_model(tmp_path / "nope.txt")

    @pytest.mark.parametrize("content", [
        "not a model at all\n",
        "DUALEMB 2 1 2\na\t0.0 0.0\t0.0 0.0\n",        # bad version
        "DUALEMB 1 2 2\na\t0.0 0.0\t0.0 0.0\n",         # truncated
        "DUALEMB 1 1 2\na\t0.0\t0.0 0.0\n",             # wrong width
        "DUALEMB 1 1 2\na\tx y\t0.0 0.0\n",             # non-numeric
    ])
    def test_corrupt_files(self, tmp_path, content):
        p = tmp_path / "bad.txt"
        p.write_text(content)
        with pytest.raises(InputError):
            load_model(p)

    def test_corrupt_binary(self, tmp_path):
        p = tmp_path / "bad.bin"
        p.write_bytes(b"DUALEMBB 1 2 4\nitem\n\x00\x00")
        with pytest.raises(InputError):
            load_model(p)
