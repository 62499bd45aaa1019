"""Metric arithmetic against brute-force recounts, the training loop's
learning behavior, determinism, and early stopping."""

import numpy as np
import pytest

from quadcode.errors import QuadcodeError
from quadcode.models import build_word_cnn, predict, tiny_word_config
from quadcode.text_encoding import EncodedExample
from quadcode.train_eval import (
    EmptyDatasetError,
    EpochStats,
    Metrics,
    TrainConfig,
    evaluate,
    read_history,
    train,
    write_history,
)

# --- oracle -------------------------------------------------------------------


def brute_force_metrics(truths, preds):
    """Recount accuracy/precision/recall from the raw pairs, no matrix algebra."""
    n = len(truths)
    accuracy = sum(t == p for t, p in zip(truths, preds)) / n
    precision, recall = [], []
    for c in range(4):
        tp = sum(1 for t, p in zip(truths, preds) if t == c and p == c)
        predicted = sum(1 for p in preds if p == c)
        actual = sum(1 for t in truths if t == c)
        precision.append(tp / predicted if predicted else 0.0)
        recall.append(tp / actual if actual else 0.0)
    return accuracy, precision, recall


def confusion_of(truths, preds):
    m = np.zeros((4, 4), dtype=np.int64)
    for t, p in zip(truths, preds):
        m[t, p] += 1
    return m


class TestMetrics:
    def test_against_brute_force_on_random_pairs(self):
        gen = np.random.default_rng(17)
        for _ in range(25):
            n = int(gen.integers(1, 60))
            truths = gen.integers(0, 4, size=n).tolist()
            preds = gen.integers(0, 4, size=n).tolist()
            metrics = Metrics(confusion_of(truths, preds))
            accuracy, precision, recall = brute_force_metrics(truths, preds)
            assert abs(metrics.accuracy - accuracy) < 1e-12
            np.testing.assert_allclose(metrics.precision, precision, atol=1e-12)
            np.testing.assert_allclose(metrics.recall, recall, atol=1e-12)

    def test_perfect_predictor(self):
        truths = [0, 1, 2, 3, 2, 1]
        metrics = Metrics(confusion_of(truths, truths))
        assert metrics.accuracy == 1.0
        assert (metrics.precision == 1.0).all() and (metrics.recall == 1.0).all()

    def test_constant_predictor(self):
        truths = [0, 1, 2, 3]
        preds = [2, 2, 2, 2]
        metrics = Metrics(confusion_of(truths, preds))
        assert metrics.accuracy == 0.25
        assert metrics.precision[2] == 0.25 and metrics.recall[2] == 1.0
        # classes never predicted / never seen get 0, not NaN
        assert metrics.precision[0] == 0.0 and np.isfinite(metrics.precision).all()

    def test_row_sums_are_true_counts(self):
        gen = np.random.default_rng(3)
        truths = gen.integers(0, 4, size=40).tolist()
        preds = gen.integers(0, 4, size=40).tolist()
        metrics = Metrics(confusion_of(truths, preds))
        for c in range(4):
            assert metrics.confusion[c].sum() == truths.count(c)
        assert metrics.total == 40

    def test_json_obj_shape(self):
        metrics = Metrics(np.eye(4, dtype=np.int64))
        obj = metrics.to_json_obj()
        assert obj["accuracy"] == 1.0 and obj["total"] == 4
        assert len(obj["precision"]) == 4 and len(obj["confusion"]) == 4

    def test_lines_render_with_names(self):
        metrics = Metrics(np.eye(4, dtype=np.int64))
        text = "\n".join(metrics.lines(["a", "b", "c", "d"]))
        assert "accuracy 1.0000" in text and "confusion" in text

    def test_rejects_bad_shape(self):
        with pytest.raises(QuadcodeError):
            Metrics(np.zeros((3, 3), dtype=np.int64))
        with pytest.raises(QuadcodeError):
            Metrics(np.full((4, 4), -1, dtype=np.int64))


def _examples(n, length=16, vocab=50, seed=0):
    gen = np.random.default_rng(seed)
    return [
        EncodedExample(gen.integers(1, vocab, size=length, dtype=np.int64), int(gen.integers(0, 4)))
        for _ in range(n)
    ]


class TestEvaluate:
    def test_counts_match_manual_loop(self):
        model = build_word_cnn(tiny_word_config(), seed=0)
        examples = _examples(30, seed=2)
        metrics = evaluate(model, examples)
        truths = [e.label for e in examples]
        preds = [predict(model, e.indices)[0] for e in examples]
        assert (metrics.confusion == confusion_of(truths, preds)).all()

    def test_empty_set_rejected(self):
        model = build_word_cnn(tiny_word_config(), seed=0)
        with pytest.raises(EmptyDatasetError):
            evaluate(model, [])

    def test_thread_count_does_not_change_counts(self, monkeypatch):
        model = build_word_cnn(tiny_word_config(), seed=1)
        examples = _examples(40, seed=3)
        monkeypatch.setenv("QUADCODE_THREADS", "1")
        serial = evaluate(model, examples)
        monkeypatch.setenv("QUADCODE_THREADS", "5")
        threaded = evaluate(model, examples)
        assert (serial.confusion == threaded.confusion).all()


class TestTrainingLoop:
    def _separable_examples(self, n, seed=0):
        # class c sentences use tokens from a disjoint id range, trivially separable
        gen = np.random.default_rng(seed)
        out = []
        for i in range(n):
            label = i % 4
            low = 2 + label * 12
            indices = gen.integers(low, low + 12, size=16, dtype=np.int64)
            out.append(EncodedExample(indices, label))
        return out

    def test_one_batch_overfit(self):
        # the core learning sanity check: loss on a single repeated batch
        # must collapse toward zero well within 500 steps; dropout is off so
        # the loss is a deterministic function the optimizer can actually sink
        import dataclasses

        config = dataclasses.replace(tiny_word_config(), dropout=0.0)
        model = build_word_cnn(config, seed=0)
        batch = self._separable_examples(8, seed=5)
        config = TrainConfig(batch_size=8, epochs=500, patience=500, shuffle=False, lr=1e-3, seed=0)
        _, history = train(model, batch, batch, config)
        losses = [h.train_loss for h in history]
        assert min(losses) < 0.01
        # smoothed trend is downward: late average far below early average
        early = np.mean(losses[:10])
        late = np.mean(losses[-10:])
        assert late < early * 0.1

    def test_learns_separable_data(self):
        model = build_word_cnn(tiny_word_config(), seed=1)
        train_set = self._separable_examples(80, seed=6)
        dev_set = self._separable_examples(20, seed=7)
        config = TrainConfig(batch_size=16, epochs=30, patience=30, seed=1)
        model, history = train(model, train_set, dev_set, config)
        assert max(h.dev_accuracy for h in history) >= 0.9

    def test_same_seed_identical_history_and_weights(self):
        train_set = self._separable_examples(24, seed=8)
        dev_set = self._separable_examples(8, seed=9)
        config = TrainConfig(batch_size=8, epochs=3, patience=5, seed=42)
        model_a, history_a = train(build_word_cnn(tiny_word_config(), seed=2), train_set, dev_set, config)
        model_b, history_b = train(build_word_cnn(tiny_word_config(), seed=2), train_set, dev_set, config)
        assert history_a == history_b
        for pa, pb in zip(model_a.parameters(), model_b.parameters()):
            assert (pa.value == pb.value).all()

    def test_different_seed_different_path(self):
        train_set = self._separable_examples(24, seed=8)
        dev_set = self._separable_examples(8, seed=9)
        config_a = TrainConfig(batch_size=8, epochs=2, patience=5, seed=1)
        config_b = TrainConfig(batch_size=8, epochs=2, patience=5, seed=2)
        _, history_a = train(build_word_cnn(tiny_word_config(), seed=2), train_set, dev_set, config_a)
        _, history_b = train(build_word_cnn(tiny_word_config(), seed=2), train_set, dev_set, config_b)
        assert history_a != history_b

    def test_early_stopping_and_best_restore(self):
        model = build_word_cnn(tiny_word_config(), seed=3)
        train_set = self._separable_examples(32, seed=10)
        dev_set = self._separable_examples(12, seed=11)
        config = TrainConfig(batch_size=8, epochs=200, patience=2, seed=3)
        model, history = train(model, train_set, dev_set, config)
        assert len(history) < 200  # stopped early
        best = max(h.dev_accuracy for h in history)
        # restored parameters reproduce the best epoch's dev accuracy
        assert evaluate(model, dev_set).accuracy == best
        # stopping rule: the tail after the best epoch is at most patience+1 long
        best_epoch = max(history, key=lambda h: (h.dev_accuracy, -h.epoch)).epoch
        assert history[-1].epoch - best_epoch <= config.patience + 1

    def test_epochs_one_runs_single_epoch(self):
        model = build_word_cnn(tiny_word_config(), seed=0)
        data = self._separable_examples(8, seed=12)
        _, history = train(model, data, data, TrainConfig(batch_size=4, epochs=1, seed=0))
        assert [h.epoch for h in history] == [1]

    def test_empty_sets_rejected(self):
        model = build_word_cnn(tiny_word_config(), seed=0)
        data = self._separable_examples(4)
        with pytest.raises(EmptyDatasetError):
            train(model, [], data, TrainConfig())
        with pytest.raises(EmptyDatasetError):
            train(model, data, [], TrainConfig())

    def test_sgd_also_trains(self):
        model = build_word_cnn(tiny_word_config(), seed=4)
        batch = self._separable_examples(8, seed=13)
        config = TrainConfig(batch_size=8, epochs=300, patience=300, shuffle=False,
                             optimizer="sgd", lr=0.05, momentum=0.9, seed=0)
        _, history = train(model, batch, batch, config)
        assert min(h.train_loss for h in history) < 0.05

    def test_bad_config_rejected(self):
        from quadcode.errors import InputError

        with pytest.raises(InputError):
            TrainConfig(batch_size=0)
        with pytest.raises(InputError):
            TrainConfig(epochs=0)
        with pytest.raises(InputError):
            TrainConfig(patience=-1)


class TestHistoryFiles:
    def test_round_trip(self, tmp_path):
        history = [EpochStats(1, 1.25, 0.5), EpochStats(2, 0.75, 0.625)]
        path = tmp_path / "history.jsonl"
        write_history(history, path)
        assert read_history(path) == history

    def test_written_shape(self, tmp_path):
        path = tmp_path / "history.jsonl"
        write_history([EpochStats(1, 1.0, 0.25)], path)
        assert path.read_text() == '{"epoch":1,"train_loss":1.0,"dev_accuracy":0.25}\n'

    def test_bad_line_reports_position(self, tmp_path):
        from quadcode.errors import InputError

        path = tmp_path / "history.jsonl"
        path.write_text('{"epoch":1,"train_loss":1.0,"dev_accuracy":0.25}\n{"epoch":2}\n')
        with pytest.raises(InputError, match="line 2"):
            read_history(path)
