"""
Tests for batch composition, the epoch loop, evaluation and diagnostics.
"""

import unittest

import numpy as np

from adv_data_selection.data.dataset import Dataset
from adv_data_selection.data.synthetic import synth_gaussians
from adv_data_selection.engine.diagnostics import (
    MinEpsReport,
    choose_probe,
    min_eps_probe,
    selection_composition,
)
from adv_data_selection.engine.numerics import Model, forward, init_model
from adv_data_selection.engine.selection import (
    ORIGIN_ADVERSARIAL,
    ORIGIN_CLEAN,
    error_signal,
    select_all,
    select_top,
)
from adv_data_selection.engine.training import (
    AdversarialTrainer,
    BatchComposition,
    EpochState,
    compose_batch,
    evaluate,
    train_epoch,
)
from adv_data_selection.errors import InputError
from adv_data_selection.schema.run_config import AttackConfig, TrainConfig, TrainingMode


def blobs(seed=0, per_class=40, dims=4):
    means = [[0.3] * dims, [0.7] * dims]
    return synth_gaussians(seed, per_class, dims, means, sigma=0.05)


def config(**overrides):
    base = {
        "mode": "ds_robust",
        "batch_clean_size": 8,
        "epochs": 2,
        "learning_rate": 0.1,
        "hidden_dims": [6],
        "attack": {"epsilon": 0.05, "alpha": 0.02, "steps": 3},
        "eval_attack": {"epsilon": 0.05, "alpha": 0.02, "steps": 3},
        "policy": {"kind": "top_loss", "pup": 0.5},
        "seed": 1,
    }
    for key, value in overrides.items():
        if isinstance(value, dict) and isinstance(base.get(key), dict):
            base[key] = {**base[key], **value}
        else:
            base[key] = value
    return TrainConfig.model_validate(base)


class TestComposeBatch(unittest.TestCase):
    """Test cases for batch composition per mode."""

    def setUp(self):
        self.dataset = blobs()
        self.model = init_model([4, 6, 2], np.random.default_rng(0))
        self.attack = AttackConfig(epsilon=0.1, alpha=0.05, steps=4)
        self.indices = [3, 50, 7, 61]

    def test_mixed_layout(self):
        batch = compose_batch(self.model, self.dataset, self.indices, self.attack, TrainingMode.DS_ROBUST)
        self.assertEqual(batch.size, 8)
        np.testing.assert_array_equal(batch.origins, [ORIGIN_ADVERSARIAL] * 4 + [ORIGIN_CLEAN] * 4)
        np.testing.assert_array_equal(batch.source_indices, self.indices * 2)
        np.testing.assert_array_equal(batch.inputs[4:], self.dataset.features[self.indices])
        self.assertTrue(np.all(np.abs(batch.inputs[:4] - batch.inputs[4:]) <= self.attack.epsilon))
        np.testing.assert_array_equal(batch.labels[:4], batch.labels[4:])

    def test_standard_is_clean_only(self):
        batch = compose_batch(self.model, self.dataset, self.indices, self.attack, TrainingMode.STANDARD)
        self.assertEqual(batch.size, 4)
        self.assertTrue(np.all(batch.origins == ORIGIN_CLEAN))

    def test_robust_is_adversarial_only(self):
        batch = compose_batch(self.model, self.dataset, self.indices, self.attack, TrainingMode.ROBUST)
        self.assertEqual(batch.adversarial_count, 4)
        self.assertTrue(np.all(np.abs(batch.inputs - self.dataset.features[self.indices]) <= self.attack.epsilon))

    def test_zero_epsilon_duplicates_clean(self):
        attack = AttackConfig(epsilon=0.0, alpha=0.05, steps=2)
        batch = compose_batch(self.model, self.dataset, self.indices, attack, TrainingMode.DS_ROBUST)
        np.testing.assert_array_equal(batch.inputs[:4], batch.inputs[4:])

    def test_invalid_indices(self):
        with self.assertRaises(InputError):
            compose_batch(self.model, self.dataset, [len(self.dataset)], self.attack, TrainingMode.STANDARD)


class TestEvaluate(unittest.TestCase):
    """Test cases for standard and robust accuracy."""

    def test_constant_logits_predict_class_zero(self):
        labels = np.array([0, 0, 1, 1, 1])
        dataset = Dataset(features=np.full((5, 2), 0.5), labels=labels, class_count=2)
        model = Model(layer_dims=[2, 2], weights=[np.zeros((2, 2))], biases=[np.zeros(2)])
        self.assertAlmostEqual(evaluate(model, dataset), 0.4)

    def test_zero_budget_equals_standard(self):
        dataset = blobs()
        model = init_model([4, 6, 2], np.random.default_rng(2))
        attack = AttackConfig(epsilon=0.0, alpha=0.01, steps=2)
        self.assertEqual(evaluate(model, dataset, attack), evaluate(model, dataset))

    def test_chunking_does_not_change_result(self):
        dataset = blobs()
        model = init_model([4, 6, 2], np.random.default_rng(2))
        attack = AttackConfig(epsilon=0.1, alpha=0.02, steps=3)
        self.assertEqual(evaluate(model, dataset, attack, chunk_size=7), evaluate(model, dataset, attack, chunk_size=500))


class TestTrainEpoch(unittest.TestCase):
    """Test cases for one epoch of training."""

    def setUp(self):
        self.dataset = blobs(per_class=40)
        self.model = init_model([4, 6, 2], np.random.default_rng(0))

    def test_backward_accounting_half(self):
        cfg = config(batch_clean_size=10)
        _, metrics = train_epoch(self.model, self.dataset, cfg, EpochState(epoch=1, pup=0.5))
        self.assertEqual(metrics.batch_count, 8)
        self.assertEqual(metrics.rows_processed, 160)
        self.assertEqual(metrics.backward_pass_count, 80)
        self.assertEqual(metrics.selected_clean_count + metrics.selected_adversarial_count, 80)
        self.assertAlmostEqual(metrics.mean_selected_clean + metrics.mean_selected_adversarial, 10.0)

    def test_ragged_last_batch(self):
        cfg = config(batch_clean_size=12)
        _, metrics = train_epoch(self.model, self.dataset, cfg, EpochState(epoch=1, pup=0.5))
        # 80 rows: six batches of 24 and one of 16
        self.assertEqual(metrics.batch_count, 7)
        self.assertEqual(metrics.backward_pass_count, 6 * 12 + 8)

    def test_full_fraction_uses_every_row(self):
        cfg = config(policy={"pup": 1.0})
        _, metrics = train_epoch(self.model, self.dataset, cfg, EpochState(epoch=1, pup=1.0))
        self.assertEqual(metrics.backward_pass_count, metrics.rows_processed)
        self.assertEqual(metrics.selected_clean_count, metrics.selected_adversarial_count)

    def test_standard_mode_same_rows_per_step(self):
        cfg = config(mode="standard", policy={"kind": "all"})
        _, metrics = train_epoch(self.model, self.dataset, cfg, EpochState(epoch=1, pup=0.5))
        self.assertEqual(metrics.rows_processed, 80)
        self.assertEqual(metrics.batch_count, 5)
        self.assertEqual(metrics.selected_adversarial_count, 0)
        self.assertEqual(metrics.effective_pup, 1.0)

    def test_deterministic(self):
        cfg = config()
        a, ma = train_epoch(self.model, self.dataset, cfg, EpochState(epoch=1, pup=0.5))
        b, mb = train_epoch(self.model, self.dataset, cfg, EpochState(epoch=1, pup=0.5))
        for wa, wb in zip(a.weights + a.biases, b.weights + b.biases):
            np.testing.assert_array_equal(wa, wb)
        self.assertEqual(ma.model_dump(exclude={"wall_time"}), mb.model_dump(exclude={"wall_time"}))

    def test_plain_sgd_loss_decreases(self):
        cfg = config(mode="standard", policy={"kind": "all"}, learning_rate=0.5, epochs=5)
        trainer = AdversarialTrainer(cfg, self.dataset)
        result = trainer.fit(self.model)
        losses = [m.train_loss for m in result.history]
        self.assertEqual(len(losses), 5)
        self.assertLess(losses[-1], losses[0])

    def test_empty_dataset(self):
        empty = self.dataset.subset([])
        with self.assertRaises(InputError):
            train_epoch(self.model, empty, config(), EpochState(epoch=1, pup=0.5))


class TestTrainer(unittest.TestCase):
    """Test cases for the epoch loop driver."""

    def setUp(self):
        self.dataset = blobs(per_class=30)

    def test_adaptive_fraction_shrinks(self):
        cfg = config(policy={"schedule": "adaptive", "pup0": 1.0, "floor": 0.05}, epochs=3)
        result = AdversarialTrainer(cfg, self.dataset).fit()
        pups = [m.effective_pup for m in result.history]
        self.assertEqual(pups[0], 1.0)
        self.assertTrue(all(b <= a for a, b in zip(pups, pups[1:])))
        self.assertGreaterEqual(min(pups), 0.05)

    def test_callback_and_probe(self):
        seen = []
        cfg = config(probe_size=6, probe_every=2, epochs=3, probe_grid=[0.0, 0.1, 0.2, 0.4])
        trainer = AdversarialTrainer(cfg, self.dataset, on_epoch=lambda m, _: seen.append(m.epoch))
        result = trainer.fit()
        self.assertEqual(seen, [1, 2, 3])
        self.assertIsNotNone(result.initial_probe)
        self.assertIsNone(result.history[0].min_eps_flipped)
        self.assertIsNotNone(result.history[1].min_eps_flipped)
        self.assertIsNotNone(result.history[2].min_eps_flipped)

    def test_early_stop(self):
        cfg = config(epochs=30, early_stop_patience=1, learning_rate=1e-6)
        result = AdversarialTrainer(cfg, self.dataset).fit()
        self.assertTrue(result.stopped_early)
        self.assertLess(len(result.history), 30)

    def test_two_runs_identical(self):
        cfg = config()
        a = AdversarialTrainer(cfg, self.dataset).fit()
        b = AdversarialTrainer(cfg, self.dataset).fit()
        for wa, wb in zip(a.model.weights, b.model.weights):
            np.testing.assert_array_equal(wa, wb)

    def test_random_mode_selects_at_random(self):
        cfg = config(mode="random_robust", policy={"kind": "top_loss", "pup": 0.25})
        result = AdversarialTrainer(cfg, self.dataset).fit()
        # 60 rows: seven batches of 16 rows (k = 4) and one of 8 (k = 2)
        self.assertEqual(result.history[0].backward_pass_count, 7 * 4 + 2)


class TestDiagnostics(unittest.TestCase):
    """Test cases for composition counts and the min-eps probe."""

    def setUp(self):
        b = 4
        self.batch = BatchComposition(
            inputs=np.zeros((2 * b, 2)),
            labels=np.zeros(2 * b, dtype=int),
            origins=np.array([ORIGIN_ADVERSARIAL] * b + [ORIGIN_CLEAN] * b),
            source_indices=np.tile(np.arange(b), 2),
        )

    def test_select_all(self):
        self.assertEqual(selection_composition(select_all(8), self.batch), (4, 4))

    def test_layout_rule(self):
        losses = np.zeros(8)
        losses[[0, 1, 4]] = 1.0
        selection = select_top(losses, 3 / 8)
        self.assertEqual(selection_composition(selection, self.batch), (1, 2))

    def test_size_mismatch(self):
        with self.assertRaises(InputError):
            selection_composition(select_all(5), self.batch)

    def test_untrained_prefers_adversarial(self):
        dataset = blobs(per_class=50)
        attack = AttackConfig(epsilon=0.3, alpha=0.1, steps=5)
        clean_total = adversarial_total = 0
        for seed in range(10):
            model = init_model([4, 6, 2], np.random.default_rng(seed))
            rng = np.random.default_rng(seed + 100)
            indices = rng.choice(len(dataset), size=16, replace=False)
            batch = compose_batch(model, dataset, indices, attack, TrainingMode.DS_ROBUST)
            selection = select_top(error_signal(forward(model, batch.inputs), batch.labels), 0.5)
            clean, adversarial = selection_composition(selection, batch)
            clean_total += clean
            adversarial_total += adversarial
        self.assertGreaterEqual(adversarial_total, clean_total)

    def test_grid_of_zero_counts_misclassified(self):
        dataset = blobs(per_class=10)
        model = Model(layer_dims=[4, 2], weights=[np.zeros((4, 2))], biases=[np.zeros(2)])
        report = min_eps_probe(model, dataset, [0.0], AttackConfig(alpha=0.01, steps=2))
        self.assertEqual(report.flipped, 10)
        self.assertEqual(report.mean, 0.0)

    def test_empty_grid(self):
        model = init_model([4, 2], np.random.default_rng(0))
        with self.assertRaises(InputError):
            min_eps_probe(model, blobs(per_class=2), [], AttackConfig())

    def test_report_mean_ignores_unflipped(self):
        self.assertAlmostEqual(MinEpsReport(values=[0.1, None, 0.3]).mean, 0.2)
        self.assertIsNone(MinEpsReport(values=[None]).mean)

    def test_choose_probe_fixed(self):
        dataset = blobs(per_class=20)
        a = choose_probe(dataset, 5, 3)
        b = choose_probe(dataset, 5, 3)
        self.assertEqual(len(a), 5)
        np.testing.assert_array_equal(a.features, b.features)


if __name__ == "__main__":
    unittest.main()
