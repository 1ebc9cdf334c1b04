"""
Desk-scale robustness experiments.

Trains standard, robust and ds_robust models on a seeded two-class Gaussian
dataset for three seeds and checks the robustness gap, the selected
composition over training, and the minimum-eps trend on a fixed probe set.
Deselect with ``-m "not integration"``.
"""

import unittest

import numpy as np
import pytest

from adv_data_selection.data.sources import load_source
from adv_data_selection.engine.training import AdversarialTrainer
from adv_data_selection.schema.run_config import AttackConfig, DatasetSource, SelectionPolicy, TrainConfig

SEEDS = (0, 1, 2)
DIMS = 20
EPOCHS = 30

# dim 0 survives an eps = 0.1 attack; the other dims sit 0.13 apart, less than 2 * eps,
# so they help clean accuracy and invert under attack
CLASS_MEANS = [
    [0.25] + [0.435] * (DIMS - 1),
    [0.75] + [0.565] * (DIMS - 1),
]
SIGMA = 0.2

ATTACK = AttackConfig(epsilon=0.1, alpha=0.02, steps=10)


def dataset_source():
    return DatasetSource(
        kind="synthetic",
        samples_per_class=1250,
        dims=DIMS,
        class_means=CLASS_MEANS,
        sigma=SIGMA,
        split_fractions=(0.8, 0.0, 0.2),
    )


def train_config(mode, seed, policy=None, probe_size=0):
    return TrainConfig(
        mode=mode,
        batch_clean_size=20,
        epochs=EPOCHS,
        learning_rate=0.05,
        hidden_dims=[32, 32],
        attack=ATTACK,
        eval_attack=ATTACK,
        policy=policy or SelectionPolicy(),
        seed=seed,
        probe_size=probe_size,
        probe_every=EPOCHS,
    )


def adversarial_share(metrics):
    selected = metrics.selected_clean_count + metrics.selected_adversarial_count
    return metrics.selected_adversarial_count / selected


@pytest.mark.integration
class TestRobustnessExperiment(unittest.TestCase):
    """Three-mode comparison over three seeds."""

    @classmethod
    def setUpClass(cls):
        """Train every mode once per seed."""
        cls.results = {}
        for seed in SEEDS:
            data = load_source(dataset_source(), seed)
            assert len(data.train) == 2000 and len(data.test) == 500
            runs = {
                "standard": train_config("standard", seed),
                "robust": train_config("robust", seed, probe_size=50),
                "ds_robust": train_config("ds_robust", seed, SelectionPolicy(kind="top_loss", pup=0.5)),
            }
            for name, cfg in runs.items():
                cls.results[(name, seed)] = AdversarialTrainer(cfg, data.train, data.eval_set()).fit()

    def final(self, name, seed):
        return self.results[(name, seed)].final

    def test_robust_training_beats_standard_under_attack(self):
        for seed in SEEDS:
            gap = self.final("robust", seed).robust_accuracy - self.final("standard", seed).robust_accuracy
            self.assertGreaterEqual(gap, 0.10, msg=f"seed {seed}")

    def test_half_selection_keeps_robustness(self):
        for seed in SEEDS:
            ds = self.final("ds_robust", seed).robust_accuracy
            robust = self.final("robust", seed).robust_accuracy
            self.assertLessEqual(abs(ds - robust), 0.03, msg=f"seed {seed}")

    def test_half_selection_standard_accuracy(self):
        ds = np.mean([self.final("ds_robust", seed).standard_accuracy for seed in SEEDS])
        robust = np.mean([self.final("robust", seed).standard_accuracy for seed in SEEDS])
        self.assertGreaterEqual(ds, robust)

    def test_half_selection_halves_backward_passes(self):
        for seed in SEEDS:
            history = self.results[("ds_robust", seed)].history
            for metrics in history:
                self.assertEqual(metrics.backward_pass_count * 2, metrics.rows_processed)

    def test_baselines_update_on_every_row(self):
        for seed in SEEDS:
            for name in ("standard", "robust"):
                for metrics in self.results[(name, seed)].history:
                    self.assertEqual(metrics.backward_pass_count, metrics.rows_processed)

    def test_adversarial_share_falls(self):
        for seed in SEEDS:
            history = self.results[("ds_robust", seed)].history
            self.assertGreater(adversarial_share(history[0]), adversarial_share(history[-1]), msg=f"seed {seed}")

    def test_min_eps_grows_with_robust_training(self):
        for seed in SEEDS:
            result = self.results[("robust", seed)]
            before = result.initial_probe.mean
            after = result.final.mean_min_eps
            self.assertIsNotNone(before)
            self.assertIsNotNone(after)
            self.assertGreater(after, before, msg=f"seed {seed}")


if __name__ == "__main__":
    unittest.main()
