"""
Tests for the numerics module.
"""

import unittest

import numpy as np

from adv_data_selection.engine.numerics import (
    Gradients,
    Model,
    check_gradients,
    finite_diff_input_grad,
    finite_diff_param_grad,
    forward,
    init_model,
    loss_and_input_grad,
    param_grad,
    per_sample_loss,
    predict,
    relative_error,
    sgd_step,
    softmax_cross_entropy,
)
from adv_data_selection.errors import DimensionError, EmptySelectionError, InputError


def random_case(seed):
    """Random model (<= 3 layers, <= 32 units) and batch (<= 8 rows)."""
    rng = np.random.default_rng(seed)
    hidden = [int(h) for h in rng.integers(2, 33, size=int(rng.integers(0, 3)))]
    dims = [int(rng.integers(2, 9)), *hidden, int(rng.integers(2, 5))]
    model = init_model(dims, rng)
    model.biases = [rng.uniform(-0.1, 0.1, size=b.shape) for b in model.biases]
    rows = int(rng.integers(1, 9))
    x = rng.uniform(0.0, 1.0, size=(rows, dims[0]))
    y = rng.integers(0, dims[-1], size=rows)
    return model, x, y


class TestModel(unittest.TestCase):
    """Test cases for model construction and shape checks."""

    def test_init_shapes(self):
        model = init_model([5, 7, 3], np.random.default_rng(0))
        self.assertEqual([w.shape for w in model.weights], [(5, 7), (7, 3)])
        self.assertEqual([b.shape for b in model.biases], [(7,), (3,)])
        self.assertEqual(model.num_classes, 3)
        self.assertTrue(all(np.all(b == 0) for b in model.biases))

    def test_init_deterministic(self):
        a = init_model([4, 6, 2], np.random.default_rng(11))
        b = init_model([4, 6, 2], np.random.default_rng(11))
        for wa, wb in zip(a.weights, b.weights):
            np.testing.assert_array_equal(wa, wb)

    def test_bad_weight_shape_names_layer(self):
        with self.assertRaises(DimensionError) as ctx:
            Model(layer_dims=[3, 4, 2], weights=[np.zeros((3, 4)), np.zeros((5, 2))], biases=[np.zeros(4), np.zeros(2)])
        self.assertEqual(ctx.exception.layer, 1)

    def test_forward_rejects_wrong_width(self):
        model = init_model([3, 2], np.random.default_rng(0))
        with self.assertRaises(DimensionError):
            forward(model, np.zeros((2, 4)))

    def test_copy_is_independent(self):
        model = init_model([3, 2], np.random.default_rng(0))
        clone = model.copy()
        clone.weights[0][0, 0] += 1.0
        self.assertNotEqual(clone.weights[0][0, 0], model.weights[0][0, 0])


class TestForwardAndLoss(unittest.TestCase):
    """Test cases for forward, predict and the fused loss."""

    def test_zero_weights_uniform_loss(self):
        model = Model(layer_dims=[3, 4], weights=[np.zeros((3, 4))], biases=[np.zeros(4)])
        losses = per_sample_loss(model, np.full((2, 3), 0.5), np.array([0, 3]))
        np.testing.assert_allclose(losses, np.log(4.0), rtol=0, atol=1e-15)

    def test_saturated_logits_stay_finite(self):
        losses, dlogits = softmax_cross_entropy(np.array([[1000.0, 0.0], [0.0, 1000.0]]), np.array([0, 0]))
        self.assertEqual(losses[0], 0.0)
        self.assertAlmostEqual(losses[1], 1000.0)
        self.assertTrue(np.all(np.isfinite(dlogits)))

    def test_forward_matches_scalar_loops(self):
        model, x, _ = random_case(21)
        expected = np.zeros((x.shape[0], model.num_classes))
        for row in range(x.shape[0]):
            a = list(x[row])
            for layer, (w, b) in enumerate(zip(model.weights, model.biases)):
                out = []
                for j in range(w.shape[1]):
                    z = b[j]
                    for i in range(w.shape[0]):
                        z += a[i] * w[i, j]
                    out.append(z if layer == model.num_layers - 1 else max(z, 0.0))
                a = out
            expected[row] = a
        np.testing.assert_allclose(forward(model, x), expected, rtol=1e-12, atol=1e-12)

    def test_predict_ties_to_lowest_index(self):
        model = Model(layer_dims=[2, 3], weights=[np.zeros((2, 3))], biases=[np.zeros(3)])
        np.testing.assert_array_equal(predict(model, np.ones((4, 2))), np.zeros(4, dtype=int))

    def test_label_out_of_range(self):
        model = init_model([3, 2], np.random.default_rng(0))
        with self.assertRaises(InputError):
            loss_and_input_grad(model, np.zeros((1, 3)), np.array([2]))

    def test_linear_input_gradient_closed_form(self):
        rng = np.random.default_rng(13)
        w = rng.normal(size=(5, 3))
        model = Model(layer_dims=[5, 3], weights=[w], biases=[rng.normal(size=3)])
        x = rng.uniform(0, 1, size=(6, 5))
        y = rng.integers(0, 3, size=6)
        logits = x @ w + model.biases[0]
        probs = np.exp(logits - logits.max(axis=1, keepdims=True))
        probs /= probs.sum(axis=1, keepdims=True)
        onehot = np.eye(3)[y]
        _, grad = loss_and_input_grad(model, x, y)
        # weights are (fan_in, fan_out), so the row gradient is (p - onehot) W^T
        np.testing.assert_allclose(grad, (probs - onehot) @ w.T, rtol=1e-10, atol=1e-14)

    def test_saturated_sample_has_vanishing_input_gradient(self):
        w = np.array([[60.0, -60.0], [60.0, -60.0]])
        model = Model(layer_dims=[2, 2], weights=[w], biases=[np.zeros(2)])
        losses, grad = loss_and_input_grad(model, np.array([[0.9, 0.8]]), np.array([0]))
        self.assertLess(losses[0], 1e-30)
        self.assertLess(np.abs(grad).max(), 1e-30)

    def test_input_gradient_is_per_sample(self):
        model, x, y = random_case(3)
        _, grad = loss_and_input_grad(model, x, y)
        _, grad_first = loss_and_input_grad(model, x[:1], y[:1])
        np.testing.assert_allclose(grad[0], grad_first[0], rtol=1e-12, atol=1e-15)


class TestParamGrad(unittest.TestCase):
    """Test cases for masked parameter gradients and SGD."""

    def setUp(self):
        self.model, self.x, self.y = random_case(5)
        while self.x.shape[0] < 3:
            self.x = np.vstack([self.x, self.x])
            self.y = np.concatenate([self.y, self.y])

    def test_all_zero_mask(self):
        with self.assertRaises(EmptySelectionError):
            param_grad(self.model, self.x, self.y, np.zeros(self.x.shape[0]))

    def test_non_binary_mask(self):
        mask = np.ones(self.x.shape[0])
        mask[0] = 0.5
        with self.assertRaises(InputError):
            param_grad(self.model, self.x, self.y, mask)

    def test_mask_equals_subset_gradient(self):
        mask = np.zeros(self.x.shape[0])
        mask[[0, 2]] = 1.0
        masked = param_grad(self.model, self.x, self.y, mask)
        subset = param_grad(self.model, self.x[[0, 2]], self.y[[0, 2]], np.ones(2))
        for a, b in zip(masked.weights + masked.biases, subset.weights + subset.biases):
            np.testing.assert_array_equal(a, b)

    def test_unselected_rows_do_not_matter(self):
        mask = np.zeros(self.x.shape[0])
        mask[1] = 1.0
        scrambled = self.x.copy()
        scrambled[mask == 0] = 0.0
        a = param_grad(self.model, self.x, self.y, mask)
        b = param_grad(self.model, scrambled, self.y, mask)
        for ga, gb in zip(a.weights + a.biases, b.weights + b.biases):
            np.testing.assert_array_equal(ga, gb)

    def test_duplicated_batch_same_gradient(self):
        once = param_grad(self.model, self.x, self.y, np.ones(self.x.shape[0]))
        twice = param_grad(
            self.model, np.vstack([self.x, self.x]), np.concatenate([self.y, self.y]), np.ones(2 * self.x.shape[0])
        )
        for a, b in zip(once.weights + once.biases, twice.weights + twice.biases):
            np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-15)

    def test_sgd_step_arithmetic(self):
        model = Model(layer_dims=[1, 1], weights=[np.array([[1.0]])], biases=[np.array([-0.2])])
        grads = Gradients(weights=[np.array([[0.5]])], biases=[np.array([1.0])])
        updated = sgd_step(model, grads, 0.1)
        self.assertAlmostEqual(updated.weights[0][0, 0], 0.95, places=15)
        self.assertAlmostEqual(updated.biases[0][0], -0.3, places=15)

    def test_sgd_zero_gradient_is_identity(self):
        updated = sgd_step(self.model, Gradients.zeros_like(self.model), 0.1)
        for w, u in zip(self.model.weights, updated.weights):
            np.testing.assert_array_equal(w, u)

    def test_sgd_does_not_modify_input(self):
        before = [w.copy() for w in self.model.weights]
        grads = param_grad(self.model, self.x, self.y, np.ones(self.x.shape[0]))
        sgd_step(self.model, grads, 0.5)
        for w, b in zip(self.model.weights, before):
            np.testing.assert_array_equal(w, b)

    def test_sgd_rejects_bad_rate_and_shapes(self):
        grads = Gradients.zeros_like(self.model)
        with self.assertRaises(InputError):
            sgd_step(self.model, grads, 0.0)
        other = init_model([self.model.input_dim, 3, 9], np.random.default_rng(0))
        with self.assertRaises(DimensionError):
            sgd_step(self.model, Gradients.zeros_like(other), 0.1)

    def test_small_step_decreases_loss(self):
        mask = np.ones(self.x.shape[0])
        before = per_sample_loss(self.model, self.x, self.y).mean()
        updated = sgd_step(self.model, param_grad(self.model, self.x, self.y, mask), 1e-3)
        after = per_sample_loss(updated, self.x, self.y).mean()
        self.assertLess(after, before)


class TestGradientCheck(unittest.TestCase):
    """Analytic gradients against central differences."""

    def test_twenty_random_models(self):
        for seed in range(20):
            model, x, y = random_case(100 + seed)
            report = check_gradients(model, x, y, step=1e-4, tolerance=1e-4)
            self.assertTrue(report.passed, f"seed {seed}: {report.max_relative_error}")
            self.assertEqual(report.layer_dims, model.layer_dims)

    def test_report_has_worst_coordinate_per_tensor(self):
        model, x, y = random_case(7)
        report = check_gradients(model, x, y)
        expected = 2 * model.num_layers + 1
        self.assertEqual(len(report.entries), expected)
        self.assertEqual(report.entries[-1].parameter, "input")
        for entry in report.entries[:-1]:
            shape = (model.weights if entry.parameter == "weight" else model.biases)[entry.layer].shape
            self.assertEqual(len(entry.worst_index), len(shape))

    def test_corrupted_gradient_fails(self):
        model, x, y = random_case(9)

        def corrupted(m, xs, ys, mask):
            grads = param_grad(m, xs, ys, mask)
            grads.weights[0] = grads.weights[0] * 1.1 + 0.01
            return grads

        report = check_gradients(model, x, y, analytic=corrupted)
        self.assertFalse(report.passed)

    def test_finite_difference_helpers(self):
        model = init_model([3, 2], np.random.default_rng(1))
        x = np.array([[0.2, 0.4, 0.6]])
        y = np.array([1])
        numeric = finite_diff_param_grad(model, x, y)
        exact = param_grad(model, x, y, np.ones(1))
        self.assertLess(relative_error(exact.weights[0], numeric.weights[0]).max(), 1e-6)
        _, grad_x = loss_and_input_grad(model, x, y)
        self.assertLess(relative_error(grad_x, finite_diff_input_grad(model, x, y)).max(), 1e-6)

    def test_central_difference_error_is_second_order(self):
        rng = np.random.default_rng(2)
        model = Model(layer_dims=[4, 3], weights=[rng.normal(0, 2, size=(4, 3))], biases=[rng.normal(size=3)])
        x = rng.uniform(0, 1, size=(5, 4))
        y = rng.integers(0, 3, size=5)
        exact = param_grad(model, x, y, np.ones(5)).weights[0]
        coarse = np.abs(finite_diff_param_grad(model, x, y, step=2e-2).weights[0] - exact).max()
        fine = np.abs(finite_diff_param_grad(model, x, y, step=1e-2).weights[0] - exact).max()
        self.assertGreater(coarse / fine, 3.5)
        self.assertLess(coarse / fine, 4.5)


if __name__ == "__main__":
    unittest.main()
