"""
Dense feed-forward classifier with analytic gradients.

The model maps rows of an input matrix (b x N) to pre-softmax logits (b x C)
through ReLU hidden layers. Softmax is fused into the cross-entropy loss and
never exposed. Weights are stored as (fan_in, fan_out) so a layer computes
``a @ W + b``.

Matrices are 2-D float64 numpy arrays; labels are 1-D integer arrays.
"""

from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from adv_data_selection.errors import (
    DimensionError,
    EmptySelectionError,
    InputError,
    NonFiniteError,
)
from adv_data_selection.schema.records import GradcheckEntry, GradcheckReport

RELU = "relu"
# relative errors are measured against max(|a| + |n|, floor)
RELATIVE_ERROR_FLOOR = 1e-6


@dataclass
class Model:
    """Fully-connected classifier parameters."""

    layer_dims: List[int]
    weights: List[np.ndarray]
    biases: List[np.ndarray]
    hidden_activation: str = RELU

    def __post_init__(self) -> None:
        if len(self.layer_dims) < 2:
            raise DimensionError("a model needs an input and an output dimension")
        if self.hidden_activation != RELU:
            raise InputError(f"unsupported hidden activation: {self.hidden_activation}")
        self.layer_dims = [int(d) for d in self.layer_dims]
        self.weights = [np.asarray(w, dtype=np.float64) for w in self.weights]
        self.biases = [np.asarray(b, dtype=np.float64) for b in self.biases]
        if len(self.weights) != len(self.layer_dims) - 1 or len(self.biases) != len(self.weights):
            raise DimensionError(
                f"{len(self.layer_dims)} layer dims need {len(self.layer_dims) - 1} weight/bias pairs"
            )
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            expected = (self.layer_dims[i], self.layer_dims[i + 1])
            if w.shape != expected:
                raise DimensionError(f"weight shape {w.shape}, expected {expected}", layer=i)
            if b.shape != (expected[1],):
                raise DimensionError(f"bias shape {b.shape}, expected {(expected[1],)}", layer=i)

    @property
    def input_dim(self) -> int:
        return self.layer_dims[0]

    @property
    def num_classes(self) -> int:
        return self.layer_dims[-1]

    @property
    def num_layers(self) -> int:
        return len(self.weights)

    def copy(self) -> "Model":
        """Deep copy of all parameters."""
        return Model(
            layer_dims=list(self.layer_dims),
            weights=[w.copy() for w in self.weights],
            biases=[b.copy() for b in self.biases],
            hidden_activation=self.hidden_activation,
        )


@dataclass
class Gradients:
    """Per-layer weight and bias gradients, shaped like the model."""

    weights: List[np.ndarray]
    biases: List[np.ndarray]
    layer_dims: List[int] = field(default_factory=list)

    def matches(self, model: Model) -> bool:
        """Whether every tensor has the shape of the model's counterpart."""
        if len(self.weights) != model.num_layers or len(self.biases) != model.num_layers:
            return False
        return all(
            gw.shape == w.shape and gb.shape == b.shape
            for gw, w, gb, b in zip(self.weights, model.weights, self.biases, model.biases)
        )

    @classmethod
    def zeros_like(cls, model: Model) -> "Gradients":
        return cls(
            weights=[np.zeros_like(w) for w in model.weights],
            biases=[np.zeros_like(b) for b in model.biases],
            layer_dims=list(model.layer_dims),
        )


def init_model(layer_dims: Sequence[int], rng: np.random.Generator) -> Model:
    """
    Glorot-uniform weights and zero biases.

    Args:
        layer_dims: Input dim, hidden dims, number of classes
        rng: Seeded generator; the only source of randomness

    Returns:
        Freshly initialized model
    """
    dims = [int(d) for d in layer_dims]
    if len(dims) < 2 or any(d < 1 for d in dims):
        raise DimensionError(f"invalid layer dims {dims}")
    weights, biases = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return Model(layer_dims=dims, weights=weights, biases=biases)


def _ensure_finite(array: np.ndarray, what: str) -> None:
    if not np.all(np.isfinite(array)):
        raise NonFiniteError(f"{what} contains NaN or Inf")


def _check_inputs(model: Model, inputs: np.ndarray) -> np.ndarray:
    inputs = np.asarray(inputs, dtype=np.float64)
    if inputs.ndim != 2:
        raise DimensionError(f"inputs must be a 2-D matrix, got {inputs.ndim}-D", layer=0)
    if inputs.shape[1] != model.input_dim:
        raise DimensionError(f"inputs have {inputs.shape[1]} columns, expected {model.input_dim}", layer=0)
    return inputs


def _check_labels(model: Model, labels: np.ndarray, rows: int) -> np.ndarray:
    labels = np.asarray(labels)
    if labels.ndim != 1 or labels.shape[0] != rows:
        raise InputError(f"expected {rows} labels, got shape {labels.shape}")
    if labels.size and not np.issubdtype(labels.dtype, np.integer):
        raise InputError(f"labels must be integers, got {labels.dtype}")
    if labels.size and (labels.min() < 0 or labels.max() >= model.num_classes):
        raise InputError(f"labels must lie in 0..{model.num_classes - 1}")
    return labels.astype(np.int64)


def _forward_trace(model: Model, inputs: np.ndarray) -> Tuple[List[np.ndarray], List[np.ndarray]]:
    """Layer inputs and pre-activations of every layer."""
    activations = [inputs]
    pre_activations = []
    a = inputs
    last = model.num_layers - 1
    for i, (w, b) in enumerate(zip(model.weights, model.biases)):
        z = a @ w + b
        pre_activations.append(z)
        a = np.maximum(z, 0.0) if i < last else z
        activations.append(a)
    return activations, pre_activations


def _backward(
    model: Model,
    activations: List[np.ndarray],
    pre_activations: List[np.ndarray],
    dlogits: np.ndarray,
    want_input: bool,
) -> Tuple[List[np.ndarray], List[np.ndarray], Optional[np.ndarray]]:
    dws: List[np.ndarray] = [np.empty(0)] * model.num_layers
    dbs: List[np.ndarray] = [np.empty(0)] * model.num_layers
    delta = dlogits
    dx = None
    for i in reversed(range(model.num_layers)):
        dws[i] = activations[i].T @ delta
        dbs[i] = delta.sum(axis=0)
        if i > 0:
            # relu'(0) = 0
            delta = (delta @ model.weights[i].T) * (pre_activations[i - 1] > 0.0)
        elif want_input:
            dx = delta @ model.weights[0].T
    return dws, dbs, dx


def softmax_cross_entropy(logits: np.ndarray, labels: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Per-row cross-entropy and the gradient of each row's loss w.r.t. its logits.

    Uses max-subtraction so saturated logits never overflow.

    Returns:
        (losses [b], softmax(logits) - onehot(labels) [b x C])
    """
    rows = np.arange(logits.shape[0])
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(shifted).sum(axis=1))
    losses = log_norm - shifted[rows, labels]
    dlogits = np.exp(shifted - log_norm[:, None])
    dlogits[rows, labels] -= 1.0
    return losses, dlogits


def forward(model: Model, inputs: np.ndarray) -> np.ndarray:
    """
    Pre-softmax logits for every input row.

    Args:
        model: Classifier
        inputs: Matrix b x N

    Returns:
        Logits b x C

    Raises:
        DimensionError: If inputs do not match the model's input dimension
    """
    inputs = _check_inputs(model, inputs)
    activations, _ = _forward_trace(model, inputs)
    logits = activations[-1]
    _ensure_finite(logits, "logits")
    return logits


def predict(model: Model, inputs: np.ndarray) -> np.ndarray:
    """Argmax class per row; ties go to the lowest class index."""
    return np.argmax(forward(model, inputs), axis=1)


def per_sample_loss(model: Model, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Cross-entropy of every row."""
    x = _check_inputs(model, x)
    y = _check_labels(model, y, x.shape[0])
    losses, _ = softmax_cross_entropy(forward(model, x), y)
    return losses


def loss_and_input_grad(model: Model, x: np.ndarray, y: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Per-sample loss and the gradient of each sample's loss w.r.t. its own input row.

    Raises:
        InputError: If a label is out of range
    """
    x = _check_inputs(model, x)
    y = _check_labels(model, y, x.shape[0])
    activations, pre_activations = _forward_trace(model, x)
    _ensure_finite(activations[-1], "logits")
    losses, dlogits = softmax_cross_entropy(activations[-1], y)
    _, _, grad_x = _backward(model, activations, pre_activations, dlogits, want_input=True)
    assert grad_x is not None
    _ensure_finite(grad_x, "input gradient")
    return losses, grad_x


def param_grad(model: Model, x: np.ndarray, y: np.ndarray, weights_per_sample: np.ndarray) -> Gradients:
    """
    Mean parameter gradient over the selected samples.

    Only rows with weight 1 are propagated; the result is divided by the
    number of selected rows k, not by the batch size.

    Args:
        model: Classifier
        x: Batch b x N
        y: Labels [b]
        weights_per_sample: Selection mask with entries in {0, 1}

    Raises:
        EmptySelectionError: If no sample is selected
    """
    x = _check_inputs(model, x)
    y = _check_labels(model, y, x.shape[0])
    mask = np.asarray(weights_per_sample, dtype=np.float64)
    if mask.shape != (x.shape[0],):
        raise InputError(f"selection mask has shape {mask.shape}, expected ({x.shape[0]},)")
    if not np.all((mask == 0.0) | (mask == 1.0)):
        raise InputError("selection weights must be 0 or 1")
    selected = np.flatnonzero(mask)
    if selected.size == 0:
        raise EmptySelectionError("no sample selected for the parameter update")

    activations, pre_activations = _forward_trace(model, x[selected])
    _, dlogits = softmax_cross_entropy(activations[-1], y[selected])
    dlogits /= selected.size
    dws, dbs, _ = _backward(model, activations, pre_activations, dlogits, want_input=False)
    grads = Gradients(weights=dws, biases=dbs, layer_dims=list(model.layer_dims))
    for i in range(model.num_layers):
        _ensure_finite(grads.weights[i], f"weight gradient of layer {i}")
        _ensure_finite(grads.biases[i], f"bias gradient of layer {i}")
    return grads


def sgd_step(model: Model, grads: Gradients, mu: float) -> Model:
    """
    One descent step, theta <- theta - mu * grad. The input model is not modified.

    Raises:
        DimensionError: If gradient shapes differ from the model
    """
    if not mu > 0:
        raise InputError(f"learning rate must be positive, got {mu}")
    if len(grads.weights) != model.num_layers or len(grads.biases) != model.num_layers:
        raise DimensionError(f"gradients have {len(grads.weights)} layers, model has {model.num_layers}")
    weights, biases = [], []
    for i, (w, b, gw, gb) in enumerate(zip(model.weights, model.biases, grads.weights, grads.biases)):
        if gw.shape != w.shape or gb.shape != b.shape:
            raise DimensionError(f"gradient shapes {gw.shape}/{gb.shape} vs {w.shape}/{b.shape}", layer=i)
        weights.append(w - mu * gw)
        biases.append(b - mu * gb)
    return Model(
        layer_dims=list(model.layer_dims),
        weights=weights,
        biases=biases,
        hidden_activation=model.hidden_activation,
    )


def _mean_loss(model: Model, x: np.ndarray, y: np.ndarray) -> float:
    activations, _ = _forward_trace(model, x)
    losses, _ = softmax_cross_entropy(activations[-1], y)
    return float(losses.mean())


def _relu_pattern(model: Model, x: np.ndarray) -> List[np.ndarray]:
    _, pre_activations = _forward_trace(model, x)
    return [z > 0.0 for z in pre_activations[:-1]]


def _patterns_differ(a: List[np.ndarray], b: List[np.ndarray]) -> bool:
    return any(not np.array_equal(p, q) for p, q in zip(a, b))


def finite_diff_param_grad(
    model: Model,
    x: np.ndarray,
    y: np.ndarray,
    step: float = 1e-4,
    kinks: Optional[Gradients] = None,
) -> Gradients:
    """
    Central-difference estimate of the mean-loss gradient w.r.t. every parameter.

    Args:
        model: Classifier (left unmodified)
        x: Batch b x N
        y: Labels [b]
        step: Perturbation size
        kinks: Optional output holder; coordinates where the ReLU pattern
            changes between +step and -step are set to 1 in it

    Returns:
        Gradients with the same shapes as the model
    """
    if not step > 0:
        raise InputError(f"step must be positive, got {step}")
    x = _check_inputs(model, x)
    y = _check_labels(model, y, x.shape[0])
    probe = model.copy()
    estimate = Gradients.zeros_like(model)
    for layer in range(model.num_layers):
        for params, out, flags in (
            (probe.weights[layer], estimate.weights[layer], kinks.weights[layer] if kinks else None),
            (probe.biases[layer], estimate.biases[layer], kinks.biases[layer] if kinks else None),
        ):
            for index in np.ndindex(params.shape):
                original = params[index]
                params[index] = original + step
                plus = _mean_loss(probe, x, y)
                pattern_plus = _relu_pattern(probe, x) if flags is not None else None
                params[index] = original - step
                minus = _mean_loss(probe, x, y)
                if flags is not None and _patterns_differ(pattern_plus, _relu_pattern(probe, x)):
                    flags[index] = 1.0
                params[index] = original
                out[index] = (plus - minus) / (2.0 * step)
    return estimate


def finite_diff_input_grad(
    model: Model,
    x: np.ndarray,
    y: np.ndarray,
    step: float = 1e-4,
    kinks: Optional[np.ndarray] = None,
) -> np.ndarray:
    """
    Central-difference estimate of each sample's loss gradient w.r.t. its input row.

    Coordinates whose perturbation switches a ReLU are flagged in ``kinks`` when given.
    """
    if not step > 0:
        raise InputError(f"step must be positive, got {step}")
    x = _check_inputs(model, x).copy()
    y = _check_labels(model, y, x.shape[0])
    estimate = np.zeros_like(x)
    for row in range(x.shape[0]):
        sample, label = x[row : row + 1].copy(), y[row : row + 1]
        for col in range(x.shape[1]):
            original = sample[0, col]
            sample[0, col] = original + step
            plus = _mean_loss(model, sample, label)
            pattern_plus = _relu_pattern(model, sample) if kinks is not None else None
            sample[0, col] = original - step
            minus = _mean_loss(model, sample, label)
            if kinks is not None and _patterns_differ(pattern_plus, _relu_pattern(model, sample)):
                kinks[row, col] = 1.0
            sample[0, col] = original
            estimate[row, col] = (plus - minus) / (2.0 * step)
    return estimate


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> np.ndarray:
    """Elementwise |a - n| / max(|a| + |n|, floor)."""
    scale = np.maximum(np.abs(analytic) + np.abs(numeric), RELATIVE_ERROR_FLOOR)
    return np.abs(analytic - numeric) / scale


def _worst_entry(
    layer: int, name: str, analytic: np.ndarray, numeric: np.ndarray, excluded: np.ndarray
) -> GradcheckEntry:
    errors = relative_error(analytic, numeric)
    errors = np.where(excluded > 0, 0.0, errors)
    worst = np.unravel_index(int(np.argmax(errors)), errors.shape) if errors.size else ()
    return GradcheckEntry(
        layer=layer,
        parameter=name,
        worst_index=[int(i) for i in worst],
        analytic=float(analytic[worst]) if errors.size else 0.0,
        numeric=float(numeric[worst]) if errors.size else 0.0,
        relative_error=float(errors[worst]) if errors.size else 0.0,
        checked=int(errors.size - np.count_nonzero(excluded)),
        excluded=int(np.count_nonzero(excluded)),
    )


AnalyticGradFn = Callable[[Model, np.ndarray, np.ndarray, np.ndarray], Gradients]


def check_gradients(
    model: Model,
    x: np.ndarray,
    y: np.ndarray,
    step: float = 1e-4,
    tolerance: float = 1e-4,
    analytic: AnalyticGradFn = param_grad,
    include_input: bool = True,
) -> GradcheckReport:
    """
    Compare analytic parameter (and input) gradients with central differences.

    Coordinates whose ±step perturbation switches any ReLU are excluded.

    Args:
        model: Classifier
        x: Batch b x N
        y: Labels [b]
        step: Finite-difference step
        tolerance: Relative error bound the report is judged against
        analytic: Parameter-gradient function under test
        include_input: Also check the input gradient

    Returns:
        Report with the worst coordinate of every tensor
    """
    x = _check_inputs(model, x)
    y = _check_labels(model, y, x.shape[0])
    exact = analytic(model, x, y, np.ones(x.shape[0]))
    kinks = Gradients.zeros_like(model)
    numeric = finite_diff_param_grad(model, x, y, step, kinks=kinks)
    entries = []
    for layer in range(model.num_layers):
        entries.append(_worst_entry(layer, "weight", exact.weights[layer], numeric.weights[layer], kinks.weights[layer]))
        entries.append(_worst_entry(layer, "bias", exact.biases[layer], numeric.biases[layer], kinks.biases[layer]))
    if include_input:
        _, grad_x = loss_and_input_grad(model, x, y)
        input_kinks = np.zeros_like(x)
        numeric_x = finite_diff_input_grad(model, x, y, step, kinks=input_kinks)
        entries.append(_worst_entry(-1, "input", grad_x, numeric_x, input_kinks))
    return GradcheckReport(layer_dims=list(model.layer_dims), step=step, tolerance=tolerance, entries=entries)
