"""
L-infinity bounded attacks: FGSM, PGD and the minimum-eps grid search.

Every iterate is projected onto the eps-ball around the source input and then
clamped to the valid input range, so both constraints hold elementwise.
"""

from typing import Optional, Sequence, Union

import numpy as np
from loguru import logger

from adv_data_selection.engine.numerics import Model, loss_and_input_grad, predict
from adv_data_selection.errors import InputError
from adv_data_selection.schema.run_config import AttackConfig, EpsilonGrid

# ulp corrections needed after a clamp are at most one or two
_MAX_NUDGES = 4


def project_linf(candidate: np.ndarray, source: np.ndarray, epsilon: float) -> np.ndarray:
    """
    Clamp ``candidate`` into the eps-ball around ``source``.

    Coordinates where the floating-point difference still exceeds eps after the
    clamp are moved one ulp towards the source until ``|x' - x| <= eps`` holds
    exactly as computed.
    """
    projected = np.clip(candidate, source - epsilon, source + epsilon)
    for _ in range(_MAX_NUDGES):
        over = np.abs(projected - source) > epsilon
        if not over.any():
            break
        projected = np.where(over, np.nextafter(projected, source), projected)
    return projected


def _check_range(x: np.ndarray, clip_min: float, clip_max: float) -> None:
    if x.size and (x.min() < clip_min or x.max() > clip_max):
        raise InputError(f"inputs must lie in [{clip_min}, {clip_max}]")


def _signed_step(
    model: Model, current: np.ndarray, source: np.ndarray, y: np.ndarray, step: float,
    epsilon: float, clip_min: float, clip_max: float,
) -> np.ndarray:
    _, grad = loss_and_input_grad(model, current, y)
    moved = current + step * np.sign(grad)
    return np.clip(project_linf(moved, source, epsilon), clip_min, clip_max)


def fgsm(
    model: Model,
    x: np.ndarray,
    y: np.ndarray,
    epsilon: float,
    clip_min: float = 0.0,
    clip_max: float = 1.0,
) -> np.ndarray:
    """
    Single signed-gradient step of length eps.

    Coordinates with a zero gradient stay unchanged (sign(0) = 0).

    Args:
        model: Classifier under attack
        x: Clean inputs b x N within [clip_min, clip_max]
        y: True labels; never modified
        epsilon: L-infinity budget

    Returns:
        Adversarial inputs b x N
    """
    if epsilon < 0:
        raise InputError(f"epsilon must be non-negative, got {epsilon}")
    x = np.asarray(x, dtype=np.float64)
    _check_range(x, clip_min, clip_max)
    return _signed_step(model, x, x, y, epsilon, epsilon, clip_min, clip_max)


def pgd(
    model: Model,
    x: np.ndarray,
    y: np.ndarray,
    cfg: AttackConfig,
    rng: Optional[np.random.Generator] = None,
) -> np.ndarray:
    """
    Projected gradient ascent on the per-sample loss.

    The gradient is taken at the current iterate. With ``random_start`` the first
    iterate is a uniform draw from the eps-ball (clamped to the input range) taken
    from ``rng``.

    Args:
        model: Classifier under attack
        x: Clean inputs b x N within the clip range
        y: True labels
        cfg: Threat model
        rng: Generator for the random start

    Returns:
        Adversarial inputs b x N
    """
    x = np.asarray(x, dtype=np.float64)
    _check_range(x, cfg.clip_min, cfg.clip_max)
    if cfg.random_start:
        if rng is None:
            raise InputError("random_start requires a generator")
        noise = rng.uniform(-cfg.epsilon, cfg.epsilon, size=x.shape)
        current = np.clip(project_linf(x + noise, x, cfg.epsilon), cfg.clip_min, cfg.clip_max)
    else:
        current = x.copy()
    for _ in range(cfg.steps):
        current = _signed_step(model, current, x, y, cfg.alpha, cfg.epsilon, cfg.clip_min, cfg.clip_max)
    return current


def min_adversarial_eps(
    model: Model,
    x: np.ndarray,
    y: int,
    grid: Union[EpsilonGrid, Sequence[float]],
    template: AttackConfig,
) -> Optional[float]:
    """
    Smallest grid eps whose deterministic PGD changes the model's prediction.

    Samples already misclassified return the first grid value. The scan stops
    at the first flip.

    Args:
        model: Classifier
        x: One input row (N,) or (1, N)
        y: Its label
        grid: Candidate budgets, strictly increasing
        template: Attack settings (alpha, steps, clip range); eps and
            random_start are overridden

    Returns:
        The minimum eps, or None when no grid value flips the prediction

    Raises:
        InputError: If the grid is empty
    """
    values = list(grid.values if isinstance(grid, EpsilonGrid) else grid)
    if not values:
        raise InputError("epsilon grid is empty")
    if not isinstance(grid, EpsilonGrid):
        EpsilonGrid(values=values)
    row = np.asarray(x, dtype=np.float64).reshape(1, -1)
    label = np.array([int(y)])
    clean_pred = int(predict(model, row)[0])
    if clean_pred != int(y):
        return float(values[0])
    for eps in values:
        cfg = template.model_copy(update={"epsilon": float(eps), "random_start": False})
        adv = pgd(model, row, label, cfg)
        if int(predict(model, adv)[0]) != clean_pred:
            logger.debug(f"prediction flipped at eps={eps}")
            return float(eps)
    return None
