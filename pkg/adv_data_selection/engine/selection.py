"""
Loss-ranked data selection.

Each composed batch is scored by the per-sample cross-entropy of its logits;
the top fraction (or a random fraction, for the baseline) takes part in the
parameter update. The fraction is either fixed or shrinks with the last
observed accuracy.
"""

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from adv_data_selection.errors import InputError

# absorbs products such as 0.3 * 10 = 3.0000000000000004 before the ceil
_CEIL_TOLERANCE = 1e-9
# positive lower bound of the adaptive fraction when no batch size is known
MIN_PUP = 1e-6

ORIGIN_CLEAN = 0
ORIGIN_ADVERSARIAL = 1


@dataclass(frozen=True)
class SelectionResult:
    """Rows of a batch chosen for the update."""

    selected_indices: np.ndarray
    losses: Optional[np.ndarray]
    batch_size: int
    clean_selected: int = 0
    adversarial_selected: int = 0

    @property
    def size(self) -> int:
        return int(self.selected_indices.size)

    def mask(self) -> np.ndarray:
        """0/1 vector over the batch."""
        mask = np.zeros(self.batch_size)
        mask[self.selected_indices] = 1.0
        return mask

    def with_origins(self, origins: np.ndarray) -> "SelectionResult":
        """Copy with clean/adversarial counts taken from per-row origins."""
        picked = np.asarray(origins)[self.selected_indices]
        adversarial = int(np.count_nonzero(picked == ORIGIN_ADVERSARIAL))
        return SelectionResult(
            selected_indices=self.selected_indices,
            losses=self.losses,
            batch_size=self.batch_size,
            clean_selected=self.size - adversarial,
            adversarial_selected=adversarial,
        )


def selection_size(pup: float, batch_size: int) -> int:
    """k = max(1, ceil(pup * b))."""
    if not 0.0 < pup <= 1.0:
        raise InputError(f"pup must lie in (0, 1], got {pup}")
    if batch_size < 1:
        raise InputError("batch must hold at least one sample")
    return min(batch_size, max(1, math.ceil(pup * batch_size - _CEIL_TOLERANCE)))


def error_signal(logits: np.ndarray, y: np.ndarray, literal: bool = False) -> np.ndarray:
    """
    Per-sample relevance score.

    The default is softmax cross-entropy, logsumexp(logits) - logits[y], computed
    with max-subtraction and never negative. ``literal=True`` evaluates the summed
    per-class form sum_c (logsumexp(logits) - onehot_c), i.e. C * logsumexp - 1,
    which ignores the label and is kept only for auditing.

    Raises:
        InputError: If a label is out of range
    """
    logits = np.asarray(logits, dtype=np.float64)
    y = np.asarray(y)
    if logits.ndim != 2 or y.shape != (logits.shape[0],):
        raise InputError(f"logits {logits.shape} and labels {y.shape} do not match")
    classes = logits.shape[1]
    if y.size and (y.min() < 0 or y.max() >= classes):
        raise InputError(f"labels must lie in 0..{classes - 1}")
    peak = logits.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(logits - peak).sum(axis=1)) + peak[:, 0]
    if literal:
        return classes * log_norm - 1.0
    losses = log_norm - logits[np.arange(logits.shape[0]), y]
    return np.maximum(losses, 0.0)


def select_top(
    losses: Sequence[float], pup: float, origins: Optional[np.ndarray] = None
) -> SelectionResult:
    """
    The k rows with the largest loss; ties go to the lower index.

    Args:
        losses: Per-row scores
        pup: Selected fraction in (0, 1]
        origins: Optional per-row origin tags used to fill the counts

    Returns:
        Selection with indices sorted ascending

    Raises:
        InputError: If the loss vector is empty or not finite
    """
    scores = np.asarray(losses, dtype=np.float64)
    if scores.ndim != 1 or scores.size == 0:
        raise InputError("loss vector is empty")
    if not np.all(np.isfinite(scores)):
        raise InputError("loss vector contains NaN or Inf")
    k = selection_size(pup, scores.size)
    order = np.argsort(-scores, kind="stable")
    result = SelectionResult(
        selected_indices=np.sort(order[:k]), losses=scores, batch_size=int(scores.size)
    )
    return result.with_origins(origins) if origins is not None else result


def select_random(
    b: int, pup: float, rng: np.random.Generator, origins: Optional[np.ndarray] = None
) -> SelectionResult:
    """Uniform draw of k rows without replacement, sorted ascending."""
    k = selection_size(pup, b)
    picked = np.sort(rng.choice(b, size=k, replace=False)) if k < b else np.arange(b)
    result = SelectionResult(selected_indices=picked, losses=None, batch_size=int(b))
    return result.with_origins(origins) if origins is not None else result


def select_all(b: int, origins: Optional[np.ndarray] = None) -> SelectionResult:
    """Every row of the batch."""
    if b < 1:
        raise InputError("batch must hold at least one sample")
    result = SelectionResult(selected_indices=np.arange(b), losses=None, batch_size=int(b))
    return result.with_origins(origins) if origins is not None else result


def update_pup(
    p_prev: float, acc_prev: float, floor: float = 0.0, batch_size: Optional[int] = None
) -> float:
    """
    Next selected fraction: (1 - acc) * p, bounded below by the floor.

    The effective floor is at least 1/batch_size when a batch size is given
    (at least one row selected) and never zero. The result never exceeds p_prev.
    """
    if not 0.0 <= acc_prev <= 1.0:
        raise InputError(f"accuracy must lie in [0, 1], got {acc_prev}")
    if not 0.0 < p_prev <= 1.0:
        raise InputError(f"pup must lie in (0, 1], got {p_prev}")
    if not 0.0 <= floor < 1.0:
        raise InputError(f"floor must lie in [0, 1), got {floor}")
    floor_effective = max(floor, 1.0 / batch_size if batch_size else MIN_PUP)
    return min(p_prev, max(floor_effective, (1.0 - acc_prev) * p_prev))
