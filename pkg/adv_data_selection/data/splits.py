"""
Stratified train / validation / test splitting.
"""

from typing import List, Sequence, Tuple

import numpy as np

from adv_data_selection.data.dataset import Dataset
from adv_data_selection.errors import InputError

SPLIT_NAMES = ("train", "validation", "test")


def _allocate(count: int, fractions: Sequence[float]) -> List[int]:
    # largest remainder; ties go to the earlier split
    quotas = [f * count for f in fractions]
    sizes = [int(np.floor(q)) for q in quotas]
    remainders = [q - s for q, s in zip(quotas, sizes)]
    for slot in sorted(range(len(fractions)), key=lambda i: (-remainders[i], i))[: count - sum(sizes)]:
        sizes[slot] += 1
    return sizes


def split(dataset: Dataset, fractions: Sequence[float], seed: int) -> Tuple[Dataset, Dataset, Dataset]:
    """
    Split into disjoint train, validation and test sets, stratified by class.

    Each class is shuffled with ``seed`` and cut by the largest-remainder rule,
    so every split holds its fraction of every class to within one row.
    Rows keep their original relative order inside each split.

    Args:
        dataset: Source rows
        fractions: Three non-negative fractions summing to 1
        seed: Shuffle seed

    Raises:
        InputError: If the fractions are malformed
    """
    if len(fractions) != 3:
        raise InputError(f"expected 3 fractions, got {len(fractions)}")
    if any(f < 0 for f in fractions) or abs(sum(fractions) - 1.0) > 1e-9:
        raise InputError(f"fractions must be non-negative and sum to 1, got {list(fractions)}")
    rng = np.random.default_rng(seed)
    parts: List[List[np.ndarray]] = [[], [], []]
    for cls in range(dataset.class_count):
        members = np.flatnonzero(dataset.labels == cls)
        if members.size == 0:
            continue
        members = rng.permutation(members)
        bounds = np.cumsum([0] + _allocate(int(members.size), fractions))
        for slot in range(3):
            parts[slot].append(members[bounds[slot] : bounds[slot + 1]])
    subsets = []
    for slot, name in enumerate(SPLIT_NAMES):
        indices = np.sort(np.concatenate(parts[slot])) if parts[slot] else np.empty(0, dtype=np.int64)
        subsets.append(dataset.subset(indices, split=name))
    return subsets[0], subsets[1], subsets[2]
