"""
Largest-remainder apportionment over integer weights.

Floors first, then the leftover units go to the largest fractional parts;
ties are broken by the lower index. Arithmetic stays in integers so the
result never depends on float rounding.
"""
from typing import Sequence, Union

import numpy as np


def largest_remainder(weights: Union[Sequence[int], np.ndarray], total: int) -> np.ndarray:
    """
    Split ``total`` units across ``weights`` proportionally.

    :param weights: Non-negative integer weights; at least one must be positive.
    :param total: Non-negative number of units to distribute.
    :return: Integer allocation with ``allocation.sum() == total``.
    :raises ValueError: If weights are negative or all zero, or total is negative.
    """
    w = np.asarray(weights, dtype=np.int64)
    if total < 0:
        raise ValueError(f"total must be non-negative, got {total}")
    if (w < 0).any():
        raise ValueError("weights must be non-negative")
    weight_sum = int(w.sum())
    if weight_sum == 0:
        raise ValueError("at least one weight must be positive")

    numerators = w * int(total)
    allocation = numerators // weight_sum
    remainders = numerators % weight_sum
    leftover = int(total - allocation.sum())
    if leftover:
        # lexsort: last key is primary -> descending remainder, then ascending index
        order = np.lexsort((np.arange(w.shape[0]), -remainders))
        allocation[order[:leftover]] += 1
    return allocation
