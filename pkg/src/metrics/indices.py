"""
Inequality indices over per-region demand-supply ratios.

All three are permutation invariant. `gini` and `theil` are also invariant
under uniform scaling of their input; `equity_variance` is invariant under
scaling supply and demand together as long as no region hits the
``max(s, 1)`` guard.
"""
from typing import Sequence, Union

import numpy as np

Vector = Union[np.ndarray, Sequence[float]]

THEIL_EPSILON = 1e-6


def _as_vector(values: Vector, name: str) -> np.ndarray:
    x = np.asarray(values, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError(f"{name} expects a 1-dimensional vector, got shape {x.shape}")
    if (x < 0).any():
        raise ValueError(f"{name} expects non-negative values, got {x.tolist()}")
    return x


def demand_supply_ratios(supply: Vector, demand: Vector) -> np.ndarray:
    """``d_i / max(s_i, 1)`` per region."""
    s = np.asarray(supply, dtype=np.float64)
    d = np.asarray(demand, dtype=np.float64)
    if s.shape != d.shape:
        raise ValueError(f"supply {s.shape} and demand {d.shape} differ in shape")
    return d / np.maximum(s, 1.0)


def equity_variance(supply: Vector, demand: Vector) -> float:
    """
    Negated squared deviation of regional demand-supply ratios from the
    city-wide ratio ``D / S``. Zero is perfect equity; more negative is worse.

    :param supply: Per-region vehicle supply.
    :param demand: Per-region outbound demand.
    :raises ValueError: If the city-wide supply is zero.
    """
    s = np.asarray(supply, dtype=np.float64)
    d = np.asarray(demand, dtype=np.float64)
    if s.sum() <= 0:
        raise ValueError("equity_variance needs a positive city-wide supply")
    city = d.sum() / s.sum()
    deviation = demand_supply_ratios(s, d) - city
    return float(-np.sum(deviation * deviation))


def gini(values: Vector) -> float:
    """
    Gini coefficient by direct pairwise summation,
    ``sum |x_i - x_j| / (2 n^2 mean)``.

    Not the bias-corrected form: a one-hot vector of length n scores
    ``(n - 1) / n``. An all-zero (or empty) vector scores 0.
    """
    x = _as_vector(values, "gini")
    if x.size == 0 or x.sum() == 0:
        return 0.0
    n = x.size
    pairwise = np.abs(x[:, None] - x[None, :]).sum()
    return float(pairwise / (2.0 * n * n * x.mean()))


def theil(values: Vector, epsilon: float = THEIL_EPSILON) -> float:
    """
    Theil T index ``mean((x_i / mu) * ln(x_i / mu))``.

    Zero entries are replaced by ``epsilon * mu`` before evaluation. An
    all-zero (or empty) vector scores 0.
    """
    x = _as_vector(values, "theil")
    if x.size == 0 or x.sum() == 0:
        return 0.0
    x = np.where(x == 0, epsilon * x.mean(), x)
    share = x / x.mean()
    return float(max(np.mean(share * np.log(share)), 0.0))


def has_zero_entries(values: Vector) -> bool:
    """Whether `theil` would substitute at least one entry."""
    x = np.asarray(values, dtype=np.float64)
    return bool(x.size) and bool(x.sum() > 0) and bool((x == 0).any())
