"""
Seeded synthetic OD demand for desk-scale experiments.

Rates are ``intensity * w_i * v_j * profile(slot)`` where origin weights
``w`` and destination weights ``v`` each have mean 1 and span a 4x range,
and the diurnal profile has mean 1 over a day. Counts are Poisson draws.
"""
import numpy as np

from src.ingest.series import DemandSeries
from utils.ml_logging import get_logger

logger = get_logger("rebalancing.ingest")

WEIGHT_LOW, WEIGHT_HIGH = 0.4, 1.6
DIURNAL_AMPLITUDE = 0.5


def _region_weights(rng: np.random.Generator, n: int) -> np.ndarray:
    weights = np.linspace(WEIGHT_LOW, WEIGHT_HIGH, n)
    rng.shuffle(weights)
    return weights / weights.mean()


def diurnal_profile(slots_per_day: int) -> np.ndarray:
    """Mean-one daily demand shape with a single peak in the afternoon."""
    phase = 2 * np.pi * (np.arange(slots_per_day) / slots_per_day - 0.375)
    return 1.0 + DIURNAL_AMPLITUDE * np.sin(phase)


def generate_synthetic(
    n: int,
    t_slots: int,
    intensity: float,
    seed: int,
    slots_per_day: int = 24,
) -> DemandSeries:
    """
    Generate a reproducible demand series with hot and cold regions.

    :param n: Number of regions (>= 2).
    :param t_slots: Number of slots to generate.
    :param intensity: Mean trips per OD entry per slot (> 0).
    :param seed: RNG seed; equal seeds give identical series.
    :param slots_per_day: Slots per day for the diurnal profile.
    :raises ValueError: On n < 2, intensity <= 0 or negative t_slots.
    """
    if n < 2:
        raise ValueError(f"generate_synthetic requires n >= 2, got {n}")
    if not intensity > 0:
        raise ValueError(f"intensity must be positive, got {intensity}")
    if t_slots < 0:
        raise ValueError(f"t_slots must be non-negative, got {t_slots}")

    rng = np.random.default_rng(seed)
    origin = _region_weights(rng, n)
    destination = _region_weights(rng, n)
    base = intensity * np.outer(origin, destination)
    profile = diurnal_profile(slots_per_day)[np.arange(t_slots) % slots_per_day]
    rates = profile[:, None, None] * base[None, :, :]
    matrices = rng.poisson(rates).astype(np.int64)
    logger.debug(f"Generated synthetic demand: n={n}, slots={t_slots}, intensity={intensity}, seed={seed}")
    return DemandSeries(matrices, slots_per_day)
