"""
Demand series construction, region-level statistics and the two demand
predictors (historical average and perfect foresight).
"""
from dataclasses import dataclass
from datetime import date, datetime
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np

from src.core.config import ExperimentConfig, PredictorMode
from src.core.domain import DemandMatrix, TimeSlot
from src.core.errors import IngestionError, InsufficientHistoryError
from src.ingest.series import DemandSeries
from src.ingest.trips import LoadedTrips, TripRecord
from utils.ml_logging import get_logger

logger = get_logger("rebalancing.ingest")

Predictor = Callable[[TimeSlot, int], List[DemandMatrix]]


def _trip_day(stamp: datetime) -> date:
    return stamp.date() if isinstance(stamp, datetime) else stamp


def build_demand_series(
    trips: Union[Sequence[TripRecord], LoadedTrips],
    cfg: ExperimentConfig,
    start_date: Optional[date] = None,
    n_days: Optional[int] = None,
) -> DemandSeries:
    """
    Count trips into per-slot OD matrices.

    :param trips: Trip records (or the `LoadedTrips` bundle).
    :param cfg: Supplies N and T.
    :param start_date: First day of the window; defaults to the earliest trip day.
    :param n_days: Window length; defaults to reach the latest trip day.
    :return: Series whose matrices sum to the number of trips.
    :raises IngestionError: If a trip falls outside the window or references an unknown region.
    """
    records = trips.trips if isinstance(trips, LoadedTrips) else list(trips)
    if start_date is None:
        start_date = min((_trip_day(t.start_time) for t in records), default=None)
    if n_days is None:
        if records:
            last = max(_trip_day(t.start_time) for t in records)
            n_days = (last - start_date).days + 1
        else:
            n_days = cfg.training_days + cfg.episode_days

    n, per_day = cfg.n_regions, cfg.slots_per_day
    tensor = np.zeros((n_days * per_day, n, n), dtype=np.int64)
    for trip in records:
        day = (_trip_day(trip.start_time) - start_date).days
        if not 0 <= day < n_days:
            raise IngestionError(
                f"Trip at {trip.start_time} lies outside the window starting {start_date} ({n_days} days)"
            )
        if not (0 <= trip.start_region < n and 0 <= trip.end_region < n):
            raise IngestionError(
                f"Trip {trip.start_region}->{trip.end_region} references a region outside [0, {n})"
            )
        minute = trip.start_time.hour * 60 + trip.start_time.minute
        slot = minute // cfg.slot_minutes
        tensor[day * per_day + slot, trip.start_region, trip.end_region] += 1

    series = DemandSeries(tensor, per_day, start_date)
    logger.info(f"Built demand series: {len(records)} trips, {n_days} days x {per_day} slots, N={n}")
    return series


@dataclass(frozen=True)
class RegionStats:
    avg: float
    std: float
    min: int
    max: int

    def to_record(self) -> dict:
        return {"avg": self.avg, "std": self.std, "min": self.min, "max": self.max}


@dataclass(frozen=True, eq=False)
class DemandStats:
    """Per-region outbound-trips-per-slot statistics (population std)."""

    avg: np.ndarray
    std: np.ndarray
    min: np.ndarray
    max: np.ndarray

    @property
    def n(self) -> int:
        return int(self.avg.shape[0])

    def region(self, i: int) -> RegionStats:
        return RegionStats(
            avg=float(self.avg[i]), std=float(self.std[i]), min=int(self.min[i]), max=int(self.max[i])
        )

    def to_records(self) -> List[dict]:
        return [dict(region=i, **self.region(i).to_record()) for i in range(self.n)]


def compute_stats(series: DemandSeries) -> DemandStats:
    """
    Statistics over the samples ``{sum_j od_t[i][j] : t in series}`` for each region i.

    :raises ValueError: If the series is empty.
    """
    if len(series) == 0:
        raise ValueError("compute_stats requires a non-empty series")
    outbound = series.outbound().astype(np.float64)
    return DemandStats(
        avg=outbound.mean(axis=0),
        std=outbound.std(axis=0, ddof=0),
        min=outbound.min(axis=0).astype(np.int64),
        max=outbound.max(axis=0).astype(np.int64),
    )


def _round_half_up_mean(total: np.ndarray, count: int) -> np.ndarray:
    # floor(total / count + 1/2) in exact integer arithmetic
    return (2 * total + count) // (2 * count)


def predict_demand(
    series: DemandSeries,
    at: TimeSlot,
    h: int,
    mode: PredictorMode = PredictorMode.HISTORICAL_AVERAGE,
    training_days: Optional[Tuple[int, int]] = None,
) -> List[DemandMatrix]:
    """
    Predicted OD matrices for the ``h`` slots starting at ``at``.

    ``historical_average`` averages same-slot-of-day matrices over the
    training days (default: every day before ``at.day``) and rounds half up.
    ``perfect_foresight`` returns the realized matrices, padding slots past
    the end of the series with zeros.

    :raises InsufficientHistoryError: If no training day covers a needed slot of day.
    """
    if h < 1:
        raise ValueError(f"h must be >= 1, got {h}")
    per_day = series.slots_per_day
    start = at.index(per_day)
    mode = PredictorMode(mode)

    if mode is PredictorMode.PERFECT_FORESIGHT:
        return [
            series[idx] if idx < len(series) else DemandMatrix.zeros(series.n)
            for idx in range(start, start + h)
        ]

    lo, hi = training_days if training_days is not None else (0, at.day)
    predictions: List[DemandMatrix] = []
    for idx in range(start, start + h):
        slot_of_day = idx % per_day
        rows = [d * per_day + slot_of_day for d in range(lo, hi) if d * per_day + slot_of_day < len(series)]
        if not rows:
            raise InsufficientHistoryError(
                slot_of_day,
                f"No training day in [{lo}, {hi}) covers slot-of-day {slot_of_day}",
            )
        total = series.matrices[rows].sum(axis=0)
        predictions.append(DemandMatrix(_round_half_up_mean(total, len(rows))))
    return predictions


def make_predictor(
    series: DemandSeries,
    mode: PredictorMode,
    training_days: Optional[Tuple[int, int]] = None,
) -> Predictor:
    """Bind a series and mode into the ``(at, h) -> matrices`` callable the simulator uses."""

    def predictor(at: TimeSlot, h: int) -> List[DemandMatrix]:
        return predict_demand(series, at, h, mode, training_days)

    return predictor
