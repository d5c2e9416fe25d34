"""
`series.py` holds `DemandSeries`, the contiguous per-slot OD demand tensor,
and its long-form table cache (CSV or Parquet).
"""
import os
from dataclasses import dataclass
from datetime import date, timedelta
from typing import Iterator, List, Optional, Tuple, Union

import numpy as np
import pandas as pd

from src.core.domain import DemandMatrix, TimeSlot
from src.utils import load_dataframe_from_path, save_dataframe
from utils.ml_logging import get_logger

logger = get_logger("rebalancing.ingest")

SERIES_COLUMNS = ["day", "slot", "origin", "destination", "count"]


@dataclass(frozen=True, eq=False)
class DemandSeries:
    """
    Ordered map TimeSlot -> DemandMatrix over contiguous slots starting at
    day 0, slot 0. Backed by one read-only ``(slots, N, N)`` integer array.
    """

    matrices: np.ndarray
    slots_per_day: int
    start_date: Optional[date] = None

    def __post_init__(self) -> None:
        tensor = np.array(self.matrices, dtype=np.int64, copy=True)
        if tensor.ndim != 3 or tensor.shape[1] != tensor.shape[2]:
            raise ValueError(f"Demand series must have shape (slots, N, N), got {tensor.shape}")
        if (tensor < 0).any():
            raise ValueError("Demand series entries must be non-negative")
        tensor.setflags(write=False)
        object.__setattr__(self, "matrices", tensor)

    @classmethod
    def zeros(cls, n: int, n_slots: int, slots_per_day: int) -> "DemandSeries":
        return cls(np.zeros((n_slots, n, n), dtype=np.int64), slots_per_day)

    @property
    def n(self) -> int:
        return int(self.matrices.shape[1])

    @property
    def n_days(self) -> int:
        return -(-len(self) // self.slots_per_day)

    def __len__(self) -> int:
        return int(self.matrices.shape[0])

    def _resolve(self, key: Union[TimeSlot, int]) -> int:
        index = key.index(self.slots_per_day) if isinstance(key, TimeSlot) else int(key)
        if not 0 <= index < len(self):
            raise KeyError(f"{key} is outside the series (0..{len(self) - 1})")
        return index

    def __getitem__(self, key: Union[TimeSlot, int]) -> DemandMatrix:
        return DemandMatrix(self.matrices[self._resolve(key)])

    def __contains__(self, key: Union[TimeSlot, int]) -> bool:
        try:
            self._resolve(key)
        except KeyError:
            return False
        return True

    def slots(self) -> List[TimeSlot]:
        return [TimeSlot.from_index(i, self.slots_per_day) for i in range(len(self))]

    def items(self) -> Iterator[Tuple[TimeSlot, DemandMatrix]]:
        for i in range(len(self)):
            yield TimeSlot.from_index(i, self.slots_per_day), DemandMatrix(self.matrices[i])

    def total(self) -> int:
        return int(self.matrices.sum())

    def outbound(self) -> np.ndarray:
        """``(slots, N)`` outbound trip counts per region."""
        return self.matrices.sum(axis=2)

    def day_range(self, first_day: int, n_days: int) -> np.ndarray:
        lo = first_day * self.slots_per_day
        return self.matrices[lo: lo + n_days * self.slots_per_day]

    def window(self, first_slot: int, n_slots: int) -> "DemandSeries":
        """Sub-series re-based at slot 0; must start on a day boundary to keep slot-of-day aligned."""
        if first_slot % self.slots_per_day:
            raise ValueError(f"window must start on a day boundary, got slot {first_slot}")
        start_date = self.start_date
        if start_date is not None:
            start_date = start_date + timedelta(days=first_slot // self.slots_per_day)
        return DemandSeries(self.matrices[first_slot: first_slot + n_slots], self.slots_per_day, start_date)

    def with_matrices(self, matrices: np.ndarray) -> "DemandSeries":
        return DemandSeries(matrices, self.slots_per_day, self.start_date)

    def __eq__(self, other: object) -> bool:
        return (
            isinstance(other, DemandSeries)
            and self.slots_per_day == other.slots_per_day
            and np.array_equal(self.matrices, other.matrices)
        )

    def __hash__(self) -> int:
        return hash((self.slots_per_day, self.matrices.shape, self.matrices.tobytes()))

    def to_frame(self) -> pd.DataFrame:
        """Long-form table of the non-zero entries."""
        idx, origin, destination = np.nonzero(self.matrices)
        return pd.DataFrame(
            {
                "day": idx // self.slots_per_day,
                "slot": idx % self.slots_per_day,
                "origin": origin,
                "destination": destination,
                "count": self.matrices[idx, origin, destination],
            },
            columns=SERIES_COLUMNS,
        )

    @classmethod
    def from_frame(
        cls, frame: pd.DataFrame, n: int, n_slots: int, slots_per_day: int
    ) -> "DemandSeries":
        missing = [c for c in SERIES_COLUMNS if c not in frame.columns]
        if missing:
            raise ValueError(f"Demand table is missing columns: {missing}")
        tensor = np.zeros((n_slots, n, n), dtype=np.int64)
        index = frame["day"].to_numpy() * slots_per_day + frame["slot"].to_numpy()
        np.add.at(
            tensor,
            (index, frame["origin"].to_numpy(), frame["destination"].to_numpy()),
            frame["count"].to_numpy(),
        )
        return cls(tensor, slots_per_day)


def save_series(series: DemandSeries, path: str) -> None:
    """Write the series cache; the extension picks CSV or Parquet."""
    _, extension = os.path.splitext(path)
    file_format = "parquet" if extension == ".parquet" else "csv"
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    save_dataframe(series.to_frame(), path, file_format=file_format)


def load_series(path: str, n: int, n_slots: int, slots_per_day: int) -> DemandSeries:
    frame = load_dataframe_from_path(path)
    series = DemandSeries.from_frame(frame, n, n_slots, slots_per_day)
    logger.info(f"Loaded demand series with {series.total()} trips over {n_slots} slots from {path}")
    return series
