"""
`trips.py` loads trip records from a Chicago e-scooter style CSV.

Column names and the community-area -> RegionId table come from
`IngestSettings` (see `settings.yaml`). Malformed rows are skipped and
counted per reason rather than failing the load.
"""
import os
from collections import Counter
from dataclasses import dataclass, field
from datetime import datetime
from typing import Dict, List, Optional

import pandas as pd
from pydantic import BaseModel, ConfigDict, Field

from src.core.errors import IngestionError
from src.utils import load_dataframe_from_path, load_yaml
from utils.ml_logging import get_logger, log_function_call

logger = get_logger("rebalancing.ingest")

DEFAULT_SETTINGS_PATH = os.path.join(os.path.dirname(__file__), "settings.yaml")


class ColumnMapping(BaseModel):
    model_config = ConfigDict(extra="forbid")

    start_time: str = "trip_start_timestamp"
    start_region: str = "start_community_area"
    end_region: str = "end_community_area"
    distance: Optional[str] = "trip_distance"
    operator: Optional[str] = "vendor"


class IngestSettings(BaseModel):
    """
    Column names plus the raw-region -> RegionId table.

    Without an explicit ``region_mapping``, raw ids ``region_offset ..
    region_offset + n_regions - 1`` map to ``0 .. n_regions - 1``.
    """

    model_config = ConfigDict(extra="forbid")

    columns: ColumnMapping = Field(default_factory=ColumnMapping)
    n_regions: int = Field(77, ge=1)
    region_offset: int = 1
    region_mapping: Optional[Dict[str, int]] = None
    timestamp_format: Optional[str] = None

    @classmethod
    def from_yaml(cls, path: str = DEFAULT_SETTINGS_PATH) -> "IngestSettings":
        return cls.model_validate(load_yaml(path).get("ingest", {}))

    def map_region(self, raw: object) -> Optional[int]:
        """RegionId for a raw cell value, or None when it cannot be mapped."""
        if raw is None or (isinstance(raw, float) and pd.isna(raw)):
            return None
        text = str(raw).strip()
        if not text:
            return None
        try:
            key = str(int(float(text)))
        except ValueError:
            key = text
        if self.region_mapping is not None:
            region = self.region_mapping.get(key)
        else:
            try:
                region = int(key) - self.region_offset
            except ValueError:
                return None
        if region is None or not 0 <= region < self.n_regions:
            return None
        return region


@dataclass(frozen=True)
class TripRecord:
    start_time: datetime
    start_region: int
    end_region: int
    distance: Optional[float] = None
    operator: Optional[str] = None


@dataclass
class IngestReport:
    rows_read: int = 0
    rows_kept: int = 0
    skipped: Counter = field(default_factory=Counter)

    @property
    def rows_skipped(self) -> int:
        return sum(self.skipped.values())

    def to_record(self) -> dict:
        return {
            "rows_read": self.rows_read,
            "rows_kept": self.rows_kept,
            "rows_skipped": self.rows_skipped,
            "skipped_by_reason": dict(sorted(self.skipped.items())),
        }


@dataclass(frozen=True)
class LoadedTrips:
    """Result of `load_trips`: records sorted by start time plus the ingestion report."""

    trips: List[TripRecord]
    report: IngestReport

    def __len__(self) -> int:
        return len(self.trips)


def _blank(column: pd.Series) -> pd.Series:
    return column.isna() | (column.astype(str).str.strip() == "")


@log_function_call("rebalancing.ingest")
def load_trips(path: str, settings: Optional[IngestSettings] = None) -> LoadedTrips:
    """
    Load trip records, skipping rows with unmappable regions or bad timestamps.

    A row is counted under the first reason that rejects it, in the order
    missing timestamp, bad timestamp, missing region, unmapped region.

    :param path: CSV (or Parquet) trip file with a header row.
    :param settings: Column names and region mapping; defaults to `settings.yaml`.
    :return: `LoadedTrips` with records sorted by start time and skip counts.
    :raises IngestionError: If the file is missing or a mandatory column is absent.
    """
    settings = settings or IngestSettings.from_yaml()
    if not os.path.exists(path):
        raise IngestionError(f"Trip file not found: {path}")

    cols = settings.columns
    try:
        frame = load_dataframe_from_path(path, dtype=str, keep_default_na=False) \
            if path.endswith(".csv") else load_dataframe_from_path(path)
    except Exception as e:
        raise IngestionError(f"Could not read trip file {path}: {e}") from e

    for mandatory in (cols.start_time, cols.start_region, cols.end_region):
        if mandatory not in frame.columns:
            raise IngestionError(f"Trip file {path} is missing mandatory column '{mandatory}'")

    report = IngestReport(rows_read=len(frame))
    timestamps = pd.to_datetime(frame[cols.start_time], format=settings.timestamp_format, errors="coerce")
    starts = frame[cols.start_region].map(settings.map_region)
    ends = frame[cols.end_region].map(settings.map_region)

    missing_time = _blank(frame[cols.start_time])
    bad_time = ~missing_time & timestamps.isna()
    rejected = missing_time | bad_time
    missing_region = ~rejected & (_blank(frame[cols.start_region]) | _blank(frame[cols.end_region]))
    rejected |= missing_region
    unmapped = ~rejected & (starts.isna() | ends.isna())
    rejected |= unmapped
    for reason, mask in (
        ("missing_timestamp", missing_time),
        ("bad_timestamp", bad_time),
        ("missing_region", missing_region),
        ("unmapped_region", unmapped),
    ):
        if mask.any():
            report.skipped[reason] = int(mask.sum())

    if cols.distance is not None and cols.distance in frame.columns:
        distances = pd.to_numeric(frame[cols.distance], errors="coerce")
    else:
        distances = pd.Series(float("nan"), index=frame.index)
    if cols.operator is not None and cols.operator in frame.columns:
        raw = frame[cols.operator]
        operators = raw.astype(str).str.strip().where(~_blank(raw))
    else:
        operators = pd.Series(None, index=frame.index, dtype=object)

    kept = pd.DataFrame(
        {
            "start_time": timestamps,
            "start_region": starts,
            "end_region": ends,
            "distance": distances,
            "operator": operators,
        }
    )[~rejected].sort_values("start_time", kind="stable")

    records = [
        TripRecord(
            start_time=row.start_time.to_pydatetime(),
            start_region=int(row.start_region),
            end_region=int(row.end_region),
            distance=None if pd.isna(row.distance) else float(row.distance),
            operator=None if pd.isna(row.operator) else row.operator,
        )
        for row in kept.itertuples(index=False)
    ]
    report.rows_kept = len(records)
    logger.info(
        f"Ingested {report.rows_kept}/{report.rows_read} trips from {path}; skipped {dict(report.skipped)}"
    )
    return LoadedTrips(trips=records, report=report)
