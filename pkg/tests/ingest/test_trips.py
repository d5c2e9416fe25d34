from datetime import date

import numpy as np
import pytest

from src.core.config import ExperimentConfig
from src.core.errors import IngestionError
from src.ingest.demand import build_demand_series
from src.ingest.trips import IngestSettings, load_trips
from tests.conftest import fixture_path


@pytest.fixture
def settings() -> IngestSettings:
    return IngestSettings.from_yaml(fixture_path("settings_small.yaml"))


@pytest.fixture
def cfg() -> ExperimentConfig:
    return ExperimentConfig(n_regions=3, slots_per_day=24)


class TestLoadTrips:
    def test_keeps_good_rows_and_counts_the_rest(self, settings):
        loaded = load_trips(fixture_path("trips_small.csv"), settings)
        assert len(loaded) == 5
        assert loaded.report.rows_read == 9
        assert loaded.report.rows_kept == 5
        assert dict(loaded.report.skipped) == {
            "missing_region": 1,
            "bad_timestamp": 1,
            "missing_timestamp": 1,
            "unmapped_region": 1,
        }
        assert loaded.trips[0].start_region == 0 and loaded.trips[0].end_region == 1
        assert loaded.trips[2].distance is None

    def test_records_are_sorted_by_start_time(self, settings):
        stamps = [t.start_time for t in load_trips(fixture_path("trips_small.csv"), settings).trips]
        assert stamps == sorted(stamps)

    def test_first_failing_check_names_the_skip(self, tmp_path, settings):
        path = tmp_path / "trips.csv"
        path.write_text(
            "trip_start_timestamp,start_community_area,end_community_area,trip_distance,vendor\n"
            "2019-06-01 09:30:00,2,3, , \n"
            "2019-06-01 08:00:00,3,1,250.5, Bird \n"
            ",42,1,100,Lime\n"
            "soon,,2,100,Lime\n"
            "2019-06-01 10:00:00, ,2,100,Lime\n"
        )
        loaded = load_trips(str(path), settings)
        assert dict(loaded.report.skipped) == {
            "missing_timestamp": 1,
            "bad_timestamp": 1,
            "missing_region": 1,
        }
        first, second = loaded.trips
        assert (first.start_region, first.end_region, first.distance, first.operator) == (2, 0, 250.5, "Bird")
        assert (second.start_region, second.end_region, second.distance, second.operator) == (1, 2, None, None)

    def test_missing_file(self, settings):
        with pytest.raises(IngestionError):
            load_trips(fixture_path("no_such_file.csv"), settings)

    def test_missing_mandatory_column(self, tmp_path, settings):
        path = tmp_path / "trips.csv"
        path.write_text("trip_start_timestamp,start_community_area\n2019-06-01 08:00:00,1\n")
        with pytest.raises(IngestionError, match="end_community_area"):
            load_trips(str(path), settings)

    def test_explicit_region_table(self):
        settings = IngestSettings(n_regions=2, region_mapping={"1": 1, "2": 0})
        assert settings.map_region("1") == 1
        assert settings.map_region("2.0") == 0
        assert settings.map_region("3") is None


class TestBuildDemandSeries:
    def test_trips_land_in_their_slots(self, settings, cfg):
        series = build_demand_series(load_trips(fixture_path("trips_small.csv"), settings), cfg)
        assert len(series) == 48
        assert series.start_date == date(2019, 6, 1)
        assert series.total() == 5
        assert series[8].od[0].tolist() == [0, 1, 1]
        assert series[9].od[1, 0] == 1
        assert series[23].od[2, 2] == 1
        assert series[32].od[0, 1] == 1

    def test_half_hour_slots(self, settings):
        cfg = ExperimentConfig(n_regions=3, slots_per_day=48, rebalance_period=12)
        series = build_demand_series(load_trips(fixture_path("trips_small.csv"), settings), cfg)
        assert series[16].od[0, 1] == 1
        assert series[17].od[0, 2] == 1

    def test_trip_outside_the_window(self, settings, cfg):
        loaded = load_trips(fixture_path("trips_small.csv"), settings)
        with pytest.raises(IngestionError):
            build_demand_series(loaded, cfg, start_date=date(2019, 6, 2), n_days=1)

    def test_no_trips_gives_an_empty_window(self, cfg):
        series = build_demand_series([], cfg)
        assert len(series) == (cfg.training_days + cfg.episode_days) * cfg.slots_per_day
        assert series.total() == 0
        assert np.array_equal(series.outbound(), np.zeros((len(series), 3)))
