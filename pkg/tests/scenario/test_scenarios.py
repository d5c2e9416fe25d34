import re

import numpy as np
import pytest

from src.core.domain import FleetState
from src.ingest.synthetic import generate_synthetic
from src.scenario.scenarios import (
    EmergentScenario,
    EquityMetric,
    GoalDescriptor,
    GoalDirection,
    ScenarioKind,
    dynamic_goal,
    make_rising_scenario,
    removal_count,
    rising_demand,
    scale_counts,
    shrinking_supply,
)


class TestScaleCounts:
    def test_rounds_half_up(self):
        scaled = scale_counts(np.array([[5, 0], [3, 2]]), np.array([0.3, 0.0]))
        assert scaled.tolist() == [[7, 0], [3, 2]]
        assert scale_counts(np.array([[1]]), np.array([0.5])).tolist() == [[2]]

    def test_zero_factor_is_identity(self, rng):
        od = rng.integers(0, 9, size=(4, 4))
        assert np.array_equal(scale_counts(od, np.zeros(4)), od)


class TestRisingDemand:
    def test_latent_narrative_hides_the_magnitude(self):
        for seed in range(8):
            scenario = make_rising_scenario(6, 0.35, regions=[1, 4], seed=seed)
            assert "%" not in scenario.narrative
            assert "35" not in scenario.narrative
            assert "Region 1" in scenario.narrative and "Region 4" in scenario.narrative
            assert not scenario.magnitude_disclosed

    def test_disclosed_narrative_states_the_exact_percent(self):
        scenario = make_rising_scenario(6, 0.35, regions=[1, 4], disclosed=True)
        assert scenario.narrative.count("rise by 35%") == 2
        citywide = make_rising_scenario(3, 1.0, disclosed=True, from_slot=8, until_slot=12, slots_per_day=24)
        assert citywide.narrative == (
            "Trip requests across all regions are expected to rise by 100% between 08:00 and 12:00."
        )

    def test_factors_cover_only_the_chosen_regions(self):
        scenario = make_rising_scenario(5, 0.5, regions=[3, 0])
        assert scenario.demand_factors.tolist() == [0.5, 0.0, 0.0, 0.5, 0.0]
        assert scenario.affected_regions() == [0, 3]

    def test_seeded_region_draw(self):
        first = make_rising_scenario(10, 0.2, n_affected=3, seed=4)
        assert first.affected_regions() == make_rising_scenario(10, 0.2, n_affected=3, seed=4).affected_regions()
        assert len(first.affected_regions()) == 3

    def test_series_perturbation_stays_in_its_window(self):
        series = generate_synthetic(3, 8, 2.0, seed=0, slots_per_day=4)
        untouched = series.matrices.copy()
        scaled, scenario = rising_demand(series, 1.0, regions=[0], from_slot=2, until_slot=4)
        assert np.array_equal(series.matrices, untouched)
        assert np.array_equal(scaled.matrices[:2], untouched[:2])
        assert np.array_equal(scaled.matrices[4:], untouched[4:])
        assert np.array_equal(scaled.matrices[2:4, 0], 2 * untouched[2:4, 0])
        assert np.array_equal(scaled.matrices[2:4, 1:], untouched[2:4, 1:])
        assert scenario.is_active(3) and not scenario.is_active(4)

    def test_ratio_must_be_positive(self):
        with pytest.raises(ValueError):
            make_rising_scenario(3, 0.0)


class TestShrinkingSupply:
    def test_removes_the_rounded_fraction(self):
        state, scenario = shrinking_supply(FleetState([4, 4, 4]), 0.25, seed=1)
        assert scenario.removed_total() == removal_count(12, 0.25) == 3
        assert state.total() == 9
        assert (state.counts >= 0).all()

    def test_smaller_fraction_removes_a_subset(self):
        fleet = FleetState([7, 2, 9, 0, 5])
        for seed in range(20):
            previous = np.zeros(5, dtype=np.int64)
            for fraction in (0.05, 0.1, 0.15, 0.2, 0.5):
                _, scenario = shrinking_supply(fleet, fraction, seed)
                assert (scenario.supply_delta >= previous).all()
                previous = scenario.supply_delta

    def test_narratives(self):
        fleet = FleetState([10, 0])
        _, disclosed = shrinking_supply(fleet, 0.3, seed=0)
        assert disclosed.narrative == "3 vehicles in Region 0 are under maintenance and cannot be rented."
        _, latent = shrinking_supply(fleet, 0.3, seed=0, disclosed=False)
        assert not re.search(r"\b3\b", latent.narrative)

    @pytest.mark.parametrize("fraction", [0.0, 1.0, -0.2])
    def test_fraction_bounds(self, fraction):
        with pytest.raises(ValueError):
            shrinking_supply(FleetState([3, 3]), fraction, seed=0)

    def test_signature_ignores_where_vehicles_were_taken(self):
        _, first = shrinking_supply(FleetState([6, 0]), 0.5, seed=0)
        _, second = shrinking_supply(FleetState([0, 6]), 0.5, seed=0)
        assert first.signature() == second.signature()


class TestDynamicGoal:
    def test_natural_direction(self):
        assert GoalDescriptor().direction is GoalDirection.MAXIMIZE
        assert GoalDescriptor(metric=EquityMetric.GINI).direction is GoalDirection.MINIMIZE
        assert GoalDescriptor(metric="Theil", direction="maximize").direction is GoalDirection.MAXIMIZE

    def test_narrative(self):
        scenario = dynamic_goal(GoalDescriptor(metric="Gini", weight=0.75))
        assert scenario.kind is ScenarioKind.DYNAMIC_GOAL
        assert scenario.magnitude_disclosed
        assert "Gini coefficient" in scenario.narrative
        assert "minimized" in scenario.narrative
        assert "at 0.75 against net revenue at 0.25" in scenario.narrative


class TestEmergentScenario:
    def test_exactly_one_perturbation(self):
        with pytest.raises(ValueError):
            EmergentScenario(kind=ScenarioKind.RISING_DEMAND, narrative="x")
        with pytest.raises(ValueError):
            EmergentScenario(
                kind=ScenarioKind.RISING_DEMAND,
                narrative="x",
                demand_factors=[0.1],
                supply_delta=[1],
            )

    def test_overlaps(self):
        scenario = make_rising_scenario(2, 0.5, from_slot=2, until_slot=4)
        assert not scenario.overlaps(0, 2)
        assert scenario.overlaps(3, 5)
        assert not scenario.overlaps(4, 6)

    def test_kind_aliases(self):
        assert ScenarioKind("rising") is ScenarioKind.RISING_DEMAND
        assert ScenarioKind("Shrinking_Supply") is ScenarioKind.SHRINKING_SUPPLY
