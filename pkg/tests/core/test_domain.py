import numpy as np
import pytest

from src.core.apportion import largest_remainder
from src.core.config import ExperimentConfig
from src.core.domain import DemandMatrix, FleetState, PlanViolation, RebalancingPlan, TimeSlot, ViolationKind


class TestTimeSlot:
    def test_ordering_is_by_day_then_slot(self):
        assert TimeSlot(0, 23) < TimeSlot(1, 0) < TimeSlot(1, 1)

    def test_index_round_trip(self):
        assert TimeSlot.from_index(TimeSlot(2, 5).index(24), 24) == TimeSlot(2, 5)

    def test_clock(self):
        assert TimeSlot(0, 8).clock(24) == "08:00"
        assert TimeSlot(0, 3).clock(48) == "01:30"

    def test_slot_outside_the_day(self):
        with pytest.raises(ValueError):
            TimeSlot(0, 24).index(24)


class TestValues:
    def test_fleet_rejects_negative_counts(self):
        with pytest.raises(ValueError):
            FleetState([1, -1])

    def test_arrays_are_read_only(self):
        state = FleetState([1, 2])
        with pytest.raises(ValueError):
            state.counts[0] = 5

    def test_demand_must_be_square(self):
        with pytest.raises(ValueError):
            DemandMatrix(np.zeros((2, 3), dtype=np.int64))

    def test_plan_diagonal_is_normalized(self):
        plan = RebalancingPlan([[3, 1], [0, 2]])
        assert plan.total_moves() == 1
        assert plan.moves[0, 0] == 0

    def test_violation_needs_detail(self):
        with pytest.raises(ValueError):
            PlanViolation(ViolationKind.CONSERVATION_BREAK, "")


class TestLargestRemainder:
    def test_sums_to_total(self, rng):
        for _ in range(200):
            weights = rng.integers(0, 10, size=int(rng.integers(1, 7)))
            if weights.sum() == 0:
                continue
            total = int(rng.integers(0, 40))
            allocation = largest_remainder(weights, total)
            assert allocation.sum() == total
            exact = weights * total / weights.sum()
            assert (np.abs(allocation - exact) < 1).all()

    def test_ties_go_to_the_lower_index(self):
        assert largest_remainder([1, 1, 1], 2).tolist() == [1, 1, 0]

    def test_all_zero_weights(self):
        with pytest.raises(ValueError):
            largest_remainder([0, 0], 3)


class TestExperimentConfig:
    def test_period_must_divide_the_day(self):
        with pytest.raises(ValueError):
            ExperimentConfig(n_regions=2, slots_per_day=24, rebalance_period=5)

    def test_derived_values(self):
        cfg = ExperimentConfig(n_regions=2, slots_per_day=48, rebalance_period=12, episode_days=2)
        assert cfg.slot_minutes == 30
        assert cfg.episode_slots == 96
        assert cfg.with_seed(7).rng_seed == 7
