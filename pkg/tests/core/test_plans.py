import numpy as np
import pytest

from src.core.domain import FleetState, PlanConstraints, RebalancingPlan, ViolationKind
from src.core.errors import PlanValidationError, StructuralError
from src.core.plans import (
    apply_plan,
    plan_from_moves,
    plan_from_record,
    plan_to_json,
    plan_to_moves,
    plan_to_record,
    validate_plan,
)
from tests.conftest import random_plan


class TestValidatePlan:
    def test_valid_plan_has_no_violations(self):
        state = FleetState([3, 1, 0])
        plan = plan_from_moves([(0, 2, 2), (1, 0, 1)], 3)
        assert validate_plan(state, plan) == []

    def test_overdraw_is_located_at_the_source(self):
        state = FleetState([2, 0, 0])
        violations = validate_plan(state, plan_from_moves([(0, 1, 3)], 3))
        assert [v.kind for v in violations] == [ViolationKind.SOURCE_OVERDRAW]
        assert violations[0].location == (0, 1)

    def test_negative_entry(self):
        moves = np.zeros((2, 2), dtype=np.int64)
        moves[0, 1] = -1
        kinds = {v.kind for v in validate_plan(FleetState([1, 1]), RebalancingPlan(moves))}
        assert ViolationKind.NEGATIVE_ENTRY in kinds

    def test_wrong_shape_is_reported_alone(self):
        violations = validate_plan(FleetState([1, 1, 1]), RebalancingPlan.zeros(2))
        assert [v.kind for v in violations] == [ViolationKind.MALFORMED_SHAPE]

    def test_conservation_against_a_stated_total(self):
        state = FleetState([2, 2])
        violations = validate_plan(state, RebalancingPlan.zeros(2), total_before=5)
        assert [v.kind for v in violations] == [ViolationKind.CONSERVATION_BREAK]

    def test_move_budget_and_blocked_regions(self):
        state = FleetState([4, 0, 0])
        plan = plan_from_moves([(0, 1, 2), (0, 2, 1)], 3)
        constraints = PlanConstraints.build(max_total_moves=2, blocked_regions=[2])
        violations = validate_plan(state, plan, constraints=constraints)
        assert all(v.kind is ViolationKind.CONSTRAINT_BREACH for v in violations)
        assert len(violations) == 2
        assert validate_plan(state, plan) == []

    def test_reports_every_defect(self):
        state = FleetState([1, 1, 0])
        plan = plan_from_moves([(0, 2, 2), (1, 2, 3)], 3)
        violations = validate_plan(state, plan)
        assert {v.location[0] for v in violations} == {0, 1}

    def test_fuzzed_valid_plans_conserve_on_apply(self, rng):
        for _ in range(2000):
            n = int(rng.integers(1, 6))
            state = FleetState(rng.integers(0, 8, size=n))
            moves = random_plan(rng, state, fill=1.5)
            plan = RebalancingPlan(moves)
            violations = validate_plan(state, plan)
            overdrawn = (moves.sum(axis=1) > state.counts).any()
            assert bool(violations) == bool(overdrawn)
            if not violations:
                after = apply_plan(state, plan)
                assert after.total() == state.total()
                assert (after.counts >= 0).all()


class TestApplyPlan:
    def test_moves_vehicles(self):
        after = apply_plan(FleetState([5, 0, 1]), plan_from_moves([(0, 1, 2), (2, 0, 1)], 3))
        assert after.tolist() == [4, 2, 0]

    def test_rejects_invalid_plan(self):
        with pytest.raises(PlanValidationError) as excinfo:
            apply_plan(FleetState([1, 0]), plan_from_moves([(0, 1, 2)], 2))
        assert excinfo.value.violations[0].kind is ViolationKind.SOURCE_OVERDRAW

    def test_zero_plan_is_identity(self):
        state = FleetState([3, 4])
        assert apply_plan(state, RebalancingPlan.zeros(2)) == state


class TestMoveLists:
    def test_duplicates_accumulate_and_self_moves_drop(self):
        plan = plan_from_moves([(0, 1, 1), (0, 1, 2), (2, 2, 5)], 3)
        assert plan_to_moves(plan) == [(0, 1, 3)]

    def test_out_of_range_index_is_named(self):
        with pytest.raises(StructuralError, match="9"):
            plan_from_moves([(0, 9, 1)], 3)

    def test_negative_count_is_rejected(self):
        with pytest.raises(StructuralError):
            plan_from_moves([(0, 1, -1)], 2)

    def test_moves_round_trip_through_a_plan(self, rng):
        for _ in range(50):
            n = int(rng.integers(2, 6))
            plan = RebalancingPlan(rng.integers(0, 3, size=(n, n)))
            assert plan_from_moves(plan_to_moves(plan), n) == plan

    def test_record_form(self):
        plan = plan_from_moves([(4, 1, 2)], 5)
        assert plan_to_record(plan) == {"moves": [{"from": 4, "to": 1, "count": 2}]}
        assert plan_from_record(plan_to_record(plan), 5) == plan
        assert plan_to_json(plan) == '{"moves": [{"from": 4, "to": 1, "count": 2}]}'
