import numpy as np
import pytest

from src.adaptation.prompt import SECTION_TITLES, build_prompt, format_fleet, render_reflection
from src.core.config import ExperimentConfig
from src.core.domain import (
    DemandMatrix,
    FleetState,
    PlanConstraints,
    PlanViolation,
    RebalancingPlan,
    TimeSlot,
    ViolationKind,
)
from src.core.plans import plan_from_moves
from src.ingest.demand import DemandStats
from src.scenario.scenarios import make_rising_scenario

N = 5


def od(*entries):
    matrix = np.zeros((N, N), dtype=np.int64)
    for i, j, c in entries:
        matrix[i, j] = c
    return DemandMatrix(matrix)


@pytest.fixture
def inputs():
    return {
        "state": FleetState([12, 5, 8, 3, 4]),
        "predicted": [od((0, 1, 2), (4, 1, 1)), od((0, 1, 1))],
        "stats": DemandStats(
            avg=np.full(N, 2.5), std=np.full(N, 0.5), min=np.full(N, 2), max=np.full(N, 3)
        ),
        "initial": plan_from_moves([(4, 1, 2)], N),
        "scenario": make_rising_scenario(N, 0.5, regions=[1], disclosed=True),
        "cfg": ExperimentConfig(n_regions=N, slots_per_day=24, rebalance_period=12, horizon=2),
        "at": TimeSlot(3, 12),
    }


class TestBuildPrompt:
    def test_sections_in_order(self, inputs):
        bundle = build_prompt(**inputs)
        assert bundle.sections() == list(SECTION_TITLES.values())
        text = bundle.render()
        positions = [text.index(f"## {title}\n") for title in SECTION_TITLES.values()]
        assert positions == sorted(positions)
        assert text.startswith("## Background\nYou plan vehicle relocations")

    def test_system_status(self, inputs):
        text = build_prompt(**inputs).render()
        assert "Current time: day 3, 12:00 (slot 12 of 24)." in text
        assert "Vehicles available per region, from Region 0 upward: [12, 5, 8, 3, 4] (32 in total)." in text
        assert "Region 0 → 1: 3\nRegion 4 → 1: 1" in text
        assert "Region 0: avg: 2.5, std: 0.5, min: 2, max: 3" in text

    def test_strategy_and_situation(self, inputs):
        bundle = build_prompt(**inputs)
        assert "Move 2 vehicles from Region 4 to 1" in bundle.initial_strategy
        assert bundle.emergent_situation == "Trip requests departing Region 1 are expected to rise by 50%."
        assert "hold exactly 32 vehicles" in bundle.constraint

    def test_without_a_baseline_only_the_strategy_goes(self, inputs):
        with_plan = build_prompt(**inputs)
        without = build_prompt(**{**inputs, "initial": None})
        assert "Initial Rebalancing Strategy" not in without.sections()
        strategy = f"## Initial Rebalancing Strategy\n{with_plan.initial_strategy}\n\n"
        assert with_plan.render().replace(strategy, "") == without.render()

    def test_same_inputs_same_bytes(self, inputs):
        assert build_prompt(**inputs).render() == build_prompt(**inputs).render()

    def test_operator_limits(self, inputs):
        constraints = PlanConstraints.build(3, [2, 0])
        text = build_prompt(**inputs, constraints=constraints).constraint
        assert "Relocate at most 3 vehicles in total." in text
        assert "Regions 0, 2 may neither send nor receive vehicles." in text

    def test_zero_plan_and_no_flows(self, inputs):
        bundle = build_prompt(
            **{**inputs, "initial": RebalancingPlan.zeros(N), "predicted": [DemandMatrix.zeros(N)]}
        )
        assert "Keep every vehicle where it is (no relocations)." in bundle.initial_strategy
        assert "No trips are predicted." in bundle.system_status

    def test_single_vehicle_wording(self, inputs):
        bundle = build_prompt(**{**inputs, "initial": plan_from_moves([(0, 3, 1)], N)})
        assert "Move 1 vehicle from Region 0 to 3" in bundle.initial_strategy

    def test_region_count_mismatch(self, inputs):
        with pytest.raises(ValueError):
            build_prompt(**{**inputs, "state": FleetState([1, 2, 3])})
        with pytest.raises(ValueError):
            build_prompt(**{**inputs, "initial": RebalancingPlan.zeros(3)})

    def test_format_fleet(self):
        assert format_fleet([12, 5, 8, 3]) == "[12, 5, 8, 3]"


class TestReflection:
    def test_lists_every_problem(self):
        violation = PlanViolation(ViolationKind.SOURCE_OVERDRAW, "region 0 ships 5 vehicles but holds 4", (0, 1))
        text = render_reflection('{"moves": []}', [violation, "the answer could not be parsed"])
        assert text.startswith("## Reflection\nYour previous answer was:\n{\"moves\": []}")
        assert "- SourceOverdraw at (0, 1): region 0 ships 5 vehicles but holds 4" in text
        assert "- the answer could not be parsed" in text
        assert "dimensional validity" in text and "conservation" in text and "task satisfaction" in text

    def test_empty_previous_answer(self):
        assert "(empty response)" in render_reflection("  ", ["no answer"])
