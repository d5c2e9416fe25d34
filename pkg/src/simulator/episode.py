"""
The episode loop: rebalance at period boundaries, optionally hand the plan to
an adaptation loop while an emergent scenario is live, then serve demand slot
by slot.
"""
import hashlib
from dataclasses import dataclass
from typing import Any, List, Optional, Protocol, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from src.core.config import ExperimentConfig, InitialDistribution
from src.core.apportion import largest_remainder
from src.core.domain import DemandMatrix, FleetState, RebalancingPlan, TimeSlot
from src.core.errors import EpisodeAbortedError, RebalancingError
from src.core.plans import apply_plan, validate_plan
from src.ingest.demand import DemandStats, Predictor, compute_stats, make_predictor
from src.ingest.series import DemandSeries
from src.rebalancer.policies import Rebalancer
from src.scenario.scenarios import EmergentScenario
from src.scenario.schedule import ScenarioInjector, ScenarioSchedule
from src.simulator.environment import SlotOutcome, fulfill_slot
from utils.ml_logging import get_logger

logger = get_logger("rebalancing.simulator")


class PlanAdapter(Protocol):
    """What the episode needs from an adaptation loop."""

    def __call__(
        self,
        *,
        initial: RebalancingPlan,
        state: FleetState,
        predicted: List[DemandMatrix],
        stats: DemandStats,
        scenarios: Sequence[EmergentScenario],
        at: TimeSlot,
        episode_slot: int,
    ) -> Any:
        """Return a transcript exposing ``final_plan`` (a plan valid against ``state``)."""
        ...


@dataclass(frozen=True)
class AppliedPlan:
    slot: int
    plan: RebalancingPlan
    adapted: bool


@dataclass(frozen=True, eq=False)
class EpisodeResult:
    outcomes: List[SlotOutcome]
    plans: List[AppliedPlan]
    transcripts: List[Any]
    scenarios: List[Tuple[int, EmergentScenario]]
    total_satisfied: int
    total_demand: int
    revenue: float
    moves_executed: int
    vehicles_removed: int
    initial_total: int
    trace_digest: str
    start_slot: int = 0
    slots_per_day: int = 24

    def __post_init__(self) -> None:
        if self.total_satisfied > self.total_demand:
            raise ValueError("total_satisfied cannot exceed total_demand")

    @property
    def n_slots(self) -> int:
        return len(self.outcomes)

    def satisfied_by_region(self) -> np.ndarray:
        return sum((o.satisfied.sum(axis=1) for o in self.outcomes), np.zeros(self._n(), dtype=np.int64))

    def demand_by_region(self) -> np.ndarray:
        return sum((o.demand.outbound() for o in self.outcomes), np.zeros(self._n(), dtype=np.int64))

    def supply_by_region(self) -> np.ndarray:
        """Vehicles available at slot start, summed over the episode."""
        return sum((o.fleet_before.counts for o in self.outcomes), np.zeros(self._n(), dtype=np.int64))

    def _n(self) -> int:
        return self.outcomes[0].fleet_before.n if self.outcomes else 0

    def to_record(self) -> dict:
        return {
            "total_satisfied": self.total_satisfied,
            "total_demand": self.total_demand,
            "revenue": self.revenue,
            "moves_executed": self.moves_executed,
            "vehicles_removed": self.vehicles_removed,
            "n_slots": self.n_slots,
            "adaptations": len(self.transcripts),
            "trace_digest": self.trace_digest,
        }


def initial_fleet(cfg: ExperimentConfig, history: Optional[DemandSeries] = None) -> FleetState:
    """
    Place ``cfg.fleet_size`` vehicles: uniformly, or in proportion to each
    region's outbound demand over ``history`` (uniform when it is empty).
    """
    n = cfg.n_regions
    weights = np.ones(n, dtype=np.int64)
    if cfg.initial_distribution is InitialDistribution.DEMAND and history is not None and history.total() > 0:
        weights = history.outbound().sum(axis=0)
    return FleetState(largest_remainder(weights, cfg.fleet_size))


def _disclosed_predictions(
    predicted: List[DemandMatrix], scenarios: Sequence[EmergentScenario], first_slot: int
) -> List[DemandMatrix]:
    disclosed = [s for s in scenarios if s.magnitude_disclosed and s.demand_factors is not None]
    if not disclosed:
        return predicted
    scaled = []
    for offset, matrix in enumerate(predicted):
        for scenario in disclosed:
            matrix = scenario.scale_demand(matrix, first_slot + offset)
        scaled.append(matrix)
    return scaled


def realized_demand(
    demand: DemandMatrix, scenarios: Sequence[EmergentScenario], slot: int
) -> DemandMatrix:
    for scenario in scenarios:
        demand = scenario.scale_demand(demand, slot)
    return demand


def run_episode(
    initial: FleetState,
    series: DemandSeries,
    rebalancer: Rebalancer,
    cfg: ExperimentConfig,
    adapter: Optional[PlanAdapter] = None,
    scenario: Optional[Union[EmergentScenario, ScenarioSchedule]] = None,
    *,
    start_slot: int = 0,
    n_slots: Optional[int] = None,
    predictor: Optional[Predictor] = None,
    stats: Optional[DemandStats] = None,
) -> EpisodeResult:
    """
    Simulate one episode.

    :param initial: Fleet at the first slot.
    :param series: Demand; the episode covers ``[start_slot, start_slot + n_slots)``.
    :param rebalancer: ``(state, predicted) -> plan`` baseline policy.
    :param cfg: Time grid and economics.
    :param adapter: Adaptation loop consulted at rebalancing points while a scenario is live.
    :param scenario: A schedule, or one scenario injected at the first slot.
    :param start_slot: Absolute index of the first episode slot in ``series``.
    :param n_slots: Episode length; defaults to the rest of the series.
    :param predictor: ``(at, h) -> matrices``; defaults to ``cfg.predictor`` over ``series``.
    :param stats: Demand statistics for the prompt; defaults to the slots before ``start_slot``.
    :raises EpisodeAbortedError: If the rebalancer emits an infeasible plan.
    """
    if initial.n != series.n:
        raise ValueError(f"Fleet has {initial.n} regions but demand has {series.n}")
    n_slots = len(series) - start_slot if n_slots is None else n_slots
    if start_slot < 0 or n_slots < 0 or start_slot + n_slots > len(series):
        raise ValueError(
            f"Series of {len(series)} slots does not cover the episode [{start_slot}, {start_slot + n_slots})"
        )

    per_day, period, horizon = cfg.slots_per_day, cfg.rebalance_period, cfg.horizon
    predictor = predictor or make_predictor(series, cfg.predictor)

    schedule = scenario if isinstance(scenario, ScenarioSchedule) else ScenarioSchedule()
    injector = ScenarioInjector(schedule, per_day)
    initial_total = initial.total()
    active: List[EmergentScenario] = []
    injected: List[Tuple[int, EmergentScenario]] = []
    digest = hashlib.sha256()
    if isinstance(scenario, EmergentScenario):
        if scenario.supply_delta is not None:
            initial = FleetState(initial.counts - scenario.supply_delta)
        active.append(scenario)
        injected.append((0, scenario))
        digest.update(scenario.signature().encode("utf-8"))

    fleet = initial
    removed = sum(s.removed_total() for s in active)
    outcomes: List[SlotOutcome] = []
    plans: List[AppliedPlan] = []
    transcripts: List[Any] = []
    moves = 0

    for k in range(n_slots):
        fleet, fired = injector.inject(k, fleet)
        for s in fired:
            digest.update(s.signature().encode("utf-8"))
            injected.append((k, s))
            removed += s.removed_total()
        active.extend(fired)

        at = TimeSlot.from_index(start_slot + k, per_day)
        if k % period == 0:
            predicted = _disclosed_predictions(predictor(at, horizon), active, k)
            plan = rebalancer(fleet, predicted)
            violations = validate_plan(fleet, plan)
            if violations:
                logger.error(f"Rebalancer emitted an infeasible plan at slot {k}: {violations}")
                raise EpisodeAbortedError(k, violations)

            adapted = False
            live = [s for s in active if s.overlaps(k, k + period)]
            if adapter is not None and live:
                if stats is None:
                    stats = compute_stats(series.window(0, start_slot) if start_slot > 0 else series)
                transcript = adapter(
                    initial=plan,
                    state=fleet,
                    predicted=predicted,
                    stats=stats,
                    scenarios=live,
                    at=at,
                    episode_slot=k,
                )
                transcripts.append(transcript)
                plan, adapted = transcript.final_plan, True

            fleet = apply_plan(fleet, plan)
            moves += plan.total_moves()
            plans.append(AppliedPlan(k, plan, adapted))

        demand = realized_demand(series[start_slot + k], active, k)
        digest.update(demand.od.tobytes())
        outcome = fulfill_slot(fleet, demand)
        outcomes.append(outcome)
        fleet = outcome.fleet_after
        if fleet.total() != initial_total - removed:
            raise RebalancingError(
                f"Vehicle total drifted to {fleet.total()} at slot {k}, expected {initial_total - removed}"
            )

    total_satisfied = sum(o.total_satisfied for o in outcomes)
    total_demand = sum(o.total_demand for o in outcomes)
    revenue = cfg.fare_per_trip * total_satisfied - cfg.move_cost * moves
    result = EpisodeResult(
        outcomes=outcomes,
        plans=plans,
        transcripts=transcripts,
        scenarios=injected,
        total_satisfied=total_satisfied,
        total_demand=total_demand,
        revenue=revenue,
        moves_executed=moves,
        vehicles_removed=removed,
        initial_total=initial_total,
        trace_digest=digest.hexdigest(),
        start_slot=start_slot,
        slots_per_day=per_day,
    )
    logger.keyinfo(
        f"Episode finished: {total_satisfied}/{total_demand} trips served, "
        f"{moves} moves, revenue {revenue:.2f}, {len(transcripts)} adaptation(s)"
    )
    return result


def episode_trace_frame(result: EpisodeResult) -> pd.DataFrame:
    """Per-slot, per-region trace for plotting."""
    rows = []
    plan_slots = {p.slot: p for p in result.plans}
    for k, outcome in enumerate(result.outcomes):
        at = TimeSlot.from_index(result.start_slot + k, result.slots_per_day)
        applied = plan_slots.get(k)
        for region in range(outcome.fleet_before.n):
            rows.append(
                {
                    "episode_slot": k,
                    "day": at.day,
                    "slot": at.slot,
                    "region": region,
                    "supply": outcome.fleet_before[region],
                    "demand": int(outcome.demand.od[region].sum()),
                    "satisfied": int(outcome.satisfied[region].sum()),
                    "unsatisfied": int(outcome.unsatisfied[region].sum()),
                    "moved_out": int(applied.plan.outflow()[region]) if applied else 0,
                    "moved_in": int(applied.plan.inflow()[region]) if applied else 0,
                    "fleet_after": outcome.fleet_after[region],
                }
            )
    return pd.DataFrame(rows)
