"""
The adapter interface and the offline adapters used by tests and mock runs.

An adapter takes an `AdapterRequest` and returns raw text. The live client
only reads ``request.prompt``; the mocks read the structured context and
answer in the same fenced-JSON format a model is asked for.
"""
import json
import math
import threading
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Set, Tuple

import numpy as np

from src.core.domain import DemandMatrix, FleetState, PlanConstraints, RebalancingPlan
from src.core.plans import plan_to_record
from src.ingest.demand import DemandStats
from src.metrics.indices import demand_supply_ratios, equity_variance, gini, theil
from src.scenario.scenarios import EmergentScenario, EquityMetric, GoalDescriptor, GoalDirection
from src.simulator.environment import RolloutSummary, rollout_profile
from utils.ml_logging import get_logger

logger = get_logger("rebalancing.adaptation")

# golden-ratio rotation: any 8 consecutive points leave no gap wider than 0.146 on the circle
_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
_TOLERANCE = 1e-12


@dataclass(frozen=True)
class AdapterRequest:
    prompt: str
    state: FleetState
    initial: Optional[RebalancingPlan]
    predicted: Sequence[DemandMatrix]
    scenarios: Tuple[EmergentScenario, ...] = ()
    iteration: int = 1
    episode_slot: int = 0
    constraints: PlanConstraints = field(default_factory=PlanConstraints)
    stats: Optional[DemandStats] = None


Adapter = Callable[[AdapterRequest], str]


def fenced_plan(plan: RebalancingPlan, goal: Optional[Dict[str, float]] = None) -> str:
    record = plan_to_record(plan)
    if goal is not None:
        record["goal"] = goal
    return f"Here is the revised plan.\n```json\n{json.dumps(record)}\n```"


def echo_adapter(request: AdapterRequest) -> str:
    """Return the initial plan unchanged (the zero plan when there is none)."""
    return fenced_plan(request.initial if request.initial is not None else RebalancingPlan.zeros(request.state.n))


def _shift_one(state: FleetState, moves: np.ndarray, src: int, dst: int) -> bool:
    """
    Edit ``moves`` in place so one more vehicle ends up in ``dst`` and one
    fewer in ``src``, keeping the plan feasible. Returns False when ``src``
    has nothing to give.
    """
    if moves[dst, src] > 0:
        moves[dst, src] -= 1
        return True
    if state[src] - int(moves[src].sum()) > 0:
        moves[src, dst] += 1
        return True
    for k in np.nonzero(moves[:, src])[0]:
        if int(k) != dst:
            moves[k, src] -= 1
            moves[k, dst] += 1
            return True
    return False


def goal_value(goal: GoalDescriptor, summary: RolloutSummary) -> float:
    """The goal metric over a rollout, oriented so that larger is better."""
    if goal.metric is EquityMetric.EQUITY_VARIANCE:
        value = equity_variance(summary.supply, summary.demand) if summary.supply.sum() > 0 else 0.0
    else:
        ratios = demand_supply_ratios(summary.supply, summary.demand)
        value = gini(ratios) if goal.metric is EquityMetric.GINI else theil(ratios)
    return value if goal.direction is GoalDirection.MAXIMIZE else -value


class ShortageRepairAdapter:
    """
    Deterministic stand-in for a model that understood the situation.

    It reconstructs the demand the episode will realize (predictions with
    undisclosed surges applied) and amends the initial plan one vehicle at a
    time. Vehicles only go to regions the scenario touched (any region under
    a goal) and only come from untouched regions holding more than they can
    dispatch over the horizon with no inflow at all. Each accepted shift
    strictly improves the projected satisfaction rate, or, under a goal,
    strictly improves the goal metric without lowering the satisfaction rate.

    :param breadth: Sources and destinations tried per step.
    :param trust_forecast: Drop the source reserve. Only sound when the
        predictions are the realized demand.
    """

    def __init__(self, breadth: int = 3, trust_forecast: bool = False):
        self.breadth = breadth
        self.trust_forecast = trust_forecast

    def __call__(self, request: AdapterRequest) -> str:
        plan, claim = self.repair(request)
        return fenced_plan(plan, claim)

    def repair(self, request: AdapterRequest) -> Tuple[RebalancingPlan, Optional[Dict[str, float]]]:
        state = request.state
        n = state.n
        truth = self._expected_demand(request)
        goals = [s.constraint for s in request.scenarios if s.constraint is not None]
        goal = goals[0] if goals else None
        blocked = request.constraints.blocked_regions
        budget = request.constraints.max_total_moves
        touched = self._touched(request)
        targets = [j for j in range(n) if j not in blocked and (goal is not None or j in touched)]
        givers = np.array([i not in blocked and i not in touched for i in range(n)])
        reserve = self.reserve(request, truth)

        initial = request.initial if request.initial is not None else RebalancingPlan.zeros(n)
        moves = np.array(initial.moves, dtype=np.int64)
        summary = rollout_profile(self._post(state, moves), truth)
        start_value = goal_value(goal, summary) if goal is not None else None

        for _ in range(state.total() + 1):
            rate = summary.satisfaction_rate()
            value = goal_value(goal, summary) if goal is not None else None
            spare = np.where(givers, self._post(state, moves) - reserve, 0)
            best: Optional[Tuple[float, np.ndarray, RolloutSummary]] = None
            for src, dst in self._candidates(spare, targets, summary, goal):
                trial = moves.copy()
                if not _shift_one(state, trial, src, dst):
                    continue
                if budget is not None and int(trial.sum()) > budget:
                    continue
                outcome = rollout_profile(self._post(state, trial), truth)
                new_rate = outcome.satisfaction_rate()
                if goal is None:
                    score = new_rate
                    improves = new_rate > rate + _TOLERANCE
                else:
                    score = goal_value(goal, outcome)
                    improves = score > value + _TOLERANCE and new_rate >= rate
                if improves and (best is None or score > best[0]):
                    best = (score, trial, outcome)
            if best is None:
                break
            _, moves, summary = best

        claim = None
        if goal is not None:
            sign = 1.0 if goal.direction is GoalDirection.MAXIMIZE else -1.0
            claim = {"before": sign * start_value, "after": sign * goal_value(goal, summary)}
        return RebalancingPlan(moves), claim

    def reserve(self, request: AdapterRequest, truth: Sequence[DemandMatrix]) -> np.ndarray:
        """
        Vehicles each region keeps when giving: its projected outbound demand
        over the horizon, raised to ``avg + std`` trips per slot of its
        history when that is larger. Inflow is not counted.
        """
        n = request.state.n
        if self.trust_forecast:
            return np.zeros(n, dtype=np.int64)
        outbound = np.zeros(n, dtype=np.int64)
        for matrix in truth:
            outbound += matrix.outbound()
        if request.stats is not None:
            per_slot = np.asarray(request.stats.avg) + np.asarray(request.stats.std)
            outbound = np.maximum(outbound, np.ceil(len(truth) * per_slot).astype(np.int64))
        return outbound

    @staticmethod
    def _touched(request: AdapterRequest) -> Set[int]:
        touched: Set[int] = set()
        for scenario in request.scenarios:
            if scenario.demand_factors is not None or scenario.supply_delta is not None:
                touched.update(scenario.affected_regions())
        return touched

    @staticmethod
    def _post(state: FleetState, moves: np.ndarray) -> np.ndarray:
        return state.counts - moves.sum(axis=1) + moves.sum(axis=0)

    @staticmethod
    def _expected_demand(request: AdapterRequest) -> List[DemandMatrix]:
        hidden = [s for s in request.scenarios if s.demand_factors is not None and not s.magnitude_disclosed]
        expected = []
        for offset, matrix in enumerate(request.predicted):
            for scenario in hidden:
                matrix = scenario.scale_demand(matrix, request.episode_slot + offset)
            expected.append(matrix)
        return expected

    def _candidates(
        self,
        spare: np.ndarray,
        targets: Sequence[int],
        summary: RolloutSummary,
        goal: Optional[GoalDescriptor],
    ) -> List[Tuple[int, int]]:
        n = spare.shape[0]
        if goal is None:
            pressure = (summary.demand - summary.served).astype(np.float64)
        else:
            pressure = demand_supply_ratios(summary.supply, summary.demand)
        order = [int(k) for k in np.lexsort((np.arange(n), -pressure))]
        wanted = set(targets)
        dests = [j for j in order if j in wanted and (goal is not None or pressure[j] > 0)][: self.breadth]
        sources = [i for i in reversed(order) if spare[i] > 0][: self.breadth]
        return [(i, j) for i in sources for j in dests if i != j]


def _overdraw_text(request: AdapterRequest) -> str:
    n = request.state.n
    if n < 2:
        return '```json\n{"moves": [{"from": 0, "to": 1, "count": 1}]}\n```'
    src = int(np.argmax(request.state.counts))
    dst = (src + 1) % n
    return json.dumps({"moves": [{"from": src, "to": dst, "count": request.state[src] + 1}]})


_MALFORMED_TEXT = 'Plan:\n```json\n{"moves": [{"from": 0, "to": 1, "count": \n```'


class FaultyAdapter:
    """
    Corrupts a share ``p`` of its answers and delegates the rest to ``inner``.

    Whether call k is corrupted is decided by a golden-ratio rotation with a
    seeded offset, so the corrupted share stays close to ``p`` even over a
    handful of calls. Corrupted answers alternate between a source overdraw
    and truncated JSON.
    """

    def __init__(self, p: float, seed: int = 0, inner: Optional[Adapter] = None):
        if not 0.0 <= p <= 1.0:
            raise ValueError(f"p must be in [0, 1], got {p}")
        self.p = p
        self.seed = seed
        self.inner = inner or echo_adapter
        self._offset = float(np.random.default_rng(seed).random())
        self._calls = 0
        self._lock = threading.Lock()

    @property
    def calls(self) -> int:
        return self._calls

    def __call__(self, request: AdapterRequest) -> str:
        with self._lock:
            k = self._calls
            self._calls += 1
        if (self._offset + k * _GOLDEN) % 1.0 < self.p:
            logger.debug(f"Faulty adapter corrupting call {k}")
            return _overdraw_text(request) if k % 2 == 0 else _MALFORMED_TEXT
        return self.inner(request)


def always_invalid_adapter(seed: int = 0) -> FaultyAdapter:
    return FaultyAdapter(1.0, seed)


MOCK_NAMES = ("echo", "shortage_repair", "faulty", "always_invalid")


def build_mock(name: str, p: float = 0.85, seed: int = 0) -> Adapter:
    """
    :raises ValueError: If ``name`` is not one of `MOCK_NAMES`.
    """
    if name == "echo":
        return echo_adapter
    if name == "shortage_repair":
        return ShortageRepairAdapter()
    if name == "faulty":
        return FaultyAdapter(p, seed)
    if name == "always_invalid":
        return always_invalid_adapter(seed)
    raise ValueError(f"Unknown mock adapter {name!r}; expected one of {', '.join(MOCK_NAMES)}")


def mock_adapters(p: float = 0.85, seed: int = 0) -> Dict[str, Adapter]:
    return {name: build_mock(name, p, seed) for name in MOCK_NAMES}
