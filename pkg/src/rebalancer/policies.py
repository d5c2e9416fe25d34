"""
Baseline rebalancing policies.

Every policy maps (current fleet, predicted demand over the horizon) to a
plan that passes `validate_plan` against the fleet. Projected need sums the
predicted outbound demand of each region over the full horizon.
"""
from enum import Enum
from typing import Callable, List, Optional, Sequence

import numpy as np

from src.core.apportion import largest_remainder
from src.core.domain import DemandMatrix, FleetState, RebalancingPlan
from src.core.errors import StructuralError
from utils.ml_logging import get_logger

logger = get_logger("rebalancing.rebalancer")

Rebalancer = Callable[[FleetState, List[DemandMatrix]], RebalancingPlan]


class RebalancerKind(str, Enum):
    NULL = "Null"
    SDSM = "SDSM"
    GREEDY = "Greedy"
    GA = "GA"

    @classmethod
    def _missing_(cls, value: object) -> Optional["RebalancerKind"]:
        lowered = str(value).lower()
        for member in cls:
            if member.value.lower() == lowered:
                return member
        return None


def projected_need(predicted: Sequence[DemandMatrix], n: int) -> np.ndarray:
    """Predicted outbound demand per region summed over the horizon."""
    need = np.zeros(n, dtype=np.int64)
    for matrix in predicted:
        need += matrix.outbound()
    return need


def null_rebalance(state: FleetState, predicted: Sequence[DemandMatrix]) -> RebalancingPlan:
    return RebalancingPlan.zeros(state.n)


def sdsm_targets(state: FleetState, predicted: Sequence[DemandMatrix]) -> np.ndarray:
    """
    Demand-supply matching targets: the fleet total split in proportion to
    projected need, largest remainder with low-index ties. With no predicted
    demand the current distribution is kept.
    """
    need = projected_need(predicted, state.n)
    if need.sum() == 0:
        return state.counts.copy()
    return largest_remainder(need, state.total())


def plan_to_targets(state: FleetState, targets: Sequence[int]) -> RebalancingPlan:
    """
    Moves that turn ``state`` into ``targets`` exactly.

    Deficit regions are served largest first (lower index on ties), each
    pulling from surplus regions in the same order.

    :raises StructuralError: If the target vector has the wrong length, a
        negative entry or a different total.
    """
    target = np.asarray(targets, dtype=np.int64)
    if target.shape != (state.n,):
        raise StructuralError(f"targets have shape {target.shape}, expected ({state.n},)")
    if (target < 0).any():
        raise StructuralError(f"targets must be non-negative, got {target.tolist()}")
    if int(target.sum()) != state.total():
        raise StructuralError(
            f"targets sum to {int(target.sum())} but the fleet holds {state.total()} vehicles"
        )

    surplus = np.maximum(state.counts - target, 0)
    deficit = np.maximum(target - state.counts, 0)
    # lexsort: last key is primary -> descending size, then ascending index
    deficit_order = [int(j) for j in np.lexsort((np.arange(state.n), -deficit)) if deficit[j] > 0]
    surplus_order = [int(i) for i in np.lexsort((np.arange(state.n), -surplus)) if surplus[i] > 0]

    moves = np.zeros((state.n, state.n), dtype=np.int64)
    for j in deficit_order:
        for i in surplus_order:
            if deficit[j] == 0:
                break
            shipped = min(surplus[i], deficit[j])
            if shipped:
                moves[i, j] += shipped
                surplus[i] -= shipped
                deficit[j] -= shipped
    return RebalancingPlan(moves)


def sdsm_rebalance(state: FleetState, predicted: Sequence[DemandMatrix]) -> RebalancingPlan:
    return plan_to_targets(state, sdsm_targets(state, predicted))


def greedy_rebalance(state: FleetState, predicted: Sequence[DemandMatrix]) -> RebalancingPlan:
    """
    Move one vehicle at a time from the largest projected surplus
    (supply - need) to the largest projected shortage, until either side is
    exhausted. Each step lowers total projected shortage by exactly one.
    """
    counts = state.counts.copy()
    need = projected_need(predicted, state.n)
    moves = np.zeros((state.n, state.n), dtype=np.int64)
    shortage = int(np.maximum(need - counts, 0).sum())
    while True:
        gap = counts - need
        src = int(np.argmax(gap))
        dst = int(np.argmax(need - counts))
        if gap[src] <= 0 or need[dst] - counts[dst] <= 0:
            break
        counts[src] -= 1
        counts[dst] += 1
        moves[src, dst] += 1
        remaining = int(np.maximum(need - counts, 0).sum())
        assert remaining == shortage - 1, "greedy step must lower projected shortage"
        shortage = remaining
    logger.debug(f"Greedy relocated {int(moves.sum())} vehicles; projected shortage left {shortage}")
    return RebalancingPlan(moves)
