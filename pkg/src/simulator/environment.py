"""
Single-slot request fulfillment.

Each origin serves all of its requests when it has enough vehicles;
otherwise its vehicles are apportioned across destinations by largest
remainder. Served trips arrive at their destination within the slot and
unserved requests are dropped.
"""
from dataclasses import dataclass
from typing import Sequence, Tuple, Union

import numpy as np

from src.core.apportion import largest_remainder
from src.core.domain import DemandMatrix, FleetState


@dataclass(frozen=True, eq=False)
class SlotOutcome:
    demand: DemandMatrix
    satisfied: np.ndarray
    unsatisfied: np.ndarray
    fleet_before: FleetState
    fleet_after: FleetState

    def __post_init__(self) -> None:
        for name in ("satisfied", "unsatisfied"):
            array = np.array(getattr(self, name), dtype=np.int64, copy=True)
            array.setflags(write=False)
            object.__setattr__(self, name, array)

    @property
    def total_satisfied(self) -> int:
        return int(self.satisfied.sum())

    @property
    def total_demand(self) -> int:
        return self.demand.total()


def serve_arrays(supply: np.ndarray, od: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Array form of `fulfill_slot`: returns (satisfied matrix, supply after the slot)."""
    satisfied = od.copy()
    for i in np.nonzero(od.sum(axis=1) > supply)[0]:
        satisfied[i] = largest_remainder(od[i], int(supply[i]))
    return satisfied, supply - satisfied.sum(axis=1) + satisfied.sum(axis=0)


def fulfill_slot(fleet: FleetState, demand: DemandMatrix) -> SlotOutcome:
    """
    Serve one slot of OD demand from the current fleet.

    :param fleet: Vehicles available per region at the start of the slot.
    :param demand: Trip requests for the slot.
    :return: Satisfied/unsatisfied matrices and the fleet after trips complete.
    """
    if demand.n != fleet.n:
        raise ValueError(f"Demand is {demand.n}x{demand.n} but the fleet has {fleet.n} regions")
    satisfied, after = serve_arrays(fleet.counts, demand.od)
    return SlotOutcome(
        demand=demand,
        satisfied=satisfied,
        unsatisfied=demand.od - satisfied,
        fleet_before=fleet,
        fleet_after=FleetState(after),
    )


def rollout_satisfied(fleet: Union[FleetState, np.ndarray], demands: Sequence[DemandMatrix]) -> int:
    """Total satisfied trips when ``demands`` are served in order from ``fleet`` with no further moves."""
    supply = fleet.counts if isinstance(fleet, FleetState) else np.asarray(fleet, dtype=np.int64)
    served = 0
    for demand in demands:
        satisfied, supply = serve_arrays(supply, demand.od)
        served += int(satisfied.sum())
    return served


@dataclass(frozen=True)
class RolloutSummary:
    satisfied: int
    served: np.ndarray
    supply: np.ndarray
    demand: np.ndarray

    def satisfaction_rate(self) -> float:
        """Unweighted mean served fraction over regions with demand; 1.0 when there is none."""
        has_demand = self.demand > 0
        if not has_demand.any():
            return 1.0
        return float((self.served[has_demand] / self.demand[has_demand]).mean())


def rollout_profile(fleet: Union[FleetState, np.ndarray], demands: Sequence[DemandMatrix]) -> RolloutSummary:
    """Like `rollout_satisfied`, also summing per-region served trips, slot-start supply and outbound demand."""
    supply = fleet.counts if isinstance(fleet, FleetState) else np.asarray(fleet, dtype=np.int64)
    supply_sum = np.zeros(supply.shape[0], dtype=np.int64)
    demand_sum = np.zeros(supply.shape[0], dtype=np.int64)
    served_sum = np.zeros(supply.shape[0], dtype=np.int64)
    served = 0
    for demand in demands:
        supply_sum += supply
        demand_sum += demand.outbound()
        satisfied, supply = serve_arrays(supply, demand.od)
        served_sum += satisfied.sum(axis=1)
        served += int(satisfied.sum())
    return RolloutSummary(satisfied=served, served=served_sum, supply=supply_sum, demand=demand_sum)
