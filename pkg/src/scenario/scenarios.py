"""
Emergent scenarios: demand surges, supply shrinkage and regulator goals.

Each generator returns a typed `EmergentScenario` carrying the perturbation
(demand factors, per-region removals or a goal descriptor) together with the
narrative the adaptation agent reads.
"""
import hashlib
import json
from dataclasses import dataclass
from enum import Enum
from typing import Any, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from src.core.domain import DemandMatrix, FleetState, TimeSlot
from src.ingest.series import DemandSeries
from src.scenario.narratives import (
    dynamic_goal_narrative,
    rising_demand_narrative,
    shrinking_supply_narrative,
)

# float products such as 5 * 1.3 may land a hair under the .5 boundary
_ROUNDING_SLACK = 1e-9


class ScenarioKind(str, Enum):
    RISING_DEMAND = "RisingDemand"
    SHRINKING_SUPPLY = "ShrinkingSupply"
    DYNAMIC_GOAL = "DynamicGoal"

    @classmethod
    def _missing_(cls, value: object) -> Optional["ScenarioKind"]:
        aliases = {
            "rising": cls.RISING_DEMAND,
            "rising_demand": cls.RISING_DEMAND,
            "shrinking": cls.SHRINKING_SUPPLY,
            "shrinking_supply": cls.SHRINKING_SUPPLY,
            "goal": cls.DYNAMIC_GOAL,
            "dynamic_goal": cls.DYNAMIC_GOAL,
        }
        return aliases.get(str(value).lower())


class EquityMetric(str, Enum):
    EQUITY_VARIANCE = "EquityVariance"
    GINI = "Gini"
    THEIL = "Theil"


class GoalDirection(str, Enum):
    MAXIMIZE = "maximize"
    MINIMIZE = "minimize"


class GoalDescriptor(BaseModel):
    """Regulator goal: an equity metric, its direction and its weight against revenue."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    metric: EquityMetric = EquityMetric.EQUITY_VARIANCE
    direction: GoalDirection = GoalDirection.MAXIMIZE
    weight: float = Field(0.5, ge=0.0, le=1.0)

    @model_validator(mode="before")
    @classmethod
    def _default_direction(cls, data: Any) -> Any:
        if isinstance(data, dict) and data.get("direction") is None:
            metric = EquityMetric(data.get("metric", EquityMetric.EQUITY_VARIANCE))
            # equity variance is "higher is better"; Gini and Theil are inequality measures
            natural = (
                GoalDirection.MAXIMIZE
                if metric is EquityMetric.EQUITY_VARIANCE
                else GoalDirection.MINIMIZE
            )
            data = {**data, "direction": natural}
        return data


def scale_counts(od: np.ndarray, factors: np.ndarray) -> np.ndarray:
    """Scale each origin row i by ``1 + factors[i]``, rounding half up."""
    scaled = od * (1.0 + factors)[:, None]
    return np.floor(scaled + 0.5 + _ROUNDING_SLACK).astype(np.int64)


@dataclass(frozen=True, eq=False)
class EmergentScenario:
    """
    One emergent perturbation: a demand change, a supply change or a goal.

    Slots are relative to the episode start. ``from_slot``/``until_slot``
    bound where the demand factors apply (``until_slot`` exclusive, None
    for open-ended).
    """

    kind: ScenarioKind
    narrative: str
    demand_factors: Optional[np.ndarray] = None
    supply_delta: Optional[np.ndarray] = None
    constraint: Optional[GoalDescriptor] = None
    magnitude_disclosed: bool = False
    seed: int = 0
    from_slot: int = 0
    until_slot: Optional[int] = None

    def __post_init__(self) -> None:
        if not self.narrative:
            raise ValueError("EmergentScenario.narrative must be non-empty")
        for name in ("demand_factors", "supply_delta"):
            value = getattr(self, name)
            if value is not None:
                dtype = np.float64 if name == "demand_factors" else np.int64
                array = np.array(value, dtype=dtype, copy=True)
                array.setflags(write=False)
                object.__setattr__(self, name, array)
        populated = {
            ScenarioKind.RISING_DEMAND: self.demand_factors is not None,
            ScenarioKind.SHRINKING_SUPPLY: self.supply_delta is not None,
            ScenarioKind.DYNAMIC_GOAL: self.constraint is not None,
        }
        if not populated[self.kind] or sum(populated.values()) != 1:
            raise ValueError(f"{self.kind.value} scenario must populate exactly its own perturbation field")
        if self.supply_delta is not None and (self.supply_delta < 0).any():
            raise ValueError("supply_delta holds removals and must be non-negative")

    def is_active(self, slot: int) -> bool:
        return slot >= self.from_slot and (self.until_slot is None or slot < self.until_slot)

    def overlaps(self, first: int, stop: int) -> bool:
        """Whether the scenario is active anywhere in ``[first, stop)``."""
        end = self.until_slot if self.until_slot is not None else stop
        return max(first, self.from_slot) < min(stop, end)

    def scale_demand(self, demand: DemandMatrix, slot: int) -> DemandMatrix:
        """Apply the demand change to the matrix realized at (relative) ``slot``."""
        if self.demand_factors is None or not self.is_active(slot):
            return demand
        return DemandMatrix(scale_counts(demand.od, self.demand_factors))

    def affected_regions(self) -> List[int]:
        if self.demand_factors is not None:
            return [int(i) for i in np.nonzero(self.demand_factors)[0]]
        if self.supply_delta is not None:
            return [int(i) for i in np.nonzero(self.supply_delta)[0]]
        return []

    def removed_total(self) -> int:
        return int(self.supply_delta.sum()) if self.supply_delta is not None else 0

    def to_record(self) -> dict:
        return {
            "kind": self.kind.value,
            "narrative": self.narrative,
            "demand_factors": None if self.demand_factors is None else self.demand_factors.tolist(),
            "supply_delta": None if self.supply_delta is None else self.supply_delta.tolist(),
            "constraint": None if self.constraint is None else self.constraint.model_dump(mode="json"),
            "magnitude_disclosed": self.magnitude_disclosed,
            "seed": self.seed,
            "from_slot": self.from_slot,
            "until_slot": self.until_slot,
        }

    def signature(self) -> str:
        """
        Digest of the scenario draw. Per-region removals are replaced by their
        total: they depend on where vehicles stand at injection time.
        """
        record = self.to_record()
        record["supply_delta"] = self.removed_total() if self.supply_delta is not None else None
        record.pop("narrative")
        return hashlib.sha256(json.dumps(record, sort_keys=True).encode("utf-8")).hexdigest()


def _select_regions(
    n: int, regions: Optional[Sequence[int]], n_affected: Optional[int], seed: int
) -> List[int]:
    if regions is not None:
        chosen = sorted({int(r) for r in regions})
        if any(not 0 <= r < n for r in chosen):
            raise ValueError(f"regions {chosen} fall outside [0, {n})")
        return chosen
    if n_affected is not None:
        if not 1 <= n_affected <= n:
            raise ValueError(f"n_affected must be in [1, {n}], got {n_affected}")
        rng = np.random.default_rng(seed)
        return sorted(int(r) for r in rng.choice(n, size=n_affected, replace=False))
    return list(range(n))


def make_rising_scenario(
    n: int,
    ratio: float,
    regions: Optional[Sequence[int]] = None,
    disclosed: bool = False,
    seed: int = 0,
    from_slot: int = 0,
    until_slot: Optional[int] = None,
    n_affected: Optional[int] = None,
    slots_per_day: Optional[int] = None,
) -> EmergentScenario:
    """
    Build a demand-surge scenario without touching any series.

    :param regions: Origin regions whose demand rises; None picks ``n_affected``
        regions by seed, or every region when that is None too.
    :param slots_per_day: When given, disclosed narratives state the clock window.
    """
    if not ratio > 0:
        raise ValueError(f"ratio must be positive, got {ratio}")
    chosen = _select_regions(n, regions, n_affected, seed)
    factors = np.zeros(n, dtype=np.float64)
    factors[chosen] = ratio

    clock_range = None
    if slots_per_day is not None and until_slot is not None:
        clock_range = (
            TimeSlot.from_index(from_slot, slots_per_day).clock(slots_per_day),
            TimeSlot.from_index(until_slot, slots_per_day).clock(slots_per_day),
        )
    narrative = rising_demand_narrative(chosen, ratio, n, disclosed, seed, clock_range)
    return EmergentScenario(
        kind=ScenarioKind.RISING_DEMAND,
        narrative=narrative,
        demand_factors=factors,
        magnitude_disclosed=disclosed,
        seed=seed,
        from_slot=from_slot,
        until_slot=until_slot,
    )


def rising_demand(
    series: DemandSeries,
    ratio: float,
    regions: Optional[Sequence[int]] = None,
    disclosed: bool = False,
    seed: int = 0,
    from_slot: int = 0,
    until_slot: Optional[int] = None,
) -> Tuple[DemandSeries, EmergentScenario]:
    """
    Scale demand leaving ``regions`` by ``1 + ratio`` (half-up rounding) over
    ``[from_slot, until_slot)`` of the series.

    :return: The perturbed series and the scenario describing it.
    """
    scenario = make_rising_scenario(
        series.n, ratio, regions, disclosed, seed, from_slot, until_slot
    )
    matrices = np.array(series.matrices, copy=True)
    stop = len(series) if until_slot is None else min(until_slot, len(series))
    for slot in range(max(from_slot, 0), stop):
        matrices[slot] = scale_counts(matrices[slot], scenario.demand_factors)
    return series.with_matrices(matrices), scenario


def removal_count(total: int, fraction: float) -> int:
    """``round(fraction * total)`` with halves rounded up."""
    return int(np.floor(fraction * total + 0.5 + _ROUNDING_SLACK))


def shrinking_supply(
    state: FleetState, fraction: float, seed: int, disclosed: bool = True
) -> Tuple[FleetState, EmergentScenario]:
    """
    Take ``round(fraction * total)`` vehicles out of service, drawn uniformly
    over all stationed vehicles.

    With a fixed seed the removed vehicles of a smaller fraction are a subset
    of those of a larger one.
    """
    if not 0 < fraction < 1:
        raise ValueError(f"fraction must be in (0, 1), got {fraction}")
    total = state.total()
    k = removal_count(total, fraction)
    rng = np.random.default_rng(seed)
    vehicles = rng.permutation(total)[:k]
    # vehicle v stands in the region whose cumulative count first exceeds v
    owners = np.searchsorted(np.cumsum(state.counts), vehicles, side="right")
    removals = np.bincount(owners, minlength=state.n).astype(np.int64)

    scenario = EmergentScenario(
        kind=ScenarioKind.SHRINKING_SUPPLY,
        narrative=shrinking_supply_narrative(removals.tolist(), disclosed),
        supply_delta=removals,
        magnitude_disclosed=disclosed,
        seed=seed,
    )
    return FleetState(state.counts - removals), scenario


def dynamic_goal(goal: GoalDescriptor, seed: int = 0) -> EmergentScenario:
    """Regulator-imposed equity goal; no demand or supply change."""
    return EmergentScenario(
        kind=ScenarioKind.DYNAMIC_GOAL,
        narrative=dynamic_goal_narrative(goal.metric.value, goal.direction.value, goal.weight),
        constraint=goal,
        magnitude_disclosed=True,
        seed=seed,
    )
