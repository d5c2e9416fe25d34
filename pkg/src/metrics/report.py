"""
Episode-level evaluation: satisfaction, equity indices and revenue.

Supply and demand are aggregated over the whole episode before ratios are
formed: supply is the slot-start fleet summed over slots, demand the
outbound requests summed over slots.
"""
from dataclasses import dataclass, field
from typing import Dict, List, NamedTuple, Optional

import numpy as np

from src.metrics.indices import (
    demand_supply_ratios,
    equity_variance,
    gini,
    has_zero_entries,
    theil,
)
from src.simulator.episode import EpisodeResult


class SatisfactionRate(NamedTuple):
    avg: float
    per_region: np.ndarray
    zero_demand: bool


def satisfaction_rate(result: EpisodeResult) -> SatisfactionRate:
    """
    Unweighted mean of per-region served/requested fractions.

    Regions without demand are NaN in ``per_region`` and left out of the
    mean. With no demand anywhere the average is 1.0 and ``zero_demand`` is set.
    """
    satisfied = result.satisfied_by_region().astype(np.float64)
    demand = result.demand_by_region().astype(np.float64)
    per_region = np.full(demand.shape, np.nan)
    has_demand = demand > 0
    per_region[has_demand] = satisfied[has_demand] / demand[has_demand]
    if not has_demand.any():
        return SatisfactionRate(1.0, per_region, True)
    return SatisfactionRate(float(per_region[has_demand].mean()), per_region, False)


@dataclass(frozen=True)
class MetricsReport:
    avg_satisfaction: float
    equity: float
    gini: float
    theil: float
    revenue: float
    per_region_satisfaction: List[Optional[float]]
    moves: int
    total_satisfied: int
    total_demand: int
    flags: Dict[str, bool] = field(default_factory=dict)

    def to_record(self) -> dict:
        return {
            "avg_satisfaction": self.avg_satisfaction,
            "equity": self.equity,
            "gini": self.gini,
            "theil": self.theil,
            "revenue": self.revenue,
            "per_region_satisfaction": list(self.per_region_satisfaction),
            "moves": self.moves,
            "total_satisfied": self.total_satisfied,
            "total_demand": self.total_demand,
            "flags": dict(sorted(self.flags.items())),
        }

    def scalars(self) -> Dict[str, float]:
        """Headline numbers, the rows of the flat results table."""
        return {
            "avg_satisfaction": self.avg_satisfaction,
            "equity": self.equity,
            "gini": self.gini,
            "theil": self.theil,
            "revenue": self.revenue,
            "moves": float(self.moves),
        }


def compute_metrics(result: EpisodeResult) -> MetricsReport:
    rate = satisfaction_rate(result)
    supply = result.supply_by_region()
    demand = result.demand_by_region()
    ratios = demand_supply_ratios(supply, demand)

    zero_supply = int(supply.sum()) == 0
    equity = 0.0 if zero_supply else equity_variance(supply, demand)
    flags = {
        "zero_demand": rate.zero_demand,
        "zero_supply": zero_supply,
        "gini_all_zero": not ratios.any(),
        "theil_zero_substituted": has_zero_entries(ratios),
    }
    return MetricsReport(
        avg_satisfaction=rate.avg,
        equity=equity,
        gini=gini(ratios),
        theil=theil(ratios),
        revenue=result.revenue,
        per_region_satisfaction=[None if np.isnan(v) else float(v) for v in rate.per_region],
        moves=result.moves_executed,
        total_satisfied=result.total_satisfied,
        total_demand=result.total_demand,
        flags=flags,
    )
