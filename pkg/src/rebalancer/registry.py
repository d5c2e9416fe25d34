from typing import List, Optional, Union

from src.core.domain import DemandMatrix, FleetState, RebalancingPlan
from src.rebalancer.ga import GAConfig, GeneticRebalancer
from src.rebalancer.policies import (
    Rebalancer,
    RebalancerKind,
    greedy_rebalance,
    null_rebalance,
    sdsm_rebalance,
)

_POLICIES = {
    RebalancerKind.NULL: null_rebalance,
    RebalancerKind.SDSM: sdsm_rebalance,
    RebalancerKind.GREEDY: greedy_rebalance,
}


def build_rebalancer(kind: Union[RebalancerKind, str], ga_cfg: Optional[GAConfig] = None) -> Rebalancer:
    """Resolve a policy name to its ``(state, predicted) -> plan`` callable."""
    kind = RebalancerKind(kind)
    if kind is RebalancerKind.GA:
        return GeneticRebalancer(ga_cfg)
    return _POLICIES[kind]


def rebalance(
    kind: Union[RebalancerKind, str],
    state: FleetState,
    predicted: List[DemandMatrix],
    ga_cfg: Optional[GAConfig] = None,
) -> RebalancingPlan:
    return build_rebalancer(kind, ga_cfg)(state, predicted)
