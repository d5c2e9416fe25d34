"""
Plan validity, application and the move-list record format.

`validate_plan` reports every defect it finds, so the reflection prompt can
hand the model a complete defect list in one round trip.
"""
import json
from typing import Iterable, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from src.core.domain import (
    FleetState,
    PlanConstraints,
    PlanViolation,
    RebalancingPlan,
    ViolationKind,
)
from src.core.errors import PlanValidationError, StructuralError

Move = Tuple[int, int, int]

_MAX_COUNT = 2**40


def validate_plan(
    state: FleetState,
    plan: RebalancingPlan,
    total_before: Optional[int] = None,
    constraints: Optional[PlanConstraints] = None,
) -> List[PlanViolation]:
    """
    Check a plan against the fleet it will be applied to.

    :param state: Fleet the plan draws from.
    :param plan: Candidate plan.
    :param total_before: Vehicle total the plan must conserve; defaults to ``state.total()``.
    :param constraints: Optional operator limits (move budget, blocked regions).
    :return: All violations found, in a stable order; empty when the plan is valid.
    """
    n = state.n
    total_before = state.total() if total_before is None else int(total_before)
    violations: List[PlanViolation] = []

    moves = plan.moves
    if moves.ndim != 2 or moves.shape != (n, n):
        violations.append(
            PlanViolation(
                ViolationKind.MALFORMED_SHAPE,
                f"plan shape {tuple(moves.shape)} does not match {n}x{n} regions",
            )
        )
        return violations

    for i, j in zip(*np.nonzero(moves < 0)):
        violations.append(
            PlanViolation(
                ViolationKind.NEGATIVE_ENTRY,
                f"move {int(i)}->{int(j)} has negative count {int(moves[i, j])}",
                (int(i), int(j)),
            )
        )

    positive = np.where(moves > 0, moves, 0)
    outflow = positive.sum(axis=1)
    for i in np.nonzero(outflow > state.counts)[0]:
        row = positive[i]
        # report at the largest move out of the overdrawn source
        j = int(np.argmax(row))
        violations.append(
            PlanViolation(
                ViolationKind.SOURCE_OVERDRAW,
                f"region {int(i)} ships {int(outflow[i])} vehicles but holds {state[int(i)]}",
                (int(i), j),
            )
        )

    after_total = int(state.counts.sum() - moves.sum(axis=1).sum() + moves.sum(axis=0).sum())
    if after_total != total_before:
        violations.append(
            PlanViolation(
                ViolationKind.CONSERVATION_BREAK,
                f"fleet total after the plan is {after_total}, expected {total_before}",
            )
        )

    if constraints is not None and not constraints.is_empty():
        if constraints.max_total_moves is not None and int(positive.sum()) > constraints.max_total_moves:
            violations.append(
                PlanViolation(
                    ViolationKind.CONSTRAINT_BREACH,
                    f"plan relocates {int(positive.sum())} vehicles, budget is {constraints.max_total_moves}",
                )
            )
        for region in sorted(constraints.blocked_regions):
            if region >= n:
                continue
            for j in np.nonzero(positive[region])[0]:
                violations.append(
                    PlanViolation(
                        ViolationKind.CONSTRAINT_BREACH,
                        f"blocked region {region} sends vehicles to {int(j)}",
                        (region, int(j)),
                    )
                )
            for i in np.nonzero(positive[:, region])[0]:
                violations.append(
                    PlanViolation(
                        ViolationKind.CONSTRAINT_BREACH,
                        f"blocked region {region} receives vehicles from {int(i)}",
                        (int(i), region),
                    )
                )
    return violations


def apply_plan(
    state: FleetState,
    plan: RebalancingPlan,
    constraints: Optional[PlanConstraints] = None,
) -> FleetState:
    """
    Execute a plan: ``result[j] = state[j] - outflow[j] + inflow[j]``.

    :raises PlanValidationError: If the plan fails `validate_plan`.
    """
    violations = validate_plan(state, plan, state.total(), constraints)
    if violations:
        raise PlanValidationError(violations)
    return FleetState(state.counts - plan.outflow() + plan.inflow())


def plan_from_moves(moves: Iterable[Move], n: int) -> RebalancingPlan:
    """
    Build a plan from ``(from, to, count)`` triples.

    Duplicate pairs accumulate; self-moves are dropped.

    :raises StructuralError: On an out-of-range index or a negative or oversized count.
    """
    matrix = np.zeros((n, n), dtype=np.int64)
    for position, move in enumerate(moves):
        src, dst, count = (int(x) for x in move)
        if not (0 <= src < n and 0 <= dst < n):
            raise StructuralError(
                f"move #{position} ({src}->{dst}:{count}) references a region outside [0, {n})"
            )
        if count < 0:
            raise StructuralError(f"move #{position} ({src}->{dst}:{count}) has a negative count")
        if count > _MAX_COUNT:
            raise StructuralError(f"move #{position} ({src}->{dst}:{count}) exceeds any fleet size")
        if src != dst:
            matrix[src, dst] += count
    return RebalancingPlan(matrix)


def plan_to_moves(plan: RebalancingPlan) -> List[Move]:
    """Non-zero off-diagonal entries as ``(from, to, count)``, ordered by (from, to)."""
    return [(int(i), int(j), int(c)) for (i, j), c in np.ndenumerate(plan.moves) if c != 0 and i != j]


class MoveRecord(BaseModel):
    """One entry of the move-list record; ``from`` is aliased since it is a keyword."""

    model_config = ConfigDict(populate_by_name=True, extra="forbid")

    from_region: int = Field(..., alias="from")
    to: int
    count: int


class GoalClaim(BaseModel):
    before: Optional[float] = None
    after: Optional[float] = None


class PlanRecord(BaseModel):
    """Structured-text form of a plan: ``{"moves": [{"from", "to", "count"}]}``."""

    model_config = ConfigDict(extra="ignore")

    moves: List[MoveRecord]
    goal: Optional[GoalClaim] = None


def plan_to_record(plan: RebalancingPlan) -> dict:
    return {"moves": [{"from": i, "to": j, "count": c} for i, j, c in plan_to_moves(plan)]}


def plan_from_record(record: dict, n: int) -> RebalancingPlan:
    parsed = PlanRecord.model_validate(record)
    return plan_from_moves(((m.from_region, m.to, m.count) for m in parsed.moves), n)


def plan_to_json(plan: RebalancingPlan) -> str:
    return json.dumps(plan_to_record(plan))
