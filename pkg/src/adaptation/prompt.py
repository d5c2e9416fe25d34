"""
Prompt construction for the adaptation agent.

Sections are rendered from the Jinja2 templates in ``prompts/`` and joined
in a fixed order under ``## <title>`` headers. Rendering depends only on its
inputs, so identical inputs give byte-identical prompts.
"""
import os
from dataclasses import dataclass, fields
from functools import lru_cache
from typing import Iterable, List, Optional, Sequence, Union

import numpy as np
from jinja2 import Environment, FileSystemLoader, StrictUndefined

from src.core.config import ExperimentConfig
from src.core.domain import (
    DemandMatrix,
    FleetState,
    PlanConstraints,
    PlanViolation,
    RebalancingPlan,
    TimeSlot,
)
from src.core.plans import plan_to_moves
from src.ingest.demand import DemandStats
from src.scenario.scenarios import EmergentScenario

PROMPTS_DIR = os.path.join(os.path.dirname(os.path.abspath(__file__)), "prompts")

SECTION_TITLES = {
    "background": "Background",
    "system_status": "System Status",
    "initial_strategy": "Initial Rebalancing Strategy",
    "emergent_situation": "Emergent Situation",
    "instruction": "Instruction",
    "constraint": "Constraint",
    "output_schema": "Output Format",
}


@lru_cache(maxsize=None)
def _environment(directory: str = PROMPTS_DIR) -> Environment:
    return Environment(
        loader=FileSystemLoader(directory),
        undefined=StrictUndefined,
        trim_blocks=True,
        lstrip_blocks=True,
        autoescape=False,
    )


def render_section(name: str, **values) -> str:
    return _environment().get_template(f"{name}.jinja2").render(**values).strip()


@dataclass(frozen=True)
class PromptBundle:
    background: str
    system_status: str
    initial_strategy: Optional[str]
    emergent_situation: str
    instruction: str
    constraint: str
    output_schema: str

    def sections(self) -> List[str]:
        """Titles of the sections present, in rendering order."""
        return [SECTION_TITLES[f.name] for f in fields(self) if getattr(self, f.name) is not None]

    def render(self) -> str:
        parts = []
        for f in fields(self):
            text = getattr(self, f.name)
            if text is not None:
                parts.append(f"## {SECTION_TITLES[f.name]}\n{text}")
        return "\n\n".join(parts)


def format_fleet(counts: Iterable[int]) -> str:
    """``[12, 5, 8, 3]``"""
    return "[" + ", ".join(str(int(c)) for c in counts) + "]"


def format_flows(predicted: Sequence[DemandMatrix], n: int) -> List[str]:
    """Horizon-summed OD flows as ``Region i → j: k`` lines, ordered by (i, j)."""
    total = np.zeros((n, n), dtype=np.int64)
    for matrix in predicted:
        total += matrix.od
    return [f"Region {int(i)} → {int(j)}: {int(c)}" for (i, j), c in np.ndenumerate(total) if c > 0]


def format_stats(stats: DemandStats) -> List[str]:
    return [
        f"Region {i}: avg: {stats.avg[i]:.1f}, std: {stats.std[i]:.1f}, "
        f"min: {int(stats.min[i])}, max: {int(stats.max[i])}"
        for i in range(stats.n)
    ]


def format_moves(plan: RebalancingPlan) -> List[str]:
    return [
        f"Move {count} {'vehicle' if count == 1 else 'vehicles'} from Region {src} to {dst}"
        for src, dst, count in plan_to_moves(plan)
    ]


def build_prompt(
    state: FleetState,
    predicted: Sequence[DemandMatrix],
    stats: DemandStats,
    initial: Optional[RebalancingPlan],
    scenario: Union[EmergentScenario, Sequence[EmergentScenario]],
    cfg: ExperimentConfig,
    at: Optional[TimeSlot] = None,
    constraints: Optional[PlanConstraints] = None,
) -> PromptBundle:
    """
    Assemble the prompt sections for one adaptation call.

    :param state: Fleet the plan will be applied to.
    :param predicted: Predicted OD matrices over the horizon.
    :param stats: Historical per-region outbound statistics.
    :param initial: Baseline plan; None omits the initial-strategy section.
    :param scenario: The live emergent scenario(s).
    :param cfg: Time grid and economics.
    :param at: Decision time; defaults to day 0, slot 0.
    :param constraints: Operator limits stated alongside conservation.
    :raises ValueError: If the inputs disagree on the number of regions.
    """
    n = state.n
    if stats.n != n or any(m.n != n for m in predicted):
        raise ValueError(f"Prompt inputs disagree on the region count (fleet has {n})")
    if initial is not None and initial.moves.shape != (n, n):
        raise ValueError(f"Initial plan has shape {initial.moves.shape}, expected ({n}, {n})")
    scenarios = [scenario] if isinstance(scenario, EmergentScenario) else list(scenario)
    at = at or TimeSlot(0, 0)
    per_day = cfg.slots_per_day
    constraints = constraints or PlanConstraints()

    return PromptBundle(
        background=render_section(
            "background",
            n_regions=n,
            slots_per_day=per_day,
            slot_minutes=cfg.slot_minutes,
            period_slots=cfg.rebalance_period,
            fare=f"{cfg.fare_per_trip:g}",
            move_cost=f"{cfg.move_cost:g}",
        ),
        system_status=render_section(
            "system_status",
            day=at.day,
            clock=at.clock(per_day),
            slot=at.slot,
            slots_per_day=per_day,
            fleet=format_fleet(state.counts),
            total=state.total(),
            horizon=len(predicted),
            flows=format_flows(predicted, n),
            stats=format_stats(stats),
        ),
        initial_strategy=(
            None if initial is None else render_section("initial_strategy", moves=format_moves(initial))
        ),
        emergent_situation=render_section("emergent_situation", narratives=[s.narrative for s in scenarios]),
        instruction=render_section("instruction"),
        constraint=render_section(
            "constraint",
            total=state.total(),
            n_regions=n,
            max_total_moves=constraints.max_total_moves,
            blocked_regions=sorted(constraints.blocked_regions),
        ),
        output_schema=render_section("output_schema"),
    )


def render_reflection(previous: str, problems: Sequence[Union[PlanViolation, str]]) -> str:
    """Addendum for the next iteration: the rejected answer and every reason it failed."""
    lines = [p.describe() if isinstance(p, PlanViolation) else str(p) for p in problems]
    return render_section("reflection", previous=previous.strip() or "(empty response)", problems=lines)
