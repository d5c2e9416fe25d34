"""
The bounded self-reflection loop.

Each iteration sends the prompt (plus, after the first, a reflection
addendum with the rejected answer and its defects), parses the reply and
validates the plan against the fleet. The loop stops at the first plan with
no violations; otherwise it falls back to the initial plan, or to the zero
plan when there is none. The returned plan always passes `validate_plan`.
"""
import os
from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional, Sequence, Union

from src.adaptation.adapters import Adapter, AdapterRequest
from src.adaptation.parsing import AdapterResponse, parse_response
from src.adaptation.prompt import build_prompt, render_reflection
from src.core.config import ExperimentConfig
from src.core.domain import (
    DemandMatrix,
    FleetState,
    PlanConstraints,
    PlanViolation,
    RebalancingPlan,
    TimeSlot,
)
from src.core.plans import GoalClaim, plan_to_record, validate_plan
from src.ingest.demand import DemandStats
from src.scenario.scenarios import EmergentScenario
from src.utils import write_json
from utils.ml_logging import get_logger

logger = get_logger("rebalancing.adaptation")

DEFAULT_MAX_ITER = 10


class AdaptationOutcome(str, Enum):
    ADAPTED = "Adapted"
    FELL_BACK = "FellBack"


@dataclass(frozen=True)
class AdaptationIteration:
    index: int
    reflection: Optional[str]
    response: Optional[AdapterResponse]
    violations: List[PlanViolation] = field(default_factory=list)
    transport_error: Optional[str] = None

    @property
    def accepted(self) -> bool:
        return self.response is not None and self.response.parsed_plan is not None and not self.violations

    def problems(self) -> List[str]:
        """Everything wrong with this iteration, for the next reflection addendum."""
        if self.transport_error is not None:
            return [f"the request failed: {self.transport_error}"]
        if self.response is not None and self.response.parse_error is not None:
            return [f"the answer could not be parsed: {self.response.parse_error}"]
        return [v.describe() for v in self.violations]

    def to_record(self) -> dict:
        return {
            "index": self.index,
            "reflection": self.reflection,
            "response": None if self.response is None else self.response.to_record(),
            "violations": [v.to_record() for v in self.violations],
            "transport_error": self.transport_error,
            "accepted": self.accepted,
        }


@dataclass(frozen=True)
class AdaptationTranscript:
    prompt: str
    iterations: List[AdaptationIteration]
    outcome: AdaptationOutcome
    final_plan: RebalancingPlan
    initial_plan: Optional[RebalancingPlan]
    max_iter: int
    at: TimeSlot
    episode_slot: int = 0

    @property
    def iterations_used(self) -> int:
        return len(self.iterations)

    @property
    def adapted(self) -> bool:
        return self.outcome is AdaptationOutcome.ADAPTED

    def goal_claims(self) -> List[GoalClaim]:
        return [it.response.goal_claim for it in self.iterations if it.response and it.response.goal_claim]

    def notes(self) -> List[str]:
        return [note for it in self.iterations if it.response for note in it.response.notes]

    def to_record(self) -> dict:
        return {
            "outcome": self.outcome.value,
            "iterations_used": self.iterations_used,
            "max_iter": self.max_iter,
            "day": self.at.day,
            "slot": self.at.slot,
            "episode_slot": self.episode_slot,
            "prompt": self.prompt,
            "initial_plan": None if self.initial_plan is None else plan_to_record(self.initial_plan),
            "final_plan": plan_to_record(self.final_plan),
            "goal_claims": [c.model_dump() for c in self.goal_claims()],
            "notes": self.notes(),
            "iterations": [it.to_record() for it in self.iterations],
        }


def adapt(
    initial: Optional[RebalancingPlan],
    state: FleetState,
    predicted: Sequence[DemandMatrix],
    stats: DemandStats,
    scenario: Union[EmergentScenario, Sequence[EmergentScenario]],
    adapter: Adapter,
    max_iter: int = DEFAULT_MAX_ITER,
    *,
    cfg: Optional[ExperimentConfig] = None,
    constraints: Optional[PlanConstraints] = None,
    at: Optional[TimeSlot] = None,
    episode_slot: int = 0,
) -> AdaptationTranscript:
    """
    Ask the adapter for a plan, reflecting on defects for up to ``max_iter`` calls.

    :param initial: Baseline plan; None runs in LLM-planning mode (zero-plan fallback).
    :param state: Fleet the plan will be applied to.
    :param predicted: Predicted demand over the horizon.
    :param stats: Historical demand statistics for the prompt.
    :param scenario: Live emergent scenario(s).
    :param adapter: ``AdapterRequest -> raw text``.
    :param max_iter: Maximum adapter calls.
    :param cfg: Time grid and economics; defaults to ``ExperimentConfig(n_regions=state.n)``.
    :param constraints: Operator limits every accepted plan must respect.
    :param at: Decision time shown in the prompt.
    :param episode_slot: Slot index within the episode, forwarded to the adapter.
    :return: The transcript; ``final_plan`` is always valid against ``state``.
    """
    if max_iter < 1:
        raise ValueError(f"max_iter must be >= 1, got {max_iter}")
    scenarios = (scenario,) if isinstance(scenario, EmergentScenario) else tuple(scenario)
    cfg = cfg or ExperimentConfig(n_regions=state.n)
    constraints = constraints or PlanConstraints()
    at = at or TimeSlot(0, 0)
    total_before = state.total()

    base_prompt = build_prompt(state, predicted, stats, initial, scenarios, cfg, at, constraints).render()
    iterations: List[AdaptationIteration] = []
    reflection: Optional[str] = None

    for k in range(1, max_iter + 1):
        prompt = base_prompt if reflection is None else f"{base_prompt}\n\n{reflection}"
        request = AdapterRequest(
            prompt=prompt,
            state=state,
            initial=initial,
            predicted=tuple(predicted),
            scenarios=scenarios,
            iteration=k,
            episode_slot=episode_slot,
            constraints=constraints,
            stats=stats,
        )
        try:
            raw = adapter(request)
        except Exception as e:
            logger.error(f"Error details: adapter call {k} failed: {type(e).__name__}: {e}")
            iteration = AdaptationIteration(k, reflection, None, transport_error=f"{type(e).__name__}: {e}")
            iterations.append(iteration)
            reflection = render_reflection("(no answer received)", iteration.problems())
            continue

        response = parse_response(raw, state.n)
        violations = []
        if response.parsed_plan is not None:
            violations = validate_plan(state, response.parsed_plan, total_before, constraints)
        iteration = AdaptationIteration(k, reflection, response, violations)
        iterations.append(iteration)
        if iteration.accepted:
            logger.keyinfo(f"Adapted plan accepted at iteration {k} (day {at.day}, slot {at.slot})")
            return AdaptationTranscript(
                prompt=base_prompt,
                iterations=iterations,
                outcome=AdaptationOutcome.ADAPTED,
                final_plan=response.parsed_plan,
                initial_plan=initial,
                max_iter=max_iter,
                at=at,
                episode_slot=episode_slot,
            )
        logger.info(f"Iteration {k} rejected: {'; '.join(iteration.problems())}")
        reflection = render_reflection(raw, iteration.problems())

    fallback = RebalancingPlan.zeros(state.n)
    if initial is not None:
        if validate_plan(state, initial, total_before, constraints):
            logger.warning("Initial plan fails validation; falling back to the zero plan instead")
        else:
            fallback = initial
    logger.keyinfo(f"No valid plan after {max_iter} iteration(s); falling back (day {at.day}, slot {at.slot})")
    return AdaptationTranscript(
        prompt=base_prompt,
        iterations=iterations,
        outcome=AdaptationOutcome.FELL_BACK,
        final_plan=fallback,
        initial_plan=initial,
        max_iter=max_iter,
        at=at,
        episode_slot=episode_slot,
    )


def save_transcript(transcript: AdaptationTranscript, directory: str, stem: Optional[str] = None) -> str:
    """Write one transcript as JSON; returns the file path."""
    os.makedirs(directory, exist_ok=True)
    stem = stem or f"transcript_day{transcript.at.day:03d}_slot{transcript.at.slot:03d}"
    path = os.path.join(directory, f"{stem}.json")
    write_json(transcript.to_record(), path)
    return path


@dataclass
class AdaptationLoop:
    """
    Binds an adapter and loop settings into the callable `run_episode`
    consults at rebalancing points. With ``llm_planning`` the baseline plan
    is withheld from the prompt.
    """

    adapter: Adapter
    cfg: ExperimentConfig
    max_iter: int = DEFAULT_MAX_ITER
    llm_planning: bool = False
    constraints: Optional[PlanConstraints] = None
    transcript_dir: Optional[str] = None

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
    ) -> AdaptationTranscript:
        transcript = adapt(
            None if self.llm_planning else initial,
            state,
            predicted,
            stats,
            scenarios,
            self.adapter,
            self.max_iter,
            cfg=self.cfg,
            constraints=self.constraints,
            at=at,
            episode_slot=episode_slot,
        )
        if self.transcript_dir is not None:
            save_transcript(transcript, self.transcript_dir)
        return transcript
