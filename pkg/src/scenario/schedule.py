"""
Scenario scripts: which emergent scenario fires at which episode slot.

A script is a list of `ScenarioSpec` entries loaded from YAML/JSON
(``[{slot, kind, params, disclosed, seed}]``). Slots count from the episode
start. `ScenarioInjector` turns entries into scenarios while an episode
runs and refuses to inject the same slot twice.
"""
from dataclasses import dataclass, field, replace
from typing import Any, Dict, Iterable, List, Optional, Set, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError

from src.core.domain import FleetState
from src.core.errors import ScheduleError
from src.scenario.scenarios import (
    EmergentScenario,
    GoalDescriptor,
    ScenarioKind,
    dynamic_goal,
    make_rising_scenario,
    shrinking_supply,
)
from src.utils import load_yaml
from utils.ml_logging import get_logger

logger = get_logger("rebalancing.scenario")


class RisingParams(BaseModel):
    model_config = ConfigDict(extra="forbid")

    ratio: float = Field(..., gt=0.0)
    regions: Optional[List[int]] = None
    n_affected: Optional[int] = Field(None, ge=1)
    duration: Optional[int] = Field(None, ge=1, description="Slots the surge lasts; open-ended when unset.")


class ShrinkingParams(BaseModel):
    model_config = ConfigDict(extra="forbid")

    fraction: float = Field(..., gt=0.0, lt=1.0)


_PARAM_MODELS = {
    ScenarioKind.RISING_DEMAND: RisingParams,
    ScenarioKind.SHRINKING_SUPPLY: ShrinkingParams,
    ScenarioKind.DYNAMIC_GOAL: GoalDescriptor,
}


class ScenarioSpec(BaseModel):
    """One script entry."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    slot: int = Field(..., ge=0)
    kind: ScenarioKind
    params: Dict[str, Any] = Field(default_factory=dict)
    disclosed: bool = False
    seed: int = 0

    def typed_params(self) -> BaseModel:
        return _PARAM_MODELS[self.kind].model_validate(self.params)

    def materialize(
        self, state: FleetState, slots_per_day: Optional[int] = None
    ) -> Tuple[FleetState, EmergentScenario]:
        """Build the scenario against the fleet standing at injection time."""
        params = self.typed_params()
        if self.kind is ScenarioKind.RISING_DEMAND:
            until = self.slot + params.duration if params.duration is not None else None
            scenario = make_rising_scenario(
                state.n,
                params.ratio,
                regions=params.regions,
                disclosed=self.disclosed,
                seed=self.seed,
                from_slot=self.slot,
                until_slot=until,
                n_affected=params.n_affected,
                slots_per_day=slots_per_day,
            )
            return state, scenario
        if self.kind is ScenarioKind.SHRINKING_SUPPLY:
            state, scenario = shrinking_supply(state, params.fraction, self.seed, disclosed=self.disclosed)
            return state, _shift_start(scenario, self.slot)
        return state, _shift_start(dynamic_goal(params, seed=self.seed), self.slot)


def _shift_start(scenario: EmergentScenario, slot: int) -> EmergentScenario:
    return replace(scenario, from_slot=slot)


@dataclass(frozen=True)
class ScenarioSchedule:
    """Immutable, slot-ordered list of script entries."""

    entries: Tuple[ScenarioSpec, ...] = ()

    def __len__(self) -> int:
        return len(self.entries)

    def __bool__(self) -> bool:
        return bool(self.entries)

    def at(self, slot: int) -> List[ScenarioSpec]:
        return [e for e in self.entries if e.slot == slot]

    def slots(self) -> List[int]:
        return sorted({e.slot for e in self.entries})

    def to_records(self) -> List[dict]:
        return [e.model_dump(mode="json") for e in self.entries]


ScriptEntry = Union[ScenarioSpec, Tuple[int, ScenarioSpec], Dict[str, Any]]


def _coerce(entry: ScriptEntry) -> ScenarioSpec:
    if isinstance(entry, ScenarioSpec):
        return entry
    if isinstance(entry, tuple):
        slot, spec = entry
        spec = spec if isinstance(spec, ScenarioSpec) else ScenarioSpec.model_validate({**spec, "slot": slot})
        return spec.model_copy(update={"slot": int(slot)}) if spec.slot != slot else spec
    return ScenarioSpec.model_validate(entry)


def scenario_script(entries: Iterable[ScriptEntry]) -> ScenarioSchedule:
    """
    Validate and freeze a script.

    :raises ScheduleError: If slots decrease, two entries share a slot and a
        kind, or an entry's params do not fit its kind.
    """
    specs: List[ScenarioSpec] = []
    for position, entry in enumerate(entries):
        try:
            spec = _coerce(entry)
            spec.typed_params()
        except ValidationError as e:
            raise ScheduleError(f"Script entry #{position} is invalid: {e}") from e
        if specs and spec.slot < specs[-1].slot:
            raise ScheduleError(
                f"Script entry #{position} at slot {spec.slot} comes after slot {specs[-1].slot}"
            )
        if any(s.slot == spec.slot and s.kind is spec.kind for s in specs):
            raise ScheduleError(
                f"Script entry #{position} repeats a {spec.kind.value} scenario at slot {spec.slot}"
            )
        specs.append(spec)
    return ScenarioSchedule(tuple(specs))


def load_script(path: str) -> ScenarioSchedule:
    """Load a script file: a list of entries, or a mapping with a ``scenarios`` list."""
    raw = load_yaml(path)
    entries = raw.get("scenarios", []) if isinstance(raw, dict) else (raw or [])
    schedule = scenario_script(entries)
    logger.info(f"Loaded scenario script with {len(schedule)} entries from {path}")
    return schedule


@dataclass
class ScenarioInjector:
    """Per-episode cursor over a schedule; each slot may be injected once."""

    schedule: ScenarioSchedule
    slots_per_day: Optional[int] = None
    injected: Set[int] = field(default_factory=set)

    def inject(self, slot: int, state: FleetState) -> Tuple[FleetState, List[EmergentScenario]]:
        """
        Fire the entries scheduled at ``slot``.

        :return: The fleet after supply changes and the scenarios that fired.
        :raises ScheduleError: If ``slot`` was already injected.
        """
        if slot in self.injected:
            raise ScheduleError(f"Scenarios at slot {slot} were already injected")
        self.injected.add(slot)
        fired: List[EmergentScenario] = []
        for spec in self.schedule.at(slot):
            state, scenario = spec.materialize(state, self.slots_per_day)
            logger.info(
                f"Injected {scenario.kind.value} at slot {slot} "
                f"(disclosed={scenario.magnitude_disclosed}, regions={scenario.affected_regions()})"
            )
            fired.append(scenario)
        return state, fired
