"""
`spec.py` defines the experiment file: world, policy, adapter, scenario
script and repetitions. Relative paths inside a spec file are resolved
against the file's directory.
"""
import os
from enum import Enum
from typing import Any, Dict, List, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from src.adaptation.adapters import MOCK_NAMES
from src.adaptation.llm import LlmAdapterConfig
from src.core.config import ExperimentConfig
from src.core.domain import PlanConstraints
from src.core.errors import ExperimentSpecError, ScheduleError
from src.rebalancer.ga import GAConfig
from src.rebalancer.policies import RebalancerKind
from src.scenario.schedule import ScenarioSchedule, ScenarioSpec, load_script, scenario_script
from src.utils import load_yaml
from utils.ml_logging import get_logger

logger = get_logger("rebalancing.experiment")


class DataSource(str, Enum):
    SYNTHETIC = "synthetic"
    CSV = "csv"


class SyntheticData(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    intensity: float = Field(0.5, gt=0.0, description="Mean trips per OD entry per slot.")
    seed: Optional[int] = Field(None, ge=0, description="Fixed demand seed; defaults to the repetition seed.")


class CsvData(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    path: str
    settings: Optional[str] = Field(None, description="Ingest settings YAML; the packaged default when unset.")


class DataSpec(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    source: DataSource = DataSource.SYNTHETIC
    synthetic: SyntheticData = SyntheticData()
    csv: Optional[CsvData] = None

    @model_validator(mode="after")
    def _csv_given(self) -> "DataSpec":
        if self.source is DataSource.CSV and self.csv is None:
            raise ValueError("data.source is csv but data.csv is missing")
        return self


class AdapterKind(str, Enum):
    NONE = "none"
    MOCK = "mock"
    LLM = "llm"


class AdapterSettings(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    kind: AdapterKind = AdapterKind.NONE
    mock: str = "shortage_repair"
    fault_rate: float = Field(0.85, ge=0.0, le=1.0, description="Corruption probability of the faulty mock.")
    llm: LlmAdapterConfig = LlmAdapterConfig()
    max_iter: int = Field(10, ge=1)
    llm_planning: bool = Field(False, description="Withhold the baseline plan from the prompt.")
    save_transcripts: bool = True

    @model_validator(mode="after")
    def _known_mock(self) -> "AdapterSettings":
        if self.kind is AdapterKind.MOCK and self.mock not in MOCK_NAMES:
            raise ValueError(f"unknown mock adapter {self.mock!r}; expected one of {', '.join(MOCK_NAMES)}")
        return self

    @classmethod
    def from_name(cls, name: str, base: Optional["AdapterSettings"] = None) -> "AdapterSettings":
        """Settings for a CLI ``--adapter`` value: ``none``, ``llm`` or a mock name."""
        base = base or cls()
        if name == AdapterKind.NONE.value:
            return base.model_copy(update={"kind": AdapterKind.NONE})
        if name == AdapterKind.LLM.value:
            return base.model_copy(update={"kind": AdapterKind.LLM})
        return cls.model_validate({**base.model_dump(), "kind": AdapterKind.MOCK, "mock": name})


class ConstraintSettings(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    max_total_moves: Optional[int] = Field(None, ge=0)
    blocked_regions: List[int] = Field(default_factory=list)

    def build(self) -> PlanConstraints:
        return PlanConstraints.build(self.max_total_moves, self.blocked_regions)


class ExperimentSpec(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    name: str = "experiment"
    config: ExperimentConfig
    data: DataSpec = DataSpec()
    rebalancer: RebalancerKind = RebalancerKind.GREEDY
    ga: GAConfig = GAConfig()
    adapter: AdapterSettings = AdapterSettings()
    constraints: ConstraintSettings = ConstraintSettings()
    script: Optional[str] = Field(None, description="Scenario script file.")
    scenarios: List[ScenarioSpec] = Field(default_factory=list, description="Inline scenario script.")
    repetitions: int = Field(1, ge=1)
    output_dir: str = "results"
    max_workers: int = Field(1, ge=1)
    label: Optional[str] = Field(None, description="Scenario family reported in the flat results table.")
    level: Optional[float] = Field(None, description="Scenario level reported in the flat results table.")

    @model_validator(mode="after")
    def _paths_exist(self) -> "ExperimentSpec":
        if self.script is not None and self.scenarios:
            raise ValueError("give either script or scenarios, not both")
        if self.script is not None and not os.path.exists(self.script):
            raise ValueError(f"scenario script {self.script} does not exist")
        if self.data.source is DataSource.CSV and not os.path.exists(self.data.csv.path):
            raise ValueError(f"trip file {self.data.csv.path} does not exist")
        if self.data.csv is not None and self.data.csv.settings and not os.path.exists(self.data.csv.settings):
            raise ValueError(f"ingest settings {self.data.csv.settings} do not exist")
        return self

    def schedule(self) -> ScenarioSchedule:
        if self.script is not None:
            return load_script(self.script)
        return scenario_script(self.scenarios)

    def seeds(self) -> List[int]:
        """Repetition seeds: base seed + index."""
        return [self.config.rng_seed + i for i in range(self.repetitions)]


def _resolve(base_dir: str, path: Optional[str]) -> Optional[str]:
    if path is None or os.path.isabs(path):
        return path
    return os.path.normpath(os.path.join(base_dir, path))


def _resolve_paths(raw: Dict[str, Any], base_dir: str) -> Dict[str, Any]:
    raw = dict(raw)
    if "script" in raw:
        raw["script"] = _resolve(base_dir, raw["script"])
    csv = (raw.get("data") or {}).get("csv")
    if isinstance(csv, dict):
        csv = {**csv, "path": _resolve(base_dir, csv.get("path"))}
        if csv.get("settings"):
            csv["settings"] = _resolve(base_dir, csv["settings"])
        raw["data"] = {**raw["data"], "csv": csv}
    return raw


def load_spec(path: str) -> ExperimentSpec:
    """
    Load and validate an experiment file.

    :raises ExperimentSpecError: If the file is missing or invalid, or a referenced path does not exist.
    """
    try:
        raw = load_yaml(path)
    except FileNotFoundError as e:
        raise ExperimentSpecError(str(e)) from e
    if not isinstance(raw, dict):
        raise ExperimentSpecError(f"Experiment spec {path} must be a mapping")
    raw = _resolve_paths(raw, os.path.dirname(os.path.abspath(path)))
    try:
        spec = ExperimentSpec.model_validate(raw)
        spec.schedule()
    except (ValidationError, ScheduleError) as e:
        logger.error(f"Error details: invalid experiment spec {path}: {e}")
        raise ExperimentSpecError(f"Invalid experiment spec {path}: {e}") from e
    return spec
