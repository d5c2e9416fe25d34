"""
Experiment-wide configuration shared by the simulator, rebalancers and runner.
"""
from enum import Enum

from pydantic import BaseModel, ConfigDict, Field, model_validator


class PredictorMode(str, Enum):
    """Demand predictors fed to the policies. Both are stand-ins for a learned forecaster."""

    HISTORICAL_AVERAGE = "historical_average"
    PERFECT_FORESIGHT = "perfect_foresight"


class InitialDistribution(str, Enum):
    UNIFORM = "uniform"
    DEMAND = "demand"


class ExperimentConfig(BaseModel):
    """
    Time grid, economics and seeding of one experiment.

    ``horizon`` (h) defaults to one rebalancing period.
    """

    model_config = ConfigDict(frozen=True, extra="forbid", use_enum_values=False)

    n_regions: int = Field(..., ge=1, description="Number of regions N.")
    slots_per_day: int = Field(24, ge=1, description="Slots per day T.")
    rebalance_period: int = Field(12, ge=1, description="Slots between rebalancing decisions.")
    horizon: int = Field(12, ge=1, description="Slots of predicted demand fed to policies (h).")
    fare_per_trip: float = Field(1.0, ge=0.0)
    move_cost: float = Field(0.1, ge=0.0)
    rng_seed: int = Field(0, ge=0, lt=2**64)

    fleet_size: int = Field(300, ge=0, description="Vehicles placed at the start of an episode.")
    initial_distribution: InitialDistribution = InitialDistribution.DEMAND
    training_days: int = Field(7, ge=0, description="Days of history before the episode.")
    episode_days: int = Field(1, ge=1)
    predictor: PredictorMode = PredictorMode.HISTORICAL_AVERAGE

    @model_validator(mode="after")
    def _period_divides_day(self) -> "ExperimentConfig":
        if self.slots_per_day % self.rebalance_period != 0:
            raise ValueError(
                f"rebalance_period ({self.rebalance_period}) must divide slots_per_day ({self.slots_per_day})"
            )
        return self

    @property
    def slot_minutes(self) -> int:
        return (24 * 60) // self.slots_per_day

    @property
    def episode_slots(self) -> int:
        return self.episode_days * self.slots_per_day

    def with_seed(self, seed: int) -> "ExperimentConfig":
        return self.model_copy(update={"rng_seed": seed})
