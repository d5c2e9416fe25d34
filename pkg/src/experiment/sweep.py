"""
Scenario-level sweeps: one experiment per level of a scenario family.
"""
import os
from dataclasses import dataclass
from enum import Enum
from typing import Dict, List, Optional, Sequence

import pandas as pd

from src.adaptation.adapters import Adapter
from src.experiment.runner import ADAPTED, BASELINE, ExperimentResults, run_experiment
from src.experiment.spec import ExperimentSpec
from src.scenario.scenarios import EquityMetric, ScenarioKind
from src.scenario.schedule import ScenarioSpec
from src.utils import save_dataframe
from utils.ml_logging import get_logger

logger = get_logger("rebalancing.experiment")


class SweepFamily(str, Enum):
    RISING = "rising"
    SHRINKING = "shrinking"
    GOAL = "goal"


# surge ratios, removed fractions, goal weights
DEFAULT_LEVELS: Dict[SweepFamily, List[float]] = {
    SweepFamily.RISING: [0.2, 0.5, 0.8, 1.0],
    SweepFamily.SHRINKING: [0.05, 0.1, 0.15, 0.2],
    SweepFamily.GOAL: [0.25, 0.5, 0.75, 1.0],
}


def level_entry(
    family: SweepFamily,
    level: float,
    *,
    slot: int = 0,
    seed: int = 0,
    disclosed: bool = False,
    n_affected: Optional[int] = None,
    metric: EquityMetric = EquityMetric.EQUITY_VARIANCE,
) -> ScenarioSpec:
    """The single script entry a sweep injects at ``level``."""
    family = SweepFamily(family)
    if family is SweepFamily.RISING:
        params = {"ratio": level, "n_affected": n_affected}
        return ScenarioSpec(slot=slot, kind=ScenarioKind.RISING_DEMAND, params=params, disclosed=disclosed, seed=seed)
    if family is SweepFamily.SHRINKING:
        return ScenarioSpec(
            slot=slot, kind=ScenarioKind.SHRINKING_SUPPLY, params={"fraction": level}, disclosed=disclosed, seed=seed
        )
    return ScenarioSpec(
        slot=slot,
        kind=ScenarioKind.DYNAMIC_GOAL,
        params={"metric": metric.value, "weight": level},
        disclosed=True,
        seed=seed,
    )


@dataclass(frozen=True)
class SweepResults:
    family: SweepFamily
    experiments: List[ExperimentResults]
    summary: pd.DataFrame
    frame: pd.DataFrame
    csv_path: str


def _summary_row(family: SweepFamily, level: float, results: ExperimentResults) -> dict:
    row = {"family": family.value, "level": level, "failed_runs": results.failed_runs}
    arms = results.document["aggregate"]["arms"]
    for arm in (BASELINE, ADAPTED):
        for metric in ("avg_satisfaction", "equity", "revenue"):
            value = arms.get(arm, {}).get(metric, {}).get("mean")
            row[f"{arm}_{metric}"] = value
    return row


def sweep(
    spec: ExperimentSpec,
    family: SweepFamily,
    levels: Optional[Sequence[float]] = None,
    *,
    disclosed: bool = False,
    scenario_seed: int = 0,
    n_affected: Optional[int] = None,
    metric: EquityMetric = EquityMetric.EQUITY_VARIANCE,
    live_adapter: Optional[Adapter] = None,
) -> SweepResults:
    """
    Run ``spec`` once per level, replacing its scenario script with the family's entry.

    :return: Per-level experiments, a one-row-per-level summary and the combined flat table.
    """
    family = SweepFamily(family)
    levels = list(levels) if levels is not None else DEFAULT_LEVELS[family]
    experiments, rows, frames = [], [], []
    for level in levels:
        entry = level_entry(
            family, level, seed=scenario_seed, disclosed=disclosed, n_affected=n_affected, metric=metric
        )
        level_spec = ExperimentSpec.model_validate(
            {
                **spec.model_dump(),
                "script": None,
                "scenarios": [entry.model_dump()],
                "label": family.value,
                "level": level,
            }
        )
        logger.info(f"Sweep {family.value}: running level {level}")
        results = run_experiment(level_spec, live_adapter=live_adapter)
        experiments.append(results)
        rows.append(_summary_row(family, level, results))
        frames.append(results.frame)

    frame = pd.concat(frames, ignore_index=True) if frames else pd.DataFrame()
    csv_path = os.path.join(spec.output_dir, f"sweep_{family.value}.csv")
    index = 0
    while os.path.exists(csv_path):
        index += 1
        csv_path = os.path.join(spec.output_dir, f"sweep_{family.value}.{index}.csv")
    save_dataframe(frame, csv_path)
    summary = pd.DataFrame(rows)
    logger.keyinfo(f"Sweep {family.value} over {len(levels)} level(s) written to {csv_path}")
    return SweepResults(family=family, experiments=experiments, summary=summary, frame=frame, csv_path=csv_path)
