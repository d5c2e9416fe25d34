"""
Batch runner: paired baseline/adapted arms per repetition seed.

Both arms of a repetition share the world (demand, initial fleet, predictor)
and the scenario script, so their trace digests must match. Results are
written once per call to a fresh ``results[.k].json`` plus a flat CSV of
``(scenario, level, arm, seed, metric, value)`` rows.
"""
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
import pandas as pd

from src.adaptation.adapters import Adapter, build_mock
from src.adaptation.llm import ChatCompletionAdapter
from src.adaptation.loop import AdaptationLoop, AdaptationTranscript
from src.core.config import ExperimentConfig
from src.core.domain import FleetState
from src.core.errors import ExperimentSpecError, RebalancingError
from src.experiment.spec import AdapterKind, DataSource, ExperimentSpec
from src.ingest.demand import DemandStats, Predictor, build_demand_series, compute_stats, make_predictor
from src.ingest.series import DemandSeries
from src.ingest.synthetic import generate_synthetic
from src.ingest.trips import IngestSettings, load_trips
from src.metrics.report import MetricsReport, compute_metrics
from src.rebalancer.registry import build_rebalancer
from src.scenario.schedule import ScenarioSchedule
from src.simulator.episode import EpisodeResult, initial_fleet, run_episode
from src.utils import save_dataframe, write_json
from utils.ml_logging import get_logger, log_function_call

logger = get_logger("rebalancing.experiment")

BASELINE, ADAPTED = "baseline", "adapted"
RESULT_COLUMNS = ["scenario", "level", "arm", "seed", "metric", "value"]


@dataclass(frozen=True)
class World:
    """Everything a repetition's arms share."""

    series: DemandSeries
    start_slot: int
    episode_day: int
    initial: FleetState
    stats: DemandStats
    predictor: Predictor


@lru_cache(maxsize=4)
def _csv_series(path: str, settings_path: Optional[str], cfg: ExperimentConfig) -> DemandSeries:
    settings = IngestSettings.from_yaml(settings_path) if settings_path else None
    return build_demand_series(load_trips(path, settings), cfg)


def build_world(spec: ExperimentSpec, seed: int) -> World:
    """
    Demand, initial fleet and predictor for one repetition.

    Synthetic data is generated for ``training_days + episode_days`` days
    with the episode at the end. CSV data is ingested once and the episode
    day is drawn by ``seed`` among the days that leave a full training window.

    :raises ExperimentSpecError: If the CSV data is too short for the requested window.
    """
    cfg = spec.config.with_seed(seed)
    per_day, training = cfg.slots_per_day, cfg.training_days
    if spec.data.source is DataSource.SYNTHETIC:
        params = spec.data.synthetic
        n_days = training + cfg.episode_days
        series = generate_synthetic(
            cfg.n_regions,
            n_days * per_day,
            params.intensity,
            params.seed if params.seed is not None else seed,
            per_day,
        )
        episode_day = training
    else:
        series = _csv_series(spec.data.csv.path, spec.data.csv.settings, spec.config)
        candidates = list(range(training, series.n_days - cfg.episode_days + 1))
        if not candidates:
            raise ExperimentSpecError(
                f"{series.n_days} day(s) of trips cannot cover {training} training + {cfg.episode_days} episode day(s)"
            )
        episode_day = candidates[int(np.random.default_rng(seed).integers(len(candidates)))]

    start_slot = episode_day * per_day
    history = series.window((episode_day - training) * per_day, training * per_day) if training else None
    stats_source = history if history is not None and len(history) else series.window(start_slot, cfg.episode_slots)
    return World(
        series=series,
        start_slot=start_slot,
        episode_day=episode_day,
        initial=initial_fleet(cfg, history),
        stats=compute_stats(stats_source),
        predictor=make_predictor(series, cfg.predictor, (episode_day - training, episode_day)),
    )


def _build_adapter(spec: ExperimentSpec, seed: int, live: Optional[Adapter]) -> Optional[Adapter]:
    settings = spec.adapter
    if settings.kind is AdapterKind.NONE:
        return None
    if settings.kind is AdapterKind.LLM:
        return live
    return build_mock(settings.mock, settings.fault_rate, seed)


def _adaptation_summary(transcripts: List[AdaptationTranscript]) -> Dict[str, int]:
    return {
        "calls": len(transcripts),
        "adapted": sum(t.adapted for t in transcripts),
        "fell_back": sum(not t.adapted for t in transcripts),
        "iterations": sum(t.iterations_used for t in transcripts),
    }


def _arm_record(result: EpisodeResult, report: MetricsReport) -> Dict[str, Any]:
    record = {"metrics": report.to_record(), "episode": result.to_record()}
    if result.transcripts:
        record["adaptation"] = _adaptation_summary(result.transcripts)
    return record


def run_repetition(
    spec: ExperimentSpec,
    seed: int,
    schedule: ScenarioSchedule,
    live_adapter: Optional[Adapter] = None,
    transcript_dir: Optional[str] = None,
) -> Dict[str, Any]:
    """
    Run both arms for one seed. Failures are caught and reported in the record.

    :return: ``{"seed", "episode_day", "status", "error", "arms", "trace_match"}``.
    """
    record: Dict[str, Any] = {"seed": seed, "episode_day": None, "status": "ok", "error": None, "arms": {}}
    cfg = spec.config.with_seed(seed)
    constraints = spec.constraints.build()
    try:
        world = build_world(spec, seed)
        record["episode_day"] = world.episode_day
        arms: List[Tuple[str, Optional[AdaptationLoop]]] = [(BASELINE, None)]
        adapter = _build_adapter(spec, seed, live_adapter)
        if adapter is not None:
            loop = AdaptationLoop(
                adapter=adapter,
                cfg=cfg,
                max_iter=spec.adapter.max_iter,
                llm_planning=spec.adapter.llm_planning,
                constraints=None if constraints.is_empty() else constraints,
                transcript_dir=transcript_dir if spec.adapter.save_transcripts else None,
            )
            arms.append((ADAPTED, loop))

        digests = []
        for arm, loop in arms:
            result = run_episode(
                world.initial,
                world.series,
                build_rebalancer(spec.rebalancer, spec.ga),
                cfg,
                adapter=loop,
                scenario=schedule,
                start_slot=world.start_slot,
                n_slots=cfg.episode_slots,
                predictor=world.predictor,
                stats=world.stats,
            )
            record["arms"][arm] = _arm_record(result, compute_metrics(result))
            digests.append(result.trace_digest)
        record["trace_match"] = len(set(digests)) == 1
        if not record["trace_match"]:
            raise RebalancingError(f"Paired arms of seed {seed} observed different demand or scenario draws")
    except (RebalancingError, ValueError) as e:
        logger.error(f"Error details: repetition with seed {seed} failed: {e}")
        record["status"] = "failed"
        record["error"] = f"{type(e).__name__}: {e}"
    return record


def aggregate(runs: List[Dict[str, Any]]) -> Dict[str, Any]:
    """Mean and population std per arm and metric over successful runs."""
    ok = [r for r in runs if r["status"] == "ok"]
    summary: Dict[str, Any] = {"completed_runs": len(ok), "failed_runs": len(runs) - len(ok), "arms": {}}
    arm_names = sorted({arm for r in ok for arm in r["arms"]})
    for arm in arm_names:
        metrics: Dict[str, Dict[str, float]] = {}
        for name in ("avg_satisfaction", "equity", "gini", "theil", "revenue", "moves"):
            values = np.array([float(r["arms"][arm]["metrics"][name]) for r in ok if arm in r["arms"]])
            metrics[name] = {"mean": float(values.mean()), "std": float(values.std(ddof=0))}
        summary["arms"][arm] = metrics
    return summary


def results_frame(runs: List[Dict[str, Any]], scenario: str, level: Optional[float]) -> pd.DataFrame:
    rows = []
    for run in runs:
        if run["status"] != "ok":
            continue
        for arm, arm_record in sorted(run["arms"].items()):
            metrics = arm_record["metrics"]
            for name in ("avg_satisfaction", "equity", "gini", "theil", "revenue", "moves"):
                rows.append([scenario, level, arm, run["seed"], name, float(metrics[name])])
    return pd.DataFrame(rows, columns=RESULT_COLUMNS)


def next_results_path(directory: str, stem: str = "results") -> str:
    """First of ``stem.json``, ``stem.1.json``, ... that does not exist yet."""
    path = os.path.join(directory, f"{stem}.json")
    index = 0
    while os.path.exists(path):
        index += 1
        path = os.path.join(directory, f"{stem}.{index}.json")
    return path


def scenario_label(spec: ExperimentSpec, schedule: ScenarioSchedule) -> str:
    if spec.label is not None:
        return spec.label
    kinds = sorted({e.kind.value for e in schedule.entries})
    return "+".join(kinds) if kinds else "none"


@dataclass(frozen=True)
class ExperimentResults:
    document: Dict[str, Any]
    frame: pd.DataFrame
    path: str
    csv_path: str

    @property
    def failed_runs(self) -> int:
        return self.document["aggregate"]["failed_runs"]


@log_function_call("rebalancing.experiment")
def run_experiment(spec: ExperimentSpec, live_adapter: Optional[Adapter] = None) -> ExperimentResults:
    """
    Run every repetition of ``spec`` and write the results document and CSV.

    :param spec: Validated experiment.
    :param live_adapter: Adapter to use when ``spec.adapter.kind`` is ``llm``;
        built from ``spec.adapter.llm`` when omitted.
    :raises AdapterConfigurationError: If the live adapter cannot be built.
    """
    schedule = spec.schedule()
    if spec.adapter.kind is AdapterKind.LLM and live_adapter is None:
        live_adapter = ChatCompletionAdapter(spec.adapter.llm)

    os.makedirs(spec.output_dir, exist_ok=True)
    path = next_results_path(spec.output_dir)
    stem = os.path.splitext(os.path.basename(path))[0]
    transcripts_root = os.path.join(spec.output_dir, "transcripts", stem)

    def one(seed: int) -> Dict[str, Any]:
        return run_repetition(spec, seed, schedule, live_adapter, os.path.join(transcripts_root, f"seed_{seed}"))

    seeds = spec.seeds()
    if spec.max_workers > 1 and len(seeds) > 1:
        with ThreadPoolExecutor(max_workers=spec.max_workers) as pool:
            runs = list(pool.map(one, seeds))
    else:
        runs = [one(seed) for seed in seeds]
    runs.sort(key=lambda r: r["seed"])

    label = scenario_label(spec, schedule)
    document = {
        "name": spec.name,
        "scenario": label,
        "level": spec.level,
        "spec": spec.model_dump(mode="json"),
        "runs": runs,
        "aggregate": aggregate(runs),
    }
    write_json(document, path)
    frame = results_frame(runs, label, spec.level)
    csv_path = os.path.join(spec.output_dir, f"{stem}.csv")
    save_dataframe(frame, csv_path)

    agg = document["aggregate"]
    logger.keyinfo(
        f"Experiment '{spec.name}' finished: {agg['completed_runs']} ok, {agg['failed_runs']} failed; "
        f"results at {path}"
    )
    return ExperimentResults(document=document, frame=frame, path=path, csv_path=csv_path)
