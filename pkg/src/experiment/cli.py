"""
Command-line entry point: ``python -m src.experiment <command> ...``.

Exit codes: 0 success, 1 plan invalid, 2 bad arguments, spec or input file,
3 experiment failure.
"""
import argparse
import json
import os
import sys
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
from pydantic import ValidationError

from src.adaptation.prompt import build_prompt
from src.core.config import ExperimentConfig
from src.core.domain import DemandMatrix, FleetState, PlanConstraints, TimeSlot
from src.core.errors import ExperimentSpecError, IngestionError, RebalancingError, StructuralError
from src.core.plans import plan_from_record, validate_plan
from src.experiment.runner import run_experiment
from src.experiment.spec import AdapterSettings, ExperimentSpec, load_spec
from src.experiment.sweep import DEFAULT_LEVELS, SweepFamily, sweep
from src.ingest.demand import DemandStats, build_demand_series, compute_stats
from src.ingest.series import DemandSeries, save_series
from src.ingest.trips import IngestSettings, load_trips
from src.scenario.schedule import scenario_script
from src.utils import load_yaml, write_json
from utils.ml_logging import get_logger

logger = get_logger("rebalancing.cli")

EXIT_OK = 0
EXIT_PLAN_INVALID = 1
EXIT_USAGE = 2
EXIT_FAILURE = 3

ADAPTER_CHOICES = ("none", "llm", "echo", "shortage_repair", "faulty", "always_invalid")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rebalancing", description="Fleet rebalancing simulation and adaptation experiments."
    )
    commands = parser.add_subparsers(dest="command", required=True)

    ingest = commands.add_parser("ingest", help="Count a trip CSV into a demand series cache and stats report.")
    ingest.add_argument("trips", help="Trip CSV or Parquet file.")
    ingest.add_argument("--settings", help="Ingest settings YAML (columns, region mapping).")
    ingest.add_argument("--slots-per-day", type=int, default=24)
    ingest.add_argument("--format", choices=("csv", "parquet"), default="parquet")
    ingest.add_argument("--out", default="cache", help="Output directory.")

    def add_overrides(sub: argparse.ArgumentParser) -> None:
        sub.add_argument("spec", help="Experiment spec (YAML or JSON).")
        sub.add_argument("--seed", type=int, help="Base seed override.")
        sub.add_argument("--out", help="Output directory override.")
        sub.add_argument("--adapter", choices=ADAPTER_CHOICES, help="Adapter override.")

    run = commands.add_parser("run", help="Run an experiment spec.")
    add_overrides(run)

    sweep_cmd = commands.add_parser("sweep", help="Run a spec over the levels of a scenario family.")
    add_overrides(sweep_cmd)
    sweep_cmd.add_argument("--family", choices=[f.value for f in SweepFamily], required=True)
    sweep_cmd.add_argument("--levels", type=float, nargs="+", help="Scenario levels; family defaults when omitted.")
    sweep_cmd.add_argument("--disclosed", action="store_true", help="State the magnitude in the narrative.")
    sweep_cmd.add_argument("--scenario-seed", type=int, default=0)

    check = commands.add_parser("validate-plan", help="Check a plan file against a fleet state file.")
    check.add_argument("plan", help='Plan JSON: {"moves": [{"from", "to", "count"}]}.')
    check.add_argument("state", help='Fleet JSON: a list of counts or {"fleet": [...]}.')
    check.add_argument("--max-moves", type=int, help="Move budget.")
    check.add_argument("--blocked", type=int, nargs="*", default=[], help="Blocked regions.")

    prompt = commands.add_parser("render-prompt", help="Print the adaptation prompt for a case file.")
    prompt.add_argument("case", help="Prompt case (YAML or JSON).")
    prompt.add_argument("--llm-planning", action="store_true", help="Omit the initial strategy.")
    return parser


def _with_overrides(spec: ExperimentSpec, args: argparse.Namespace) -> ExperimentSpec:
    update: Dict[str, Any] = {}
    if args.seed is not None:
        update["config"] = spec.config.with_seed(args.seed)
    if args.out is not None:
        update["output_dir"] = args.out
    if args.adapter is not None:
        update["adapter"] = AdapterSettings.from_name(args.adapter, spec.adapter)
    return spec.model_copy(update=update) if update else spec


def _cmd_ingest(args: argparse.Namespace) -> int:
    settings = IngestSettings.from_yaml(args.settings) if args.settings else IngestSettings.from_yaml()
    loaded = load_trips(args.trips, settings)
    cfg = ExperimentConfig(
        n_regions=settings.n_regions,
        slots_per_day=args.slots_per_day,
        rebalance_period=args.slots_per_day,
        horizon=args.slots_per_day,
    )
    series = build_demand_series(loaded, cfg)
    save_series(series, os.path.join(args.out, f"demand_series.{args.format}"))
    report = {
        "ingest": loaded.report.to_record(),
        "n_regions": series.n,
        "n_slots": len(series),
        "slots_per_day": series.slots_per_day,
        "start_date": None if series.start_date is None else series.start_date.isoformat(),
        "total_trips": series.total(),
        "stats": compute_stats(series).to_records() if len(series) else [],
    }
    write_json(report, os.path.join(args.out, "ingest_report.json"))
    print(json.dumps(report["ingest"], sort_keys=True))
    return EXIT_OK


def _cmd_run(args: argparse.Namespace) -> int:
    spec = _with_overrides(load_spec(args.spec), args)
    results = run_experiment(spec)
    print(results.path)
    return EXIT_FAILURE if results.failed_runs else EXIT_OK


def _cmd_sweep(args: argparse.Namespace) -> int:
    spec = _with_overrides(load_spec(args.spec), args)
    family = SweepFamily(args.family)
    results = sweep(
        spec,
        family,
        args.levels or DEFAULT_LEVELS[family],
        disclosed=args.disclosed,
        scenario_seed=args.scenario_seed,
    )
    print(results.summary.to_string(index=False))
    print(results.csv_path)
    return EXIT_FAILURE if any(e.failed_runs for e in results.experiments) else EXIT_OK


def _read_fleet(path: str) -> FleetState:
    raw = load_yaml(path)
    counts = raw.get("fleet") if isinstance(raw, dict) else raw
    return FleetState(np.asarray(counts, dtype=np.int64))


def _cmd_validate_plan(args: argparse.Namespace) -> int:
    state = _read_fleet(args.state)
    try:
        plan = plan_from_record(load_yaml(args.plan), state.n)
    except (StructuralError, ValidationError) as e:
        print(f"Plan could not be read: {e}")
        return EXIT_PLAN_INVALID
    violations = validate_plan(state, plan, constraints=PlanConstraints.build(args.max_moves, args.blocked))
    for violation in violations:
        print(violation.describe())
    if violations:
        return EXIT_PLAN_INVALID
    print("Plan is valid.")
    return EXIT_OK


def load_prompt_case(path: str, llm_planning: bool = False) -> str:
    """
    Render the prompt described by a case file with keys ``config``, ``at``
    (``{day, slot}``), ``fleet``, ``predicted`` (list of OD matrices),
    ``stats`` (per-region ``{avg, std, min, max}``) or ``history`` (list of
    OD matrices), optional ``initial`` (move-list record), ``scenarios``
    (script entries, injected in order against the fleet) and ``constraints``.
    """
    case = load_yaml(path)
    cfg = ExperimentConfig.model_validate(case["config"])
    fleet = FleetState(np.asarray(case["fleet"], dtype=np.int64))
    predicted = [DemandMatrix(np.asarray(m, dtype=np.int64)) for m in case.get("predicted", [])]
    if "stats" in case:
        rows = case["stats"]
        stats = DemandStats(
            avg=np.array([r["avg"] for r in rows], dtype=np.float64),
            std=np.array([r["std"] for r in rows], dtype=np.float64),
            min=np.array([r["min"] for r in rows], dtype=np.int64),
            max=np.array([r["max"] for r in rows], dtype=np.int64),
        )
    else:
        stats = compute_stats(DemandSeries(np.asarray(case["history"], dtype=np.int64), cfg.slots_per_day))
    initial = None if llm_planning or case.get("initial") is None else plan_from_record(case["initial"], fleet.n)

    scenarios = []
    for spec in scenario_script(case.get("scenarios", [])).entries:
        fleet, scenario = spec.materialize(fleet, cfg.slots_per_day)
        scenarios.append(scenario)
    at = TimeSlot(**case.get("at", {"day": 0, "slot": 0}))
    limits = case.get("constraints") or {}
    constraints = PlanConstraints.build(limits.get("max_total_moves"), limits.get("blocked_regions", ()))
    return build_prompt(fleet, predicted, stats, initial, scenarios, cfg, at, constraints).render()


def _cmd_render_prompt(args: argparse.Namespace) -> int:
    print(load_prompt_case(args.case, args.llm_planning))
    return EXIT_OK


_COMMANDS = {
    "ingest": _cmd_ingest,
    "run": _cmd_run,
    "sweep": _cmd_sweep,
    "validate-plan": _cmd_validate_plan,
    "render-prompt": _cmd_render_prompt,
}


def cli(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code == 0 else EXIT_USAGE
    try:
        return _COMMANDS[args.command](args)
    except (ExperimentSpecError, IngestionError, FileNotFoundError, ValidationError, KeyError, ValueError) as e:
        logger.error(f"Error details: {e}")
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except RebalancingError as e:
        logger.error(f"Error details: {e}")
        print(f"error: {e}", file=sys.stderr)
        return EXIT_FAILURE


def main(argv: Optional[List[str]] = None) -> None:
    sys.exit(cli(argv))
