import json

import pandas as pd
import pytest

from src.experiment.cli import EXIT_FAILURE, EXIT_OK, EXIT_PLAN_INVALID, EXIT_USAGE, cli, load_prompt_case
from tests.conftest import fixture_path


class TestUsage:
    def test_no_command(self):
        assert cli([]) == EXIT_USAGE

    def test_help(self, capsys):
        assert cli(["--help"]) == EXIT_OK
        assert "validate-plan" in capsys.readouterr().out

    def test_missing_spec(self, tmp_path):
        assert cli(["run", str(tmp_path / "nope.yaml")]) == EXIT_USAGE

    def test_invalid_spec(self, tmp_path):
        path = tmp_path / "bad.yaml"
        path.write_text("config: {n_regions: 0}\n")
        assert cli(["run", str(path)]) == EXIT_USAGE


class TestRun:
    def test_run_writes_results(self, tmp_path, capsys):
        assert cli(["run", fixture_path("spec.yaml"), "--out", str(tmp_path), "--adapter", "echo"]) == EXIT_OK
        path = capsys.readouterr().out.strip().splitlines()[-1]
        assert path == str(tmp_path / "results.json")
        with open(path, encoding="utf-8") as f:
            document = json.load(f)
        assert document["spec"]["adapter"]["mock"] == "echo"
        assert document["aggregate"]["completed_runs"] == 2

    def test_seed_override(self, tmp_path):
        assert cli(["run", fixture_path("spec.yaml"), "--out", str(tmp_path), "--seed", "40"]) == EXIT_OK
        with open(tmp_path / "results.json", encoding="utf-8") as f:
            assert [r["seed"] for r in json.load(f)["runs"]] == [40, 41]

    def test_failed_repetition_exits_with_failure(self, tmp_path):
        raw = {
            "config": {"n_regions": 3, "training_days": 7},
            "data": {
                "source": "csv",
                "csv": {"path": fixture_path("trips_small.csv"), "settings": fixture_path("settings_small.yaml")},
            },
        }
        path = tmp_path / "spec.json"
        path.write_text(json.dumps(raw))
        assert cli(["run", str(path), "--out", str(tmp_path / "out")]) == EXIT_FAILURE


class TestSweep:
    def test_shrinking_sweep(self, tmp_path, capsys):
        argv = ["sweep", fixture_path("spec.yaml"), "--family", "shrinking", "--levels", "0.1", "0.2"]
        assert cli(argv + ["--out", str(tmp_path), "--adapter", "none"]) == EXIT_OK
        assert capsys.readouterr().out.strip().endswith("sweep_shrinking.csv")
        frame = pd.read_csv(tmp_path / "sweep_shrinking.csv")
        assert sorted(frame["level"].unique()) == [0.1, 0.2]
        assert set(frame["scenario"]) == {"shrinking"}
        assert (tmp_path / "results.json").exists() and (tmp_path / "results.1.json").exists()

    def test_unknown_family(self):
        assert cli(["sweep", fixture_path("spec.yaml"), "--family", "flood"]) == EXIT_USAGE


class TestValidatePlan:
    def test_overdraw(self, capsys):
        code = cli(["validate-plan", fixture_path("plan_overdraw.json"), fixture_path("state.json")])
        assert code == EXIT_PLAN_INVALID
        assert "SourceOverdraw" in capsys.readouterr().out

    def test_valid_plan(self, tmp_path, capsys):
        plan = tmp_path / "plan.json"
        plan.write_text(json.dumps({"moves": [{"from": 0, "to": 1, "count": 2}]}))
        assert cli(["validate-plan", str(plan), fixture_path("state.json")]) == EXIT_OK
        assert "Plan is valid." in capsys.readouterr().out

    def test_blocked_region(self, tmp_path, capsys):
        plan = tmp_path / "plan.json"
        plan.write_text(json.dumps({"moves": [{"from": 0, "to": 1, "count": 2}]}))
        assert cli(["validate-plan", str(plan), fixture_path("state.json"), "--blocked", "1"]) == EXIT_PLAN_INVALID
        assert "ConstraintBreach" in capsys.readouterr().out

    def test_move_budget(self, tmp_path):
        plan = tmp_path / "plan.json"
        plan.write_text(json.dumps({"moves": [{"from": 0, "to": 1, "count": 2}]}))
        assert cli(["validate-plan", str(plan), fixture_path("state.json"), "--max-moves", "1"]) == EXIT_PLAN_INVALID

    def test_unreadable_plan(self, tmp_path, capsys):
        plan = tmp_path / "plan.json"
        plan.write_text(json.dumps({"moves": [{"from": 0, "to": 9, "count": 1}]}))
        assert cli(["validate-plan", str(plan), fixture_path("state.json")]) == EXIT_PLAN_INVALID
        assert "could not be read" in capsys.readouterr().out

    def test_plain_list_state(self, tmp_path):
        state = tmp_path / "state.json"
        state.write_text("[1, 1]")
        plan = tmp_path / "plan.json"
        plan.write_text(json.dumps({"moves": []}))
        assert cli(["validate-plan", str(plan), str(state)]) == EXIT_OK


class TestRenderPrompt:
    def test_case_file(self, capsys):
        assert cli(["render-prompt", fixture_path("prompt_case.yaml")]) == EXIT_OK
        text = capsys.readouterr().out
        assert "## System Status" in text
        assert "Current time: day 3, 12:00 (slot 12 of 24)." in text
        assert "[12, 5, 8, 3, 4] (32 in total)" in text
        assert "Region 0 → 1: 3" in text
        assert "Region 4 → 1: 1" in text
        assert "Move 2 vehicles from Region 4 to 1" in text
        assert "rise by 50%" in text
        assert "Relocate at most 6 vehicles in total." in text

    def test_llm_planning_omits_the_strategy(self):
        text = load_prompt_case(fixture_path("prompt_case.yaml"), llm_planning=True)
        assert "## Initial Rebalancing Strategy" not in text
        assert "## Emergent Situation" in text

    def test_is_deterministic(self):
        assert load_prompt_case(fixture_path("prompt_case.yaml")) == load_prompt_case(fixture_path("prompt_case.yaml"))


class TestIngest:
    @pytest.mark.parametrize("fmt", ["csv", "parquet"])
    def test_writes_series_and_report(self, tmp_path, capsys, fmt):
        argv = ["ingest", fixture_path("trips_small.csv"), "--settings", fixture_path("settings_small.yaml")]
        assert cli(argv + ["--out", str(tmp_path), "--format", fmt]) == EXIT_OK
        assert json.loads(capsys.readouterr().out.strip().splitlines()[-1])["rows_kept"] == 5
        assert (tmp_path / f"demand_series.{fmt}").exists()
        with open(tmp_path / "ingest_report.json", encoding="utf-8") as f:
            report = json.load(f)
        assert (report["n_regions"], report["slots_per_day"], report["total_trips"]) == (3, 24, 5)
        assert report["n_slots"] == 48
        assert report["ingest"]["rows_skipped"] == 4

    def test_missing_trip_file(self, tmp_path):
        assert cli(["ingest", str(tmp_path / "none.csv"), "--out", str(tmp_path)]) == EXIT_USAGE
