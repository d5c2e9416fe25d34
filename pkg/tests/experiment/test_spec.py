import shutil

import pytest
import yaml

from src.core.errors import ExperimentSpecError
from src.experiment.spec import AdapterKind, AdapterSettings, DataSource, load_spec
from src.rebalancer.policies import RebalancerKind
from tests.conftest import fixture_path


def write_spec(tmp_path, **changes):
    with open(fixture_path("spec.yaml"), encoding="utf-8") as f:
        raw = yaml.safe_load(f)
    raw.update(changes)
    path = tmp_path / "spec.yaml"
    path.write_text(yaml.safe_dump(raw))
    return str(path)


class TestLoadSpec:
    def test_fixture(self):
        spec = load_spec(fixture_path("spec.yaml"))
        assert spec.name == "tiny"
        assert spec.rebalancer is RebalancerKind.GREEDY
        assert spec.adapter.kind is AdapterKind.MOCK
        assert spec.data.source is DataSource.SYNTHETIC
        assert spec.seeds() == [5, 6]
        assert len(spec.schedule()) == 1

    def test_script_path_is_relative_to_the_spec(self, tmp_path):
        shutil.copy(fixture_path("script.yaml"), tmp_path / "script.yaml")
        spec = load_spec(write_spec(tmp_path, scenarios=[], script="script.yaml"))
        assert spec.script == str(tmp_path / "script.yaml")
        assert spec.schedule().slots() == [0, 12]

    def test_missing_file(self, tmp_path):
        with pytest.raises(ExperimentSpecError):
            load_spec(str(tmp_path / "nope.yaml"))

    @pytest.mark.parametrize(
        "changes",
        [
            {"script": "missing.yaml"},
            {"adapter": {"kind": "mock", "mock": "oracle"}},
            {"repetitions": 0},
            {"surprise": True},
            {"scenarios": [{"slot": 0, "kind": "shrinking", "params": {"fraction": 2.0}}]},
            {"data": {"source": "csv"}},
        ],
    )
    def test_invalid_specs(self, tmp_path, changes):
        with pytest.raises(ExperimentSpecError):
            load_spec(write_spec(tmp_path, **changes))

    def test_not_a_mapping(self, tmp_path):
        path = tmp_path / "list.yaml"
        path.write_text("- 1\n- 2\n")
        with pytest.raises(ExperimentSpecError):
            load_spec(str(path))


class TestAdapterSettings:
    def test_from_name(self):
        assert AdapterSettings.from_name("none").kind is AdapterKind.NONE
        assert AdapterSettings.from_name("llm").kind is AdapterKind.LLM
        faulty = AdapterSettings.from_name("faulty", AdapterSettings(max_iter=3))
        assert (faulty.kind, faulty.mock, faulty.max_iter) == (AdapterKind.MOCK, "faulty", 3)
