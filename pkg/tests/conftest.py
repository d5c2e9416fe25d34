import os
from typing import List, Sequence

import numpy as np
import pytest

from src.core.config import ExperimentConfig, PredictorMode
from src.core.domain import DemandMatrix, FleetState
from src.core.plans import plan_from_moves
from src.ingest.demand import DemandStats
from src.ingest.series import DemandSeries
from src.scenario.scenarios import make_rising_scenario

FIXTURES_DIR = os.path.join(os.path.dirname(__file__), "fixtures")


def pytest_addoption(parser):
    parser.addoption(
        "--run-integration",
        action="store_true",
        default=False,
        help="run tests that start a local chat-completion stub server",
    )


def pytest_collection_modifyitems(config, items):
    if config.getoption("--run-integration"):
        return
    skip = pytest.mark.skip(reason="needs --run-integration")
    for item in items:
        if "integration" in item.keywords:
            item.add_marker(skip)


def fixture_path(name: str) -> str:
    return os.path.join(FIXTURES_DIR, name)


def series_of(matrices: Sequence[Sequence[Sequence[int]]], slots_per_day: int) -> DemandSeries:
    return DemandSeries(np.asarray(matrices, dtype=np.int64), slots_per_day)


def random_plan(rng: np.random.Generator, state: FleetState, fill: float = 1.0) -> np.ndarray:
    """A feasible move matrix drawing at most ``fill`` of each region's vehicles."""
    n = state.n
    moves = np.zeros((n, n), dtype=np.int64)
    for i in range(n):
        budget = int(rng.integers(0, int(state[i] * fill) + 1))
        if budget and n > 1:
            others = [j for j in range(n) if j != i]
            split = rng.multinomial(budget, np.full(n - 1, 1.0 / (n - 1)))
            moves[i, others] = split
    return moves


def random_matrices(rng: np.random.Generator, n: int, count: int, high: int = 4) -> List[DemandMatrix]:
    return [DemandMatrix(rng.integers(0, high, size=(n, n))) for _ in range(count)]


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


@pytest.fixture
def small_cfg() -> ExperimentConfig:
    return ExperimentConfig(n_regions=3, slots_per_day=4, rebalance_period=2, horizon=2, fleet_size=12)


@pytest.fixture
def day_cfg() -> ExperimentConfig:
    """One rebalancing point per day, seeing the whole day ahead."""
    return ExperimentConfig(
        n_regions=6,
        slots_per_day=24,
        rebalance_period=24,
        horizon=24,
        fleet_size=60,
        training_days=0,
        predictor=PredictorMode.PERFECT_FORESIGHT,
    )


@pytest.fixture
def case():
    """Arguments of `adapt` up to the adapter: a latent surge in Region 1."""
    return {
        "initial": plan_from_moves([(0, 1, 2)], 3),
        "state": FleetState([4, 0, 2]),
        "predicted": [DemandMatrix([[0, 1, 0], [0, 3, 0], [0, 0, 1]])],
        "stats": DemandStats(
            avg=np.array([1.0, 3.0, 1.0]),
            std=np.zeros(3),
            min=np.array([1, 3, 1]),
            max=np.array([1, 3, 1]),
        ),
        "scenario": make_rising_scenario(3, 0.5, regions=[1]),
    }
