import itertools

import numpy as np
import pytest
from pydantic import ValidationError

from src.core.domain import FleetState
from src.core.errors import StructuralError
from src.core.plans import apply_plan, validate_plan
from src.rebalancer.ga import GAConfig, GeneticRebalancer, ga_rebalance
from src.rebalancer.policies import greedy_rebalance, sdsm_targets
from src.rebalancer.registry import build_rebalancer
from src.simulator.environment import rollout_satisfied
from tests.conftest import random_matrices

SMALL = GAConfig(population_size=20, generations=15, seed=7)


class TestGeneticRebalancer:
    def test_never_worse_than_its_seeds_on_projected_trips(self, rng):
        # the comparison is on the predicted horizon; realized episodes may order differently
        for _ in range(10):
            state = FleetState(rng.integers(0, 6, size=4))
            predicted = random_matrices(rng, 4, 3)
            result = GeneticRebalancer(SMALL).search(state, predicted)
            greedy = apply_plan(state, greedy_rebalance(state, predicted))
            assert result.fitness >= rollout_satisfied(sdsm_targets(state, predicted), predicted)
            assert result.fitness >= rollout_satisfied(greedy, predicted)
            assert validate_plan(state, result.plan) == []
            assert apply_plan(state, result.plan).tolist() == result.targets.tolist()

    def test_finds_the_optimum_of_a_micro_instance(self, rng):
        state = FleetState([4, 0, 0])
        predicted = random_matrices(rng, 3, 2, high=3)
        best = max(
            rollout_satisfied(np.array(c), predicted)
            for c in itertools.product(range(5), repeat=3)
            if sum(c) == 4
        )
        assert GeneticRebalancer(SMALL).search(state, predicted).fitness == best

    def test_same_seed_same_plan(self, rng):
        state = FleetState([5, 1, 0, 2])
        predicted = random_matrices(rng, 4, 4)
        assert ga_rebalance(state, predicted, SMALL) == ga_rebalance(state, predicted, SMALL)

    def test_history_is_monotone(self, rng):
        state = FleetState([5, 1, 0, 2])
        result = GeneticRebalancer(SMALL).search(state, random_matrices(rng, 4, 4))
        assert len(result.history) == SMALL.generations + 1
        assert all(later >= earlier for earlier, later in zip(result.history, result.history[1:]))
        assert result.history[-1] == result.fitness

    def test_history_keeps_the_best_so_far_without_elites(self, rng):
        cfg = GAConfig(population_size=6, generations=30, elite_count=0, mutation_rate=1.0, seed=3)
        state = FleetState([6, 0, 1, 3])
        result = GeneticRebalancer(cfg).search(state, random_matrices(rng, 4, 3))
        assert all(later >= earlier for earlier, later in zip(result.history, result.history[1:]))
        assert result.history[-1] == result.fitness
        assert max(result.history) == result.fitness

    def test_custom_fitness(self, rng):
        state = FleetState([3, 2, 1])
        plan = ga_rebalance(state, random_matrices(rng, 3, 2), SMALL, fitness=lambda p: -p.total_moves())
        assert plan.is_zero()

    def test_parallel_scoring_gives_the_same_answer(self, rng):
        state = FleetState([4, 4, 0, 1])
        predicted = random_matrices(rng, 4, 3)
        threaded = SMALL.model_copy(update={"n_workers": 4})
        assert ga_rebalance(state, predicted, threaded) == ga_rebalance(state, predicted, SMALL)

    def test_initial_population_must_be_compositions(self):
        with pytest.raises(StructuralError):
            GeneticRebalancer(SMALL).search(FleetState([2, 2]), [], initial_population=[[1, 1]])

    def test_registry_builds_a_ga(self):
        assert isinstance(build_rebalancer("GA", SMALL), GeneticRebalancer)


class TestGAConfig:
    def test_elite_must_fit_the_population(self):
        with pytest.raises(ValidationError):
            GAConfig(population_size=4, elite_count=4)
