"""
Genetic-algorithm rebalancer.

A chromosome is a target distribution: a composition of the fleet total
over the regions. Any composition is reachable, and `plan_to_targets` turns
the winner into moves, so every individual is a feasible plan by
construction. Fitness defaults to the trips served over the predicted
horizon when starting from the target distribution.
"""
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from src.core.domain import DemandMatrix, FleetState, RebalancingPlan
from src.core.errors import StructuralError
from src.rebalancer.policies import greedy_rebalance, plan_to_targets, sdsm_targets
from src.simulator.environment import rollout_satisfied
from utils.ml_logging import get_logger

logger = get_logger("rebalancing.rebalancer")

Fitness = Callable[[RebalancingPlan], float]
# (fitness, -moves): more trips first, then fewer relocations
Score = Tuple[float, int]


class GAConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    population_size: int = Field(50, ge=2)
    generations: int = Field(100, ge=0)
    mutation_rate: float = Field(0.1, ge=0.0, le=1.0)
    crossover_rate: float = Field(0.8, ge=0.0, le=1.0)
    elite_count: int = Field(2, ge=0)
    tournament_size: int = Field(3, ge=1)
    seed: int = Field(0, ge=0)
    n_workers: int = Field(1, ge=1, description="Threads used to score a generation.")

    @model_validator(mode="after")
    def _elite_fits(self) -> "GAConfig":
        if self.elite_count >= self.population_size:
            raise ValueError(
                f"elite_count ({self.elite_count}) must be smaller than population_size ({self.population_size})"
            )
        return self


@dataclass
class GAResult:
    plan: RebalancingPlan
    targets: np.ndarray
    fitness: float
    moves: int
    # best fitness found so far, one entry per generation plus the seed population
    history: List[float] = field(default_factory=list)
    evaluations: int = 0


def _compositions(total: int, n: int) -> Iterator[Tuple[int, ...]]:
    if n == 1:
        yield (total,)
        return
    for first in range(total, -1, -1):
        for rest in _compositions(total - first, n - 1):
            yield (first,) + rest


class GeneticRebalancer:
    """
    Stateless between calls: every search starts its own generator from
    ``cfg.seed``, so equal inputs give equal plans.
    """

    def __init__(self, cfg: Optional[GAConfig] = None, fitness: Optional[Fitness] = None):
        self.cfg = cfg or GAConfig()
        self.fitness = fitness

    def __call__(self, state: FleetState, predicted: List[DemandMatrix]) -> RebalancingPlan:
        return self.search(state, predicted).plan

    def search(
        self,
        state: FleetState,
        predicted: Sequence[DemandMatrix],
        initial_population: Optional[Sequence[Sequence[int]]] = None,
    ) -> GAResult:
        cfg = self.cfg
        rng = np.random.default_rng(cfg.seed)
        total, n = state.total(), state.n
        cache: Dict[Tuple[int, ...], Score] = {}

        def moves_to(targets: Tuple[int, ...]) -> int:
            return int(np.maximum(np.asarray(targets) - state.counts, 0).sum())

        def score(targets: Tuple[int, ...]) -> Score:
            if self.fitness is None:
                value = float(rollout_satisfied(np.asarray(targets, dtype=np.int64), predicted))
            else:
                value = float(self.fitness(plan_to_targets(state, targets)))
            return value, -moves_to(targets)

        def evaluate(population: List[np.ndarray]) -> List[Score]:
            keys = [tuple(int(x) for x in individual) for individual in population]
            fresh = list(dict.fromkeys(k for k in keys if k not in cache))
            if cfg.n_workers > 1 and len(fresh) > 1:
                with ThreadPoolExecutor(max_workers=cfg.n_workers) as pool:
                    results = list(pool.map(score, fresh))
            else:
                results = [score(k) for k in fresh]
            cache.update(zip(fresh, results))
            return [cache[k] for k in keys]

        if initial_population is not None:
            population = self._validated(initial_population, total, n)
        else:
            population = self._seed_population(state, predicted)
        while len(population) < cfg.population_size:
            population.append(rng.multinomial(total, np.full(n, 1.0 / n)).astype(np.int64))

        scores = evaluate(population)
        best_index = self._ranked(scores)[0]
        best, best_score = population[best_index].copy(), scores[best_index]
        history = [best_score[0]]

        for _ in range(cfg.generations):
            ranked = self._ranked(scores)
            children = [population[i].copy() for i in ranked[: cfg.elite_count]]
            while len(children) < cfg.population_size:
                parent_a = population[self._tournament(rng, scores)]
                parent_b = population[self._tournament(rng, scores)]
                if rng.random() < cfg.crossover_rate:
                    child = self._crossover(rng, parent_a, parent_b, total)
                else:
                    child = parent_a.copy()
                if rng.random() < cfg.mutation_rate:
                    child = self._mutate(rng, child)
                children.append(child)
            population = children
            scores = evaluate(population)
            generation_best = self._ranked(scores)[0]
            if scores[generation_best] > best_score:
                best, best_score = population[generation_best].copy(), scores[generation_best]
            history.append(best_score[0])

        plan = plan_to_targets(state, best)
        logger.debug(
            f"GA finished: fitness {best_score[0]:.1f}, {-best_score[1]} moves, "
            f"{len(cache)} distinct individuals scored"
        )
        return GAResult(
            plan=plan,
            targets=best,
            fitness=best_score[0],
            moves=-best_score[1],
            history=history,
            evaluations=len(cache),
        )

    def _seed_population(self, state: FleetState, predicted: Sequence[DemandMatrix]) -> List[np.ndarray]:
        total, n = state.total(), state.n
        greedy = greedy_rebalance(state, predicted)
        seeds = [
            state.counts.copy(),
            sdsm_targets(state, predicted),
            state.counts - greedy.outflow() + greedy.inflow(),
        ]
        if math.comb(total + n - 1, n - 1) <= self.cfg.population_size:
            # small search space: start from every composition
            seeds += [np.array(c, dtype=np.int64) for c in _compositions(total, n)]
        unique: Dict[Tuple[int, ...], np.ndarray] = {}
        for individual in seeds:
            unique.setdefault(tuple(int(x) for x in individual), np.asarray(individual, dtype=np.int64))
        return list(unique.values())[: self.cfg.population_size]

    def _validated(self, population: Sequence[Sequence[int]], total: int, n: int) -> List[np.ndarray]:
        checked = []
        for position, individual in enumerate(population):
            array = np.asarray(individual, dtype=np.int64)
            if array.shape != (n,) or (array < 0).any() or int(array.sum()) != total:
                raise StructuralError(
                    f"initial individual #{position} {array.tolist()} is not a composition of {total} over {n} regions"
                )
            checked.append(array.copy())
        return checked[: self.cfg.population_size]

    @staticmethod
    def _ranked(scores: List[Score]) -> List[int]:
        return sorted(range(len(scores)), key=lambda i: (-scores[i][0], -scores[i][1], i))

    def _tournament(self, rng: np.random.Generator, scores: List[Score]) -> int:
        entrants = rng.integers(0, len(scores), size=self.cfg.tournament_size)
        return min((int(i) for i in entrants), key=lambda i: (-scores[i][0], -scores[i][1], i))

    @staticmethod
    def _crossover(rng: np.random.Generator, a: np.ndarray, b: np.ndarray, total: int) -> np.ndarray:
        if a.shape[0] < 2:
            return a.copy()
        point = int(rng.integers(1, a.shape[0]))
        child = np.concatenate([a[:point], b[point:]])
        excess = int(child.sum()) - total
        if excess > 0:
            # drop surplus units uniformly over the child's vehicles
            units = rng.choice(int(child.sum()), size=excess, replace=False)
            owners = np.searchsorted(np.cumsum(child), units, side="right")
            child = child - np.bincount(owners, minlength=child.shape[0])
        elif excess < 0:
            child = child + rng.multinomial(-excess, np.full(child.shape[0], 1.0 / child.shape[0]))
        return child.astype(np.int64)

    @staticmethod
    def _mutate(rng: np.random.Generator, child: np.ndarray) -> np.ndarray:
        holders = np.nonzero(child)[0]
        if child.shape[0] < 2 or holders.size == 0:
            return child
        src = int(rng.choice(holders))
        dst = int(rng.integers(0, child.shape[0] - 1))
        dst += dst >= src
        mutated = child.copy()
        mutated[src] -= 1
        mutated[dst] += 1
        return mutated


def ga_rebalance(
    state: FleetState,
    predicted: Sequence[DemandMatrix],
    ga_cfg: Optional[GAConfig] = None,
    fitness: Optional[Fitness] = None,
) -> RebalancingPlan:
    """Best plan the GA finds; deterministic for a given ``ga_cfg.seed``."""
    return GeneticRebalancer(ga_cfg, fitness).search(state, predicted).plan
