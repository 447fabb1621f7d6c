from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional

import numpy as np

from production.domain import Dataset
from production.objectives import ObjectivePoint, robust_objectives
from production.sim import SPLIT_LEVELS, GenomeLayout

from .operators import (
    ARCHIVE,
    EVALUATE,
    INIT,
    TRIAL,
    VARIATION,
    JadeState,
    archive_parents,
    derived_seed,
    jade_trial,
    polynomial_mutation,
    sbx,
    stream,
    tournament,
    update_jade_state,
)
from .sorting import assign_rank_and_crowding, dominates, pareto_front, select_next_generation

logger = logging.getLogger(__name__)

ALGORITHMS = ("nsjade", "nsga2", "jade")

Mapper = Callable[[Callable, Iterable], Iterable]


@dataclass(frozen=True)
class RunConfig:
    algorithm: str = "nsjade"
    np_size: int = 400
    xi: int = 10
    g_max: Optional[int] = None
    h_samples: int = 5
    beta: float = 0.2
    seed: int = 42
    s_day: Optional[int] = None
    noise_scope: str = "order_day"
    jade_c: float = 0.1
    jade_p: float = 0.05
    mu_cr: float = 0.5
    mu_f: float = 0.5
    eta_c: float = 20.0
    eta_m: float = 20.0
    p_c: float = 0.9
    p_m: Optional[float] = None

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {self.algorithm!r}; choose from {', '.join(ALGORITHMS)}")
        if self.np_size <= 4:
            raise ValueError("population size must exceed 4")
        if self.g_max is not None and self.g_max < 0:
            raise ValueError("g_max must be >= 0")
        if self.h_samples < 1:
            raise ValueError("H must be >= 1")
        if not 0 <= self.beta < 1:
            raise ValueError("beta must lie in [0, 1)")
        if self.seed < 0:
            raise ValueError("seed must be nonnegative")

    def generations(self, dimension: int) -> int:
        return self.g_max if self.g_max is not None else dimension * self.xi

    def mutation_probability(self, dimension: int) -> float:
        return self.p_m if self.p_m is not None else 1.0 / dimension


@dataclass
class Individual:
    genome: np.ndarray
    objectives: ObjectivePoint
    rank: int = 0
    crowding: float = 0.0
    f_used: float = float("nan")
    cr_used: float = float("nan")


@dataclass
class RunResult:
    config: RunConfig
    genomes: np.ndarray
    objectives: np.ndarray
    rank: np.ndarray
    crowding: np.ndarray
    f_used: np.ndarray
    cr_used: np.ndarray
    stats: list[dict] = field(default_factory=list)

    def point(self, index: int) -> ObjectivePoint:
        f1, f2 = self.objectives[index]
        return ObjectivePoint.robust(f1, f2, self.config.h_samples, self.config.beta)

    def individuals(self) -> list[Individual]:
        return [
            Individual(
                genome=self.genomes[i],
                objectives=self.point(i),
                rank=int(self.rank[i]),
                crowding=float(self.crowding[i]),
                f_used=float(self.f_used[i]),
                cr_used=float(self.cr_used[i]),
            )
            for i in range(len(self.genomes))
        ]

    def front(self) -> np.ndarray:
        return pareto_front(self.objectives)

    @property
    def best_f1(self) -> float:
        return float(self.objectives[:, 0].min())


def initialize_population(dataset: Dataset, size: int, rng: np.random.Generator) -> np.ndarray:
    """
    Part A: valid line ids for each order's type. Part B: one of the four
    split levels. Part C: integer keys in [1, n].
    """
    layout = GenomeLayout.for_dataset(dataset)
    genomes = np.empty((size, layout.dimension))
    valid = [np.array(dataset.valid_lines(order.product_type), dtype=float) for order in dataset.orders]
    part_a = np.empty((size, 2 * dataset.n))
    for j, lines in enumerate(valid):
        part_a[:, 2 * j:2 * j + 2] = rng.choice(lines, size=(size, 2))
    genomes[:, layout.part_a] = part_a
    genomes[:, layout.part_b] = rng.choice(np.array(SPLIT_LEVELS), size=(size, dataset.n))
    genomes[:, layout.part_c] = rng.integers(1, dataset.n + 1, size=(size, dataset.n))
    return genomes


def _evaluate_one(task) -> tuple[float, float]:
    genome, dataset, h_samples, beta, seed, noise_scope = task
    return robust_objectives(genome, dataset, h_samples, beta, seed, noise_scope).as_tuple()


def evaluate_population(
    genomes: np.ndarray,
    dataset: Dataset,
    config: RunConfig,
    generation: int,
    mapper: Mapper = map,
) -> np.ndarray:
    tasks = [
        (genome, dataset, config.h_samples, config.beta,
         derived_seed(config.seed, EVALUATE, generation, index), config.noise_scope)
        for index, genome in enumerate(genomes)
    ]
    return np.array(list(mapper(_evaluate_one, tasks)), dtype=float).reshape(len(genomes), 2)


def _generation_stats(generation, objectives, rank, state=None, successes=0) -> dict:
    row = {
        "generation": generation,
        "best_f1": float(objectives[:, 0].min()),
        "best_f2": float(objectives[:, 1].min()),
        "mean_f1": float(objectives[:, 0].mean()),
        "mean_f2": float(objectives[:, 1].mean()),
        "front_size": int(np.sum(rank == 0)),
        "successes": successes,
    }
    if state is not None:
        row["mu_f"] = state.mu_f
        row["mu_cr"] = state.mu_cr
    return row


def scalar_rank(objectives: np.ndarray) -> np.ndarray:
    # 0 for every individual at the best f1, 1 for the rest
    return (objectives[:, 0] > objectives[:, 0].min()).astype(int)


def _jade_state(config: RunConfig) -> JadeState:
    return JadeState(mu_cr=config.mu_cr, mu_f=config.mu_f, c=config.jade_c, p=config.jade_p, capacity=config.np_size)


def run_nsjade(config: RunConfig, dataset: Dataset, mapper: Mapper = map) -> RunResult:
    """Nondominated sorting and crowding selection driven by JADE trial vectors."""
    lower, upper = GenomeLayout.for_dataset(dataset).bounds()
    size = config.np_size
    genomes = initialize_population(dataset, size, stream(config.seed, INIT))
    objectives = evaluate_population(genomes, dataset, config, 0, mapper)
    f_used = np.full(size, np.nan)
    cr_used = np.full(size, np.nan)
    rank, crowding = assign_rank_and_crowding(objectives)
    state = _jade_state(config)
    stats = [_generation_stats(0, objectives, rank, state)]
    logger.info("nsjade seed=%s NP=%s generations=%s", config.seed, size, config.generations(dataset.dimension))

    for generation in range(1, config.generations(dataset.dimension) + 1):
        ranking = np.lexsort((-crowding, rank))
        trials = np.empty_like(genomes)
        trial_f = np.empty(size)
        trial_cr = np.empty(size)
        for i in range(size):
            trials[i], trial_f[i], trial_cr[i] = jade_trial(
                i, genomes, state, stream(config.seed, TRIAL, generation, i), ranking, lower, upper
            )
        trial_objectives = evaluate_population(trials, dataset, config, generation, mapper)

        improved = [i for i in range(size) if dominates(trial_objectives[i], objectives[i])]
        state = archive_parents(state, genomes[improved], stream(config.seed, ARCHIVE, generation))

        pool_objectives = np.vstack([objectives, trial_objectives])
        survivors = select_next_generation(pool_objectives, size)
        genomes = np.vstack([genomes, trials])[survivors]
        objectives = pool_objectives[survivors]
        f_used = np.concatenate([f_used, trial_f])[survivors]
        cr_used = np.concatenate([cr_used, trial_cr])[survivors]
        rank, crowding = assign_rank_and_crowding(objectives)

        state = update_jade_state(state, [(trial_f[i], trial_cr[i]) for i in improved])
        stats.append(_generation_stats(generation, objectives, rank, state, len(improved)))
        logger.debug("generation %s: %s", generation, stats[-1])

    return RunResult(config, genomes, objectives, rank, crowding, f_used, cr_used, stats)


def run_nsga2(config: RunConfig, dataset: Dataset, mapper: Mapper = map) -> RunResult:
    lower, upper = GenomeLayout.for_dataset(dataset).bounds()
    size = config.np_size
    p_m = config.mutation_probability(dataset.dimension)
    genomes = initialize_population(dataset, size, stream(config.seed, INIT))
    objectives = evaluate_population(genomes, dataset, config, 0, mapper)
    rank, crowding = assign_rank_and_crowding(objectives)
    stats = [_generation_stats(0, objectives, rank)]
    logger.info("nsga2 seed=%s NP=%s generations=%s", config.seed, size, config.generations(dataset.dimension))

    for generation in range(1, config.generations(dataset.dimension) + 1):
        offspring = []
        for pair in range(0, size, 2):
            rng = stream(config.seed, VARIATION, generation, pair)
            a, b = tournament(rank, crowding, rng), tournament(rank, crowding, rng)
            children = sbx(genomes[a], genomes[b], lower, upper, config.eta_c, config.p_c, rng)
            offspring.extend(polynomial_mutation(child, lower, upper, config.eta_m, p_m, rng) for child in children)
        offspring = np.array(offspring[:size])
        offspring_objectives = evaluate_population(offspring, dataset, config, generation, mapper)

        pool_objectives = np.vstack([objectives, offspring_objectives])
        survivors = select_next_generation(pool_objectives, size)
        genomes = np.vstack([genomes, offspring])[survivors]
        objectives = pool_objectives[survivors]
        rank, crowding = assign_rank_and_crowding(objectives)
        stats.append(_generation_stats(generation, objectives, rank))
        logger.debug("generation %s: %s", generation, stats[-1])

    nan = np.full(size, np.nan)
    return RunResult(config, genomes, objectives, rank, crowding, nan, nan.copy(), stats)


def run_jade_single(config: RunConfig, dataset: Dataset, mapper: Mapper = map) -> RunResult:
    """
    Scalar JADE on total tardiness with one-to-one parent/trial replacement.

    `stats` is the per-generation trajectory of best and mean f1; its
    front_size counts the individuals tied at the best f1.
    """
    lower, upper = GenomeLayout.for_dataset(dataset).bounds()
    size = config.np_size
    genomes = initialize_population(dataset, size, stream(config.seed, INIT))
    objectives = evaluate_population(genomes, dataset, config, 0, mapper)
    f_used = np.full(size, np.nan)
    cr_used = np.full(size, np.nan)
    state = _jade_state(config)
    stats = [_generation_stats(0, objectives, scalar_rank(objectives), state)]
    logger.info("jade seed=%s NP=%s generations=%s", config.seed, size, config.generations(dataset.dimension))

    for generation in range(1, config.generations(dataset.dimension) + 1):
        ranking = np.argsort(objectives[:, 0], kind="stable")
        trials = np.empty_like(genomes)
        trial_f = np.empty(size)
        trial_cr = np.empty(size)
        for i in range(size):
            trials[i], trial_f[i], trial_cr[i] = jade_trial(
                i, genomes, state, stream(config.seed, TRIAL, generation, i), ranking, lower, upper
            )
        trial_objectives = evaluate_population(trials, dataset, config, generation, mapper)

        improved = np.flatnonzero(trial_objectives[:, 0] < objectives[:, 0])
        state = archive_parents(state, genomes[improved], stream(config.seed, ARCHIVE, generation))
        genomes[improved] = trials[improved]
        objectives[improved] = trial_objectives[improved]
        f_used[improved] = trial_f[improved]
        cr_used[improved] = trial_cr[improved]

        state = update_jade_state(state, [(trial_f[i], trial_cr[i]) for i in improved])
        stats.append(_generation_stats(generation, objectives, scalar_rank(objectives), state, len(improved)))
        logger.debug("generation %s: best f1 %s", generation, stats[-1]["best_f1"])

    rank, crowding = assign_rank_and_crowding(objectives)
    return RunResult(config, genomes, objectives, rank, crowding, f_used, cr_used, stats)


RUNNERS = {
    "nsjade": run_nsjade,
    "nsga2": run_nsga2,
    "jade": run_jade_single,
}


def run(config: RunConfig, dataset: Dataset, mapper: Mapper = map) -> RunResult:
    return RUNNERS[config.algorithm](config, dataset, mapper)
