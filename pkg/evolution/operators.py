from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np
from pymoo.operators.crossover.sbx import cross_sbx
from pymoo.operators.mutation.pm import mut_pm

# Stream purposes; every random draw is keyed by (seed, purpose, generation, index).
INIT = 0
TRIAL = 1
EVALUATE = 2
ARCHIVE = 3
VARIATION = 4


def stream(seed: int, purpose: int, generation: int = 0, index: int = 0) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, purpose, generation, index]))


def derived_seed(seed: int, purpose: int, generation: int = 0, index: int = 0) -> int:
    return int(np.random.SeedSequence([seed, purpose, generation, index]).generate_state(1)[0])


def reflect_into_bounds(x: np.ndarray, lower: np.ndarray, upper: np.ndarray) -> np.ndarray:
    """Fold out-of-range genes back into [lower, upper] as if the bounds were mirrors."""
    width = upper - lower
    safe = np.where(width > 0, width, 1.0)
    offset = np.mod(x - lower, 2.0 * safe)
    offset = np.where(offset > safe, 2.0 * safe - offset, offset)
    folded = np.where(width > 0, lower + offset, lower)
    return np.where((x >= lower) & (x <= upper), x, folded)


@dataclass(frozen=True)
class JadeState:
    mu_cr: float = 0.5
    mu_f: float = 0.5
    c: float = 0.1
    p: float = 0.05
    capacity: int = 0
    archive: np.ndarray = field(default_factory=lambda: np.empty((0, 0)), compare=False, repr=False)


def sample_f(mu_f: float, rng: np.random.Generator) -> float:
    while True:
        f = mu_f + 0.1 * rng.standard_cauchy()
        if f > 0:
            return min(f, 1.0)


def sample_cr(mu_cr: float, rng: np.random.Generator) -> float:
    return float(np.clip(rng.normal(mu_cr, 0.1), 0.0, 1.0))


def jade_trial(
    target_index: int,
    population: np.ndarray,
    state: JadeState,
    rng: np.random.Generator,
    ranking: Sequence[int],
    lower: np.ndarray,
    upper: np.ndarray,
    f: Optional[float] = None,
    cr: Optional[float] = None,
) -> tuple[np.ndarray, float, float]:
    """
    DE/current-to-pbest/1/bin with an external archive.

    `ranking` lists population indices best first; pbest is drawn from its
    first ceil(p * NP) entries. `f` and `cr` override the adaptive draws.
    """
    size, dimension = population.shape
    if size < 4:
        raise ValueError(f"population of {size} is too small for current-to-pbest")
    f = sample_f(state.mu_f, rng) if f is None else f
    cr = sample_cr(state.mu_cr, rng) if cr is None else cr

    top = max(1, math.ceil(state.p * size))
    pbest = ranking[int(rng.integers(top))]
    r1 = int(rng.integers(size - 1))
    r1 += r1 >= target_index

    archive = state.archive if state.archive.size else np.empty((0, dimension))
    union = np.vstack([population, archive])
    candidates = np.setdiff1d(np.arange(len(union)), [target_index, r1])
    r2 = int(candidates[rng.integers(len(candidates))])

    target = population[target_index]
    donor = target + f * (population[pbest] - target) + f * (population[r1] - union[r2])
    mask = rng.random(dimension) < cr
    mask[rng.integers(dimension)] = True
    trial = np.where(mask, donor, target)
    return reflect_into_bounds(trial, lower, upper), float(f), float(cr)


def update_jade_state(state: JadeState, successes: Sequence[tuple[float, float]]) -> JadeState:
    """Move mu_f toward the Lehmer mean and mu_cr toward the mean of successful parameters."""
    if not successes:
        return state
    f_values = np.array([f for f, _ in successes])
    cr_values = np.array([cr for _, cr in successes])
    lehmer = float(np.sum(f_values ** 2) / np.sum(f_values))
    return replace(
        state,
        mu_cr=(1 - state.c) * state.mu_cr + state.c * float(cr_values.mean()),
        mu_f=(1 - state.c) * state.mu_f + state.c * lehmer,
    )


def archive_parents(state: JadeState, parents: np.ndarray, rng: np.random.Generator) -> JadeState:
    if len(parents) == 0:
        return state
    archive = parents if state.archive.size == 0 else np.vstack([state.archive, parents])
    if len(archive) > state.capacity:
        keep = np.sort(rng.choice(len(archive), size=state.capacity, replace=False))
        archive = archive[keep]
    return replace(state, archive=archive)


def tournament(rank: np.ndarray, crowding: np.ndarray, rng: np.random.Generator) -> int:
    """Binary crowded tournament; the first contender wins ties."""
    a, b = (int(i) for i in rng.integers(len(rank), size=2))
    if (rank[b], -crowding[b]) < (rank[a], -crowding[a]):
        return b
    return a


def sbx(
    parent_a: np.ndarray,
    parent_b: np.ndarray,
    lower: np.ndarray,
    upper: np.ndarray,
    eta: float,
    probability: float,
    rng: np.random.Generator,
) -> tuple[np.ndarray, np.ndarray]:
    """
    Bounded simulated binary crossover of one mating.

    The pair crosses with `probability`; each gene then takes part with
    probability 0.5 and children swap sides with probability 0.5. Draws come
    from `rng`, so a keyed stream reproduces the children exactly.
    """
    if rng.random() >= probability:
        return parent_a.copy(), parent_b.copy()
    mating = np.stack([parent_a, parent_b]).astype(float)[:, None, :]
    children = cross_sbx(
        mating, lower, upper,
        eta=np.full((1, 1), float(eta)),
        prob_var=0.5,
        prob_bin=np.full((1, 1), 0.5),
        random_state=rng,
    )
    return children[0, 0], children[1, 0]


def polynomial_mutation(
    x: np.ndarray,
    lower: np.ndarray,
    upper: np.ndarray,
    eta: float,
    probability: float,
    rng: np.random.Generator,
) -> np.ndarray:
    """Per-gene polynomial mutation; genes with equal bounds never move."""
    mutated = mut_pm(
        np.asarray(x, dtype=float)[None, :], lower, upper,
        eta=np.array([float(eta)]),
        prob=np.array([float(probability)]),
        at_least_once=False,
        random_state=rng,
    )
    return mutated[0]
