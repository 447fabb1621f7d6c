from __future__ import annotations

import itertools
import logging
from typing import Callable, Iterator, Optional

import numpy as np

from production.domain import Dataset
from production.objectives import evaluate
from production.sim import SPLIT_LEVELS, GenomeLayout

from .sorting import pareto_front

logger = logging.getLogger(__name__)

Evaluator = Callable[[np.ndarray, Dataset], tuple[float, float]]


def _order_options(dataset: Dataset, type_id: int) -> list[tuple[int, int, float]]:
    """(slot 1 line, slot 2 line, split level) for every distinct placement of one order."""
    lines = dataset.valid_lines(type_id)
    options = []
    for first, second in itertools.product(lines, repeat=2):
        if first == second:
            options.append((first, second, SPLIT_LEVELS[0]))
        else:
            options.extend((first, second, level) for level in SPLIT_LEVELS)
    return options


def enumerate_genomes(dataset: Dataset) -> Iterator[np.ndarray]:
    """Every decodable plan once: placements x splits x sequence permutations."""
    layout = GenomeLayout.for_dataset(dataset)
    per_order = [_order_options(dataset, order.product_type) for order in dataset.orders]
    for placements in itertools.product(*per_order):
        for keys in itertools.permutations(range(1, dataset.n + 1)):
            genome = np.empty(layout.dimension)
            genome[layout.part_a] = [line for first, second, _ in placements for line in (first, second)]
            genome[layout.part_b] = [level for _, _, level in placements]
            genome[layout.part_c] = keys
            yield genome


def exhaustive_front(dataset: Dataset, evaluator: Optional[Evaluator] = None) -> np.ndarray:
    """The exact nondominated objective set of a small instance."""
    evaluator = evaluator or (lambda genome, data: evaluate(genome, data).as_tuple())
    points = [evaluator(genome, dataset) for genome in enumerate_genomes(dataset)]
    logger.info("enumerated %s plans for %s orders on %s lines", len(points), dataset.n, dataset.m)
    return pareto_front(np.array(points, dtype=float))
