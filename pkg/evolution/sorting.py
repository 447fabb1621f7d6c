"""
Pareto machinery shared by every algorithm: dominance, nondominated fronts,
crowding distance and elitist survivor selection. All objectives are minimised.
"""
from __future__ import annotations

from typing import Iterable, Sequence, Union

import numpy as np

from production.objectives import ObjectivePoint

Points = Union[np.ndarray, Sequence[ObjectivePoint], Sequence[Sequence[float]]]


def objective_matrix(points: Points) -> np.ndarray:
    """(N, M) float array; ObjectivePoint inputs must all share one kind."""
    if isinstance(points, np.ndarray):
        matrix = points.astype(float)
        return matrix.reshape(len(matrix), -1) if matrix.size else matrix.reshape(0, 2)
    points = list(points)
    if not points:
        return np.empty((0, 2))
    if isinstance(points[0], ObjectivePoint):
        for point in points[1:]:
            points[0].check_comparable(point)
        return np.array([point.as_tuple() for point in points], dtype=float)
    return np.asarray(points, dtype=float).reshape(len(points), -1)


def dominates(a, b) -> bool:
    if isinstance(a, ObjectivePoint) and isinstance(b, ObjectivePoint):
        a.check_comparable(b)
        a, b = a.as_tuple(), b.as_tuple()
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    return bool(np.all(a <= b) and np.any(a < b))


def dominance_matrix(objectives: np.ndarray) -> np.ndarray:
    """D[i, j] is True iff point i dominates point j."""
    left = objectives[:, None, :]
    right = objectives[None, :, :]
    return np.all(left <= right, axis=2) & np.any(left < right, axis=2)


def fast_nondominated_sort(points: Points) -> list[list[int]]:
    """Fronts F0, F1, ... as ascending index lists."""
    objectives = objective_matrix(points)
    if len(objectives) == 0:
        return []
    dominated = dominance_matrix(objectives)
    counts = dominated.sum(axis=0)
    fronts = []
    current = np.flatnonzero(counts == 0)
    while current.size:
        fronts.append(current.tolist())
        counts = counts - dominated[current].sum(axis=0)
        counts[current] = -1
        current = np.flatnonzero(counts == 0)
    return fronts


def crowding_distance(points: Points) -> np.ndarray:
    objectives = objective_matrix(points)
    size, n_objectives = objectives.shape
    distance = np.zeros(size)
    if size <= 2:
        distance[:] = np.inf
        return distance
    for k in range(n_objectives):
        values = objectives[:, k]
        order = list(np.argsort(values, kind="stable"))
        # ties at the top end: the lowest index other than the bottom boundary closes the front
        top = [i for i in order if values[i] == values[order[-1]] and i != order[0]]
        if top:
            order.remove(min(top))
            order.append(min(top))
        order = np.array(order)
        sorted_values = values[order]
        span = sorted_values[-1] - sorted_values[0]
        if span > 0:
            distance[order[1:-1]] += (sorted_values[2:] - sorted_values[:-2]) / span
        distance[order[0]] = distance[order[-1]] = np.inf
    return distance


def assign_rank_and_crowding(points: Points) -> tuple[np.ndarray, np.ndarray]:
    objectives = objective_matrix(points)
    rank = np.zeros(len(objectives), dtype=int)
    crowding = np.zeros(len(objectives))
    for level, front in enumerate(fast_nondominated_sort(objectives)):
        rank[front] = level
        crowding[front] = crowding_distance(objectives[front])
    return rank, crowding


def crowded_order(front: Sequence[int], crowding: Sequence[float]) -> list[int]:
    """Members of `front` by crowding descending, ties by index."""
    return [front[i] for i in sorted(range(len(front)), key=lambda i: (-crowding[i], front[i]))]


def select_next_generation(points: Points, size: int) -> list[int]:
    """Indices of `size` survivors: whole fronts first, then the least crowded of the split front."""
    objectives = objective_matrix(points)
    chosen: list[int] = []
    for front in fast_nondominated_sort(objectives):
        room = size - len(chosen)
        if room <= 0:
            break
        if len(front) <= room:
            chosen.extend(front)
        else:
            chosen.extend(crowded_order(front, crowding_distance(objectives[front]))[:room])
    return chosen


def pareto_front(points: Points) -> np.ndarray:
    """Distinct nondominated points, sorted by f1 then f2."""
    objectives = objective_matrix(points)
    if len(objectives) == 0:
        return objectives
    front = objectives[fast_nondominated_sort(objectives)[0]]
    return np.unique(front, axis=0)


def aggregate_pareto(runs: Iterable[Points]) -> np.ndarray:
    """Front 0 of the union of several runs' final populations."""
    matrices = [objective_matrix(run) for run in runs]
    matrices = [m for m in matrices if len(m)]
    if not matrices:
        return np.empty((0, 2))
    return pareto_front(np.vstack(matrices))
