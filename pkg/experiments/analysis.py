from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
import pandas as pd
from scipy.stats import binomtest

from evolution.sorting import dominates, objective_matrix

BOUNDARIES = ("min_f1", "min_f2")


def boundary_points(front) -> tuple[np.ndarray, np.ndarray]:
    """The min-f1 and min-f2 extremes of a front, ties broken by the other objective."""
    points = objective_matrix(front)
    if len(points) == 0:
        raise ValueError("an empty front has no boundary points")
    by_f1 = points[np.lexsort((points[:, 1], points[:, 0]))[0]]
    by_f2 = points[np.lexsort((points[:, 0], points[:, 1]))[0]]
    return by_f1, by_f2


def boundary_stats(fronts: Sequence) -> pd.DataFrame:
    """
    Mean and sample standard deviation of each boundary point across runs.

    One row per boundary (`min_f1`, `min_f2`); a single run reports std 0.
    """
    rows = []
    for front in fronts:
        by_f1, by_f2 = boundary_points(front)
        rows.append({"boundary": "min_f1", "f1": by_f1[0], "f2": by_f1[1]})
        rows.append({"boundary": "min_f2", "f1": by_f2[0], "f2": by_f2[1]})
    frame = pd.DataFrame(rows, columns=["boundary", "f1", "f2"])
    grouped = frame.groupby("boundary", sort=False)
    stats = grouped.agg(
        f1_mean=("f1", "mean"),
        f1_std=("f1", "std"),
        f2_mean=("f2", "mean"),
        f2_std=("f2", "std"),
        runs=("f1", "size"),
    )
    stats[["f1_std", "f2_std"]] = stats[["f1_std", "f2_std"]].fillna(0.0)
    return stats.reindex(list(BOUNDARIES)).reset_index()


def boundary_dominance(stats_a: pd.DataFrame, stats_b: pd.DataFrame) -> dict:
    """Per boundary: is the mean point of `a` left undominated by that of `b`?"""
    a = stats_a.set_index("boundary")
    b = stats_b.set_index("boundary")
    outcome = {}
    for boundary in BOUNDARIES:
        mean_a = (a.loc[boundary, "f1_mean"], a.loc[boundary, "f2_mean"])
        mean_b = (b.loc[boundary, "f1_mean"], b.loc[boundary, "f2_mean"])
        outcome[boundary] = not dominates(mean_b, mean_a)
    return outcome


@dataclass(frozen=True)
class SignTest:
    positives: int
    negatives: int
    ties: int
    p_value: float

    def significant(self, alpha: float = 0.05) -> bool:
        return self.p_value < alpha


def beta_shift_sign_test(lower_beta: Sequence[float], higher_beta: Sequence[float]) -> SignTest:
    """
    One-sided sign test that matched values grow with the uncertainty level.

    Pairs are matched by position (seed); ties are dropped.
    """
    low = np.asarray(lower_beta, dtype=float)
    high = np.asarray(higher_beta, dtype=float)
    if low.shape != high.shape:
        raise ValueError("sign test needs matched samples")
    difference = high - low
    positives = int(np.sum(difference > 0))
    negatives = int(np.sum(difference < 0))
    ties = int(np.sum(difference == 0))
    trials = positives + negatives
    p_value = binomtest(positives, trials, 0.5, alternative="greater").pvalue if trials else 1.0
    return SignTest(positives, negatives, ties, float(p_value))


def front_mean_f1(front) -> float:
    return float(objective_matrix(front)[:, 0].mean())
