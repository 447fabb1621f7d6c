from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Mapping, Optional

import numpy as np

from .domain import Dataset, DomainError, Order
from .noise import CounterNoise
from .sim import Genome, Schedule, decode_genome, simulate

DETERMINISTIC = "deterministic"
ROBUST = "robust"


class ObjectiveKindError(TypeError):
    """Deterministic and robust points (or robust points of different H, beta) were compared."""


@dataclass(frozen=True)
class ObjectivePoint:
    f1: float
    f2: float
    kind: str = DETERMINISTIC
    h_samples: Optional[int] = None
    beta: Optional[float] = None

    @classmethod
    def deterministic(cls, f1: float, f2: float) -> "ObjectivePoint":
        return cls(f1=float(f1), f2=float(f2))

    @classmethod
    def robust(cls, f1: float, f2: float, h_samples: int, beta: float) -> "ObjectivePoint":
        return cls(f1=float(f1), f2=float(f2), kind=ROBUST, h_samples=h_samples, beta=beta)

    @property
    def signature(self) -> tuple:
        return (self.kind, self.h_samples, self.beta)

    def as_tuple(self) -> tuple[float, float]:
        return (self.f1, self.f2)

    def check_comparable(self, other: "ObjectivePoint") -> None:
        if self.signature != other.signature:
            raise ObjectiveKindError(f"cannot compare {self.signature} with {other.signature}")


@dataclass(frozen=True)
class ConservativeStarts:
    s_day: int
    c_days: Mapping[int, int]

    def __getitem__(self, order_id: int) -> int:
        return self.c_days[order_id]

    def __iter__(self) -> Iterator[int]:
        return iter(self.c_days)


def conservative_start(order: Order, s_day: int, p_day: int = 0) -> int:
    """
    Earliest safe production day for `order` when scheduling on `s_day`.

    Only the unfinished event with the largest offset matters: if it needs
    more lead time than p_day - s_day provides, the start is pushed back by
    the difference.
    """
    if s_day > p_day:
        raise DomainError(f"s_day {s_day} lies after p_day {p_day}")
    lead = p_day - s_day
    longest = max((abs(e.offset_days) for e in order.events if not e.finished), default=0)
    if longest > lead:
        return p_day + longest - lead
    return p_day


def conservative_starts(dataset: Dataset) -> ConservativeStarts:
    return ConservativeStarts(
        s_day=dataset.s_day,
        c_days={order.id: conservative_start(order, dataset.s_day, dataset.p_day) for order in dataset.orders},
    )


def h(x: float) -> float:
    return max(0.0, -x)


def total_tardiness(schedule: Schedule, dataset: Dataset) -> float:
    return float(sum(h(order.due_day - schedule.finish_day(order.id)) for order in dataset.orders))


def total_clashes(schedule: Schedule, starts: ConservativeStarts) -> float:
    return float(sum(h(schedule.start_day(order_id) - c_day) for order_id, c_day in starts.c_days.items()))


def evaluate(genome: Genome, dataset: Dataset) -> ObjectivePoint:
    schedule = simulate(decode_genome(genome, dataset), dataset)
    return ObjectivePoint.deterministic(
        total_tardiness(schedule, dataset),
        total_clashes(schedule, conservative_starts(dataset)),
    )


def robust_objectives(
    genome: Genome,
    dataset: Dataset,
    h_samples: int,
    beta: float,
    rng_seed: int,
    noise_scope: str = "order_day",
) -> ObjectivePoint:
    """Mean (f1, f2) over `h_samples` noisy simulations of one decoded plan."""
    if h_samples < 1:
        raise DomainError(f"h_samples must be >= 1, got {h_samples}")
    plan = decode_genome(genome, dataset)
    starts = conservative_starts(dataset)
    # without noise every sample replays the same schedule
    draws = 1 if beta == 0 else h_samples
    samples = np.empty((draws, 2))
    for sample in range(draws):
        schedule = simulate(plan, dataset, CounterNoise(rng_seed, sample, beta, noise_scope))
        samples[sample] = (total_tardiness(schedule, dataset), total_clashes(schedule, starts))
    f1, f2 = samples.mean(axis=0)
    return ObjectivePoint.robust(f1, f2, h_samples=h_samples, beta=beta)
