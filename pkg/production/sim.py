from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, Union

import numpy as np

from .domain import Dataset, DomainError, ProductionLine, curve_efficiency
from .noise import NoiseSource, SequenceNoise, ZeroNoise

logger = logging.getLogger(__name__)

SPLIT_LEVELS = (0.2, 0.4, 0.6, 0.8)
PART_B_LOW = 0.1
PART_B_HIGH = 0.9
_FULL_DAY_EPS = 1e-9

Genome = np.ndarray


class SimulationError(RuntimeError):
    """Internal contract breach while simulating a plan."""


@dataclass(frozen=True)
class GenomeLayout:
    """
    Positions of the three genome parts for an n-order, m-line instance.

    Part A (2n): two line slots per order. Part B (n): split selector.
    Part C (n): sequence keys.
    """

    n: int
    m: int

    @property
    def dimension(self) -> int:
        return 4 * self.n

    @property
    def part_a(self) -> slice:
        return slice(0, 2 * self.n)

    @property
    def part_b(self) -> slice:
        return slice(2 * self.n, 3 * self.n)

    @property
    def part_c(self) -> slice:
        return slice(3 * self.n, 4 * self.n)

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        lower = np.empty(self.dimension)
        upper = np.empty(self.dimension)
        lower[self.part_a], upper[self.part_a] = 1.0, float(self.m)
        lower[self.part_b], upper[self.part_b] = PART_B_LOW, PART_B_HIGH
        lower[self.part_c], upper[self.part_c] = 1.0, float(self.n)
        return lower, upper

    @classmethod
    def for_dataset(cls, dataset: Dataset) -> "GenomeLayout":
        return cls(n=dataset.n, m=dataset.m)


def check_genome(genome: Genome, dataset: Dataset) -> np.ndarray:
    values = np.asarray(genome, dtype=float)
    if values.ndim != 1 or values.shape[0] != dataset.dimension:
        raise DomainError(
            f"genome length {values.size} does not match 4n = {dataset.dimension}"
        )
    if not np.all(np.isfinite(values)):
        raise DomainError("genome contains non-finite values")
    return values


def _round_half_up(value: float) -> int:
    return int(math.floor(value + 0.5))


def split_fraction(selector: float) -> float:
    """Quantise a Part B gene into one of four equal bins over [0.1, 0.9]."""
    width = (PART_B_HIGH - PART_B_LOW) / len(SPLIT_LEVELS)
    index = int(math.floor((selector - PART_B_LOW) / width))
    return SPLIT_LEVELS[min(max(index, 0), len(SPLIT_LEVELS) - 1)]


def _repair_line(line_id: int, type_id: int, dataset: Dataset) -> int:
    # circular search upward for the nearest line accepting the type
    for step in range(dataset.m):
        candidate = (line_id - 1 + step) % dataset.m + 1
        if dataset.line(candidate).accepts(type_id):
            if step:
                logger.debug("repaired line %s -> %s for type %s", line_id, candidate, type_id)
            return candidate
    raise SimulationError(f"no line accepts product type {type_id}")


def decode_line(value: float, order_type: int, dataset: Dataset) -> int:
    line_id = min(max(_round_half_up(value), 1), dataset.m)
    return _repair_line(line_id, order_type, dataset)


@dataclass(frozen=True)
class SubOrder:
    order_id: int
    index: int
    line_id: int
    quantity: int
    sequence_key: float


@dataclass(frozen=True)
class OrderAssignment:
    order_id: int
    suborders: tuple[SubOrder, ...]
    split_fraction: Optional[float] = None


@dataclass(frozen=True)
class AssignmentPlan:
    assignments: tuple[OrderAssignment, ...]

    def suborders(self) -> list[SubOrder]:
        return [sub for assignment in self.assignments for sub in assignment.suborders]

    def on_line(self, line_id: int) -> list[SubOrder]:
        return [sub for sub in self.suborders() if sub.line_id == line_id]


def decode_genome(genome: Genome, dataset: Dataset) -> AssignmentPlan:
    values = check_genome(genome, dataset)
    layout = GenomeLayout.for_dataset(dataset)
    part_a, part_b, part_c = values[layout.part_a], values[layout.part_b], values[layout.part_c]

    assignments = []
    for j, order in enumerate(dataset.orders):
        first = decode_line(part_a[2 * j], order.product_type, dataset)
        second = decode_line(part_a[2 * j + 1], order.product_type, dataset)
        key = float(part_c[j])
        if first != second:
            alpha = split_fraction(part_b[j])
            head = _round_half_up(alpha * order.quantity)
            if 0 < head < order.quantity:
                assignments.append(OrderAssignment(
                    order_id=order.id,
                    suborders=(
                        SubOrder(order.id, 0, first, head, key),
                        SubOrder(order.id, 1, second, order.quantity - head, key),
                    ),
                    split_fraction=alpha,
                ))
                continue
        assignments.append(OrderAssignment(
            order_id=order.id,
            suborders=(SubOrder(order.id, 0, first, order.quantity, key),),
        ))
    return AssignmentPlan(assignments=tuple(assignments))


def sequence_line(plan: AssignmentPlan, line: ProductionLine) -> list[SubOrder]:
    return sorted(
        plan.on_line(line.id),
        key=lambda sub: (sub.sequence_key, sub.order_id, sub.index),
    )


def daily_quantity(n_time: float, e_p: float, e_o: float, smv: float, noise: float = 0.0) -> float:
    """Pieces produced in `n_time` minutes, scaled by (1 + noise)."""
    if smv <= 0:
        raise DomainError(f"smv must be positive, got {smv}")
    return n_time * e_p * e_o / smv * (1.0 + noise)


@dataclass
class LineCursor:
    line_id: int
    capacity: float
    next_day: int = 0
    minutes_used_on_day: float = 0.0
    last_type: Optional[int] = None
    consecutive_type_days: int = 0

    def start(self, type_id: int) -> tuple[int, int, float]:
        """(first day, U_l on that day, minutes available on that day)."""
        if self.last_type is None:
            return self.next_day, 1, self.capacity
        if self.last_type == type_id:
            return self.next_day, self.consecutive_type_days, self.capacity - self.minutes_used_on_day
        if self.minutes_used_on_day > 0:
            return self.next_day + 1, 1, self.capacity
        return self.next_day, 1, self.capacity

    def finish(self, type_id: int, last_day: int, u: int, minutes_used: float) -> None:
        self.last_type = type_id
        if self.capacity - minutes_used <= _FULL_DAY_EPS:
            self.next_day = last_day + 1
            self.minutes_used_on_day = 0.0
            self.consecutive_type_days = u + 1
        else:
            self.next_day = last_day
            self.minutes_used_on_day = minutes_used
            self.consecutive_type_days = u


@dataclass(frozen=True)
class ScheduledSubOrder:
    order_id: int
    index: int
    line_id: int
    quantity: int
    a_day: int
    f_day: int
    p_time: int
    daily_quantities: tuple[float, ...]
    nominal_quantities: tuple[float, ...] = field(default=(), repr=False)


@dataclass(frozen=True)
class Schedule:
    suborders: tuple[ScheduledSubOrder, ...]

    def for_order(self, order_id: int) -> list[ScheduledSubOrder]:
        return [sub for sub in self.suborders if sub.order_id == order_id]

    def finish_day(self, order_id: int) -> int:
        return max(sub.f_day for sub in self.for_order(order_id))

    def start_day(self, order_id: int) -> int:
        return min(sub.a_day for sub in self.for_order(order_id))

    def on_line(self, line_id: int) -> list[ScheduledSubOrder]:
        return [sub for sub in self.suborders if sub.line_id == line_id]

    def gantt_rows(self) -> list[dict]:
        return [
            {
                "order": sub.order_id,
                "suborder": sub.index,
                "line": sub.line_id,
                "start": sub.a_day,
                "finish": sub.f_day,
            }
            for sub in self.suborders
        ]


NoiseInput = Union[NoiseSource, Iterable[float], None]


def simulate(plan: AssignmentPlan, dataset: Dataset, noise: NoiseInput = None) -> Schedule:
    """
    Day-by-day production of every line's sequenced sub-orders.

    A same-type successor continues on the partial day left by its predecessor
    and keeps the line's learning progress; a different-type successor starts
    on the next whole day with the learning curve reset.
    """
    if noise is None:
        source = ZeroNoise()
    elif isinstance(noise, NoiseSource):
        source = noise
    else:
        source = SequenceNoise(noise)

    scheduled: list[ScheduledSubOrder] = []
    for line in sorted(dataset.lines, key=lambda l: l.id):
        line_noise = source.for_line(line.id)
        cursor = LineCursor(line_id=line.id, capacity=line.capacity_minutes_per_day, next_day=dataset.p_day)
        for sub in sequence_line(plan, line):
            order = dataset.order(sub.order_id)
            e_p = line.efficiency(order.product_type)
            if e_p <= 0:
                raise SimulationError(
                    f"order {order.id} placed on line {line.id} which cannot sew type {order.product_type}"
                )
            curve = dataset.product_type(order.product_type).learning_curve

            a_day, u, n_time = cursor.start(order.product_type)
            day = a_day
            produced = 0.0
            realised: list[float] = []
            nominal: list[float] = []
            while True:
                e_o = curve_efficiency(curve, u)
                expected = daily_quantity(n_time, e_p, e_o, order.smv)
                quantity = expected * (1.0 + line_noise.draw(day))
                realised.append(quantity)
                nominal.append(expected)
                if produced + quantity >= sub.quantity:
                    remaining = sub.quantity - produced
                    minutes = min(n_time, remaining * order.smv / (e_p * e_o))
                    used = (cursor.capacity - n_time) + minutes
                    break
                produced += quantity
                day += 1
                u += 1
                n_time = cursor.capacity

            cursor.finish(order.product_type, day, u, used)
            p_time = len(realised)
            scheduled.append(ScheduledSubOrder(
                order_id=sub.order_id,
                index=sub.index,
                line_id=line.id,
                quantity=sub.quantity,
                a_day=a_day,
                f_day=a_day + p_time,
                p_time=p_time,
                daily_quantities=tuple(realised),
                nominal_quantities=tuple(nominal),
            ))
    return Schedule(suborders=tuple(scheduled))
