from __future__ import annotations

import bisect
from dataclasses import dataclass, field, replace
from typing import Mapping

# Problem-instance model for sewing-line order scheduling. Instances are immutable.


class DomainError(ValueError):
    """An operation was called outside its domain (e.g. day 0 on a learning curve)."""


@dataclass(frozen=True)
class LearningCurve:
    # (consecutive_day, efficiency) pairs, strictly increasing in day
    breakpoints: tuple[tuple[int, float], ...]

    @property
    def saturation_efficiency(self) -> float:
        return self.breakpoints[-1][1]

    @property
    def days(self) -> list[int]:
        return [day for day, _ in self.breakpoints]

    @classmethod
    def flat(cls, efficiency: float = 1.0) -> "LearningCurve":
        return cls(breakpoints=((1, efficiency),))


def curve_efficiency(curve: LearningCurve, consecutive_day: int) -> float:
    """
    Piecewise-constant lookup of the efficiency reached after `consecutive_day`
    days on the same product type.

    Returns the efficiency of the greatest breakpoint day <= consecutive_day;
    past the last breakpoint the saturation value is returned.
    """
    if consecutive_day < 1:
        raise DomainError(f"consecutive_day must be >= 1, got {consecutive_day}")
    if consecutive_day >= curve.days[-1]:
        return curve.saturation_efficiency
    position = bisect.bisect_right(curve.days, consecutive_day)
    if position == 0:
        # first breakpoint starts after day 1; the ramp has not begun yet
        return curve.breakpoints[0][1]
    return curve.breakpoints[position - 1][1]


@dataclass(frozen=True)
class ProductType:
    id: int
    name: str
    learning_curve: LearningCurve


@dataclass(frozen=True)
class ProductionLine:
    id: int
    efficiency_by_type: Mapping[int, float]
    capacity_minutes_per_day: float

    def efficiency(self, type_id: int) -> float:
        return float(self.efficiency_by_type.get(type_id, 0.0))

    def accepts(self, type_id: int) -> bool:
        return self.efficiency(type_id) > 0.0


@dataclass(frozen=True)
class PreProductionEvent:
    name: str
    offset_days: int
    finished: bool
    # finished-flag snapshots keyed by the s_day the schedule is made on
    progress: Mapping[int, bool] = field(default_factory=dict)


@dataclass(frozen=True)
class Order:
    id: int
    product_type: int
    quantity: int
    due_day: int
    smv: float
    events: tuple[PreProductionEvent, ...] = ()


@dataclass(frozen=True)
class CapacityReport:
    workload_minutes: float
    daily_capacity_minutes: float
    min_makespan_days: float
    max_due_day: int

    @property
    def covered(self) -> bool:
        return self.min_makespan_days <= self.max_due_day


@dataclass(frozen=True)
class Dataset:
    lines: tuple[ProductionLine, ...]
    orders: tuple[Order, ...]
    types: tuple[ProductType, ...]
    s_day: int
    p_day: int = 0
    name: str = ""
    _lines_by_id: dict = field(default_factory=dict, init=False, repr=False, compare=False)
    _orders_by_id: dict = field(default_factory=dict, init=False, repr=False, compare=False)

    def __post_init__(self):
        # ids, not list positions, address lines and orders
        object.__setattr__(self, "_lines_by_id", {line.id: line for line in self.lines})
        object.__setattr__(self, "_orders_by_id", {order.id: order for order in self.orders})

    @property
    def n(self) -> int:
        return len(self.orders)

    @property
    def m(self) -> int:
        return len(self.lines)

    @property
    def dimension(self) -> int:
        return 4 * self.n

    def line(self, line_id: int) -> ProductionLine:
        return self._lines_by_id[line_id]

    def order(self, order_id: int) -> Order:
        return self._orders_by_id[order_id]

    def product_type(self, type_id: int) -> ProductType:
        for product_type in self.types:
            if product_type.id == type_id:
                return product_type
        raise KeyError(type_id)

    def valid_lines(self, type_id: int) -> list[int]:
        return [line.id for line in self.lines if line.accepts(type_id)]

    def at_scenario(self, s_day: int) -> "Dataset":
        """Event progress as known when the schedule is made on `s_day`."""
        orders = tuple(
            replace(
                order,
                events=tuple(
                    replace(event, finished=event.progress.get(s_day, event.finished))
                    for event in order.events
                ),
            )
            for order in self.orders
        )
        return replace(self, orders=orders, s_day=s_day)

    def without_events(self) -> "Dataset":
        orders = tuple(
            replace(order, events=tuple(replace(event, finished=True) for event in order.events))
            for order in self.orders
        )
        return replace(self, orders=orders)

    def with_flat_curves(self) -> "Dataset":
        types = tuple(replace(t, learning_curve=LearningCurve.flat()) for t in self.types)
        return replace(self, types=types)

    def capacity_report(self) -> CapacityReport:
        """Aggregate load vs capacity at each order's best line efficiency."""
        workload = 0.0
        for order in self.orders:
            best = max((line.efficiency(order.product_type) for line in self.lines), default=0.0)
            if best > 0:
                workload += order.quantity * order.smv / best
        daily = sum(line.capacity_minutes_per_day for line in self.lines)
        return CapacityReport(
            workload_minutes=workload,
            daily_capacity_minutes=daily,
            min_makespan_days=workload / daily if daily > 0 else float("inf"),
            max_due_day=max((order.due_day for order in self.orders), default=self.p_day),
        )


@dataclass(frozen=True)
class Violation:
    code: str
    message: str
    path: str = ""


def _contiguous(ids: list[int]) -> bool:
    return sorted(ids) == list(range(1, len(ids) + 1))


def validate_dataset(dataset: Dataset) -> list[Violation]:
    """Every invariant violation of `dataset`; an empty list means valid."""
    violations: list[Violation] = []

    def add(code, message, path=""):
        violations.append(Violation(code=code, message=message, path=path))

    type_ids = [t.id for t in dataset.types]
    if len(set(type_ids)) != len(type_ids):
        add("duplicate_type_id", "product type ids are not unique", "product_types")
    elif not _contiguous(type_ids):
        add("noncontiguous_type_ids", "product type ids must run 1..p", "product_types")

    for index, product_type in enumerate(dataset.types):
        path = f"product_types[{index}].learning_curve"
        points = product_type.learning_curve.breakpoints
        if not points:
            add("empty_curve", f"type {product_type.id}: learning curve has no breakpoints", path)
            continue
        days = [day for day, _ in points]
        values = [value for _, value in points]
        if days[0] < 1 or any(b <= a for a, b in zip(days, days[1:])):
            add("curve_days_not_increasing", f"type {product_type.id}: breakpoint days must be >= 1 and strictly increasing", path)
        if any(b < a for a, b in zip(values, values[1:])):
            add("curve_efficiency_decreasing", f"type {product_type.id}: efficiencies must be nondecreasing", path)
        if any(not 0 < value <= 1 for value in values):
            add("curve_efficiency_range", f"type {product_type.id}: efficiencies must lie in (0, 1]", path)

    line_ids = [line.id for line in dataset.lines]
    if len(set(line_ids)) != len(line_ids):
        add("duplicate_line_id", "line ids are not unique", "lines")
    elif not _contiguous(line_ids):
        add("noncontiguous_line_ids", "line ids must run 1..m", "lines")

    known_types = set(type_ids)
    for index, line in enumerate(dataset.lines):
        path = f"lines[{index}]"
        if line.capacity_minutes_per_day <= 0:
            add("nonpositive_capacity", f"line {line.id}: nonpositive capacity", f"{path}.capacity_minutes_per_day")
        for type_id, efficiency in line.efficiency_by_type.items():
            if type_id not in known_types:
                add("unknown_product_type", f"line {line.id}: efficiency for unknown type {type_id}", f"{path}.efficiency_by_type")
            if not 0 <= efficiency <= 1:
                add("efficiency_range", f"line {line.id}: efficiency {efficiency} outside [0, 1]", f"{path}.efficiency_by_type")

    order_ids = [order.id for order in dataset.orders]
    if len(set(order_ids)) != len(order_ids):
        add("duplicate_order_id", "order ids are not unique", "orders")
    elif not _contiguous(order_ids):
        add("noncontiguous_order_ids", "order ids must run 1..n", "orders")

    for index, order in enumerate(dataset.orders):
        path = f"orders[{index}]"
        if order.quantity <= 0:
            add("nonpositive_quantity", f"order {order.id}: nonpositive quantity", f"{path}.quantity")
        if order.smv <= 0:
            add("nonpositive_smv", f"order {order.id}: nonpositive smv", f"{path}.smv")
        if order.product_type not in known_types:
            add("unknown_product_type", f"order {order.id}: unknown product type {order.product_type}", f"{path}.product_type")
        elif not dataset.valid_lines(order.product_type):
            add("unschedulable_order", f"order {order.id}: unschedulable order, no line accepts type {order.product_type}", path)
        for event_index, event in enumerate(order.events):
            if event.offset_days > 0:
                add("positive_event_offset", f"order {order.id}: event {event.name!r} has a positive offset", f"{path}.events[{event_index}].offset_days")

    if dataset.p_day != 0:
        add("p_day_nonzero", "production begins on day 0", "p_day")
    if dataset.s_day > dataset.p_day:
        add("s_day_after_p_day", "the schedule must be made on or before the production start", "s_day")

    return violations
