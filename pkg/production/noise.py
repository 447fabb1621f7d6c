from __future__ import annotations

from typing import Iterable, Iterator

import numpy as np

NOISE_SCOPES = ("order_day", "line_day")


class NoiseExhaustedError(RuntimeError):
    """An explicit noise stream ran out before the simulation finished."""


class LineNoise:
    """Noise for one line; `draw` is called once per (sub-order, production day) in day order."""

    def draw(self, day: int) -> float:  # pragma: no cover - interface
        raise NotImplementedError


class NoiseSource:
    def for_line(self, line_id: int) -> LineNoise:  # pragma: no cover - interface
        raise NotImplementedError


class _ZeroLine(LineNoise):
    def draw(self, day: int) -> float:
        return 0.0


class ZeroNoise(NoiseSource):
    """beta = 0: every day produces its nominal quantity."""

    def for_line(self, line_id: int) -> LineNoise:
        return _ZeroLine()


class _SequenceLine(LineNoise):
    def __init__(self, iterator: Iterator[float]):
        self._iterator = iterator

    def draw(self, day: int) -> float:
        try:
            return float(next(self._iterator))
        except StopIteration:
            raise NoiseExhaustedError(f"noise stream exhausted on day {day}") from None


class SequenceNoise(NoiseSource):
    """
    Replays an explicit stream of noise values.

    The simulator walks lines in ascending id and days in ascending order, so
    values are consumed in exactly that order across all lines.
    """

    def __init__(self, values: Iterable[float]):
        self._iterator = iter(values)

    def for_line(self, line_id: int) -> LineNoise:
        return _SequenceLine(self._iterator)


class _CounterLine(LineNoise):
    def __init__(self, rng: np.random.Generator, beta: float, scope: str):
        self._rng = rng
        self._beta = beta
        self._scope = scope
        self._day = None
        self._value = 0.0

    def draw(self, day: int) -> float:
        if self._scope == "line_day" and day == self._day:
            return self._value
        # beta * (2u - 1): the same u realises proportional noise for every beta
        self._value = self._beta * (2.0 * self._rng.random() - 1.0)
        self._day = day
        return self._value


class CounterNoise(NoiseSource):
    """
    Uniform noise on [-beta, beta] keyed by (seed, sample, line).

    Each line owns an independent numpy stream, so results do not depend on
    the order in which lines or samples are simulated.
    """

    def __init__(self, seed: int, sample: int, beta: float, scope: str = "order_day"):
        if scope not in NOISE_SCOPES:
            raise ValueError(f"unknown noise scope {scope!r}")
        if not 0 <= beta < 1:
            raise ValueError(f"beta must lie in [0, 1), got {beta}")
        self.seed = seed
        self.sample = sample
        self.beta = beta
        self.scope = scope

    def for_line(self, line_id: int) -> LineNoise:
        if self.beta == 0:
            return _ZeroLine()
        rng = np.random.default_rng(np.random.SeedSequence([self.seed, self.sample, line_id]))
        return _CounterLine(rng, self.beta, self.scope)
