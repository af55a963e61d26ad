"""Trains, objective weights, train paths and the platforming objective."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Iterable, Mapping

if TYPE_CHECKING:
    from .network import STArc


@dataclass(frozen=True)
class Weights:
    w1: float = 1  # travel time
    w2: float = 1  # arrival/departure shift

    def __post_init__(self):
        if self.w1 < 0 or self.w2 < 0 or (self.w1 == 0 and self.w2 == 0):
            raise ValueError(f"invalid weights ({self.w1}, {self.w2})")


@dataclass(frozen=True)
class Train:
    """A train to platform.

    Times are seconds from the horizon start. Shift windows are offsets relative
    to the desired times, e.g. ``(-60, 120)``. Dwell bounds count macro periods
    spent on siding waiting arcs.
    """

    id: str
    origin: str
    destination: str
    desired_arrival: int
    desired_departure: int
    arrival_window: tuple[int, int] = (0, 0)
    departure_window: tuple[int, int] = (0, 0)
    dwell_min: int = 0
    dwell_max: int = 0
    stops: bool = True
    cancellation_cost: float | None = None

    def __post_init__(self):
        if self.desired_departure < self.desired_arrival:
            raise ValueError(f"train {self.id}: desired departure precedes arrival")
        if not 0 <= self.dwell_min <= self.dwell_max:
            raise ValueError(f"train {self.id}: dwell bounds {self.dwell_min}..{self.dwell_max}")
        for lo, hi in (self.arrival_window, self.departure_window):
            if lo > hi:
                raise ValueError(f"train {self.id}: empty shift window ({lo}, {hi})")

    @property
    def max_arrival_shift(self) -> int:
        return max(abs(v) for v in self.arrival_window)

    @property
    def max_departure_shift(self) -> int:
        return max(abs(v) for v in self.departure_window)


def default_cancellation_cost(train: Train, weights: Weights, horizon: int) -> float:
    # strictly above any schedulable path of the train
    return weights.w1 * horizon + weights.w2 * (train.max_arrival_shift + train.max_departure_shift) + 1


def cancellation_cost(train: Train, weights: Weights, horizon: int) -> float:
    if train.cancellation_cost is not None:
        return train.cancellation_cost
    return default_cancellation_cost(train, weights, horizon)


@dataclass(frozen=True)
class TrainPath:
    """Space-time path of one train; an empty arc tuple or a lone virtual arc means cancelled."""

    train: str
    arcs: tuple["STArc", ...]
    granularity: int  # seconds per macro period

    @property
    def cancelled(self) -> bool:
        return not self.arcs or any(a.kind == "virtual_path" for a in self.arcs)

    def _one(self, kind):
        found = [a for a in self.arcs if a.kind == kind]
        if len(found) != 1:
            raise ValueError(f"train {self.train}: expected one {kind} arc, found {len(found)}")
        return found[0]

    @property
    def arrival_arc(self) -> "STArc":
        return self._one("arrival")

    @property
    def departure_arc(self) -> "STArc":
        return self._one("departure")

    @property
    def platform(self) -> str | None:
        return None if self.cancelled else self.arrival_arc.end_node

    @property
    def arrival_time(self) -> int:
        return self.arrival_arc.end * self.granularity

    @property
    def departure_time(self) -> int:
        return self.departure_arc.start * self.granularity

    @property
    def dwell(self) -> int:
        return sum(1 for a in self.arcs if a.kind == "siding_wait")

    @property
    def travel_time(self) -> int:
        if self.cancelled:
            return 0
        return sum(a.running_time for a in self.arcs if a.kind != "virtual_path")


def shift_components(path: TrainPath, train: Train) -> tuple[int, int]:
    """Absolute arrival and departure deviations in seconds."""
    if path.cancelled:
        raise ValueError(f"train {train.id} is cancelled; shifts are undefined")
    return (abs(path.arrival_time - train.desired_arrival),
            abs(path.departure_time - train.desired_departure))


@dataclass(frozen=True)
class ObjectiveBreakdown:
    travel: float
    shift: float
    cancellation: float
    n_cancelled: int

    @property
    def total(self) -> float:
        return self.travel + self.shift + self.cancellation


def objective_breakdown(paths: Mapping[str, TrainPath], trains: Iterable[Train],
                        weights: Weights, horizon: int) -> ObjectiveBreakdown:
    travel = shift = canc = 0.0
    n_canc = 0
    for train in trains:
        if train.id not in paths:
            raise ValueError(f"train {train.id} has neither a path nor a cancellation")
        p = paths[train.id]
        if p.cancelled:
            canc += cancellation_cost(train, weights, horizon)
            n_canc += 1
            continue
        if p.arrival_arc.start_node != train.origin or p.departure_arc.end_node != train.destination:
            raise ValueError(f"train {train.id}: path does not join {train.origin} to {train.destination}")
        travel += weights.w1 * p.travel_time
        shift += weights.w2 * sum(shift_components(p, train))
    return ObjectiveBreakdown(travel, shift, canc, n_canc)


def objective_value(paths: Mapping[str, TrainPath], trains: Iterable[Train],
                    weights: Weights, horizon: int) -> float:
    return objective_breakdown(paths, trains, weights, horizon).total


@dataclass
class Solution:
    paths: dict[str, TrainPath]
    objective: float
    lower_bound: float | None = None
    iterations: int = 0
    wall_time: float = 0.0
    meta: dict = field(default_factory=dict)

    @property
    def gap(self) -> float | None:
        if self.lower_bound is None or self.objective == 0:
            return None
        return (self.objective - self.lower_bound) / self.objective
