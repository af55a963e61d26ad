"""Built-in station layouts, synthetic timetables and disruption scenarios."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

from .infrastructure import (InterlockingMode, NodeKind, PhysicalNode, PhysicalRoute, RouteKind, Station,
                             SwitchGroup)
from .instance import BalanceParams, Instance, InstanceError
from .network import TimeGrid
from .timetable import Train, Weights

LINES = ("A", "B")


def _route(kind, origin, dest, sgs, running_time):
    return PhysicalRoute(f"{origin}-{dest}", origin, dest, running_time, kind, tuple(sgs))


def _throat_routes(side: str, sg: dict, near: dict[str, list[str]], mains: dict[str, tuple[str, str]]):
    """Routes of one station throat.

    ``sg`` names the throat's switch groups, ``near[line]`` lists the sidings
    adjacent to that line's tracks and ``mains[line]`` holds the (arriving,
    departing) mainline through this throat.
    """
    routes = []
    for line in LINES:
        enter, leave = f"E{line}_{side}", f"L{line}_{side}"
        for s_line in LINES:
            for s in near[s_line]:
                if s_line == line:
                    inb = [(sg[f"in_{line}"], 30), (sg[f"fan_{s_line}"], 60)]
                    outb = [(sg[f"fan_{s_line}"], 30), (sg[f"out_{line}"], 60)]
                    t = 60
                else:
                    inb = [(sg[f"in_{line}"], 30), (sg["cross"], 60), (sg[f"fan_{s_line}"], 90)]
                    outb = [(sg[f"fan_{s_line}"], 30), (sg["cross"], 60), (sg[f"out_{line}"], 90)]
                    t = 90
                routes.append(_route(RouteKind.INBOUND, enter, s, inb, t))
                routes.append(_route(RouteKind.OUTBOUND, s, leave, outb, t))
        arr_main, dep_main = mains[line]
        routes.append(_route(RouteKind.INBOUND, enter, arr_main, [(sg[f"in_{line}"], 30)], 45))
        routes.append(_route(RouteKind.OUTBOUND, dep_main, leave, [(sg[f"out_{line}"], 45)], 45))
    return routes


def virtual_station(headway: int = 30, mode: InterlockingMode | str = InterlockingMode.SECTIONAL_RELEASE) -> Station:
    """Small two-line station: four sidings, four mainlines, 20 inbound and 20 outbound routes.

    Switch groups carry odd numbers in the left throat and even numbers in the
    right throat. Eastbound trains enter on the left and leave on the right.
    """
    sidings = ["S1", "S2", "S3", "S4"]
    near = {"A": ["S1", "S2"], "B": ["S3", "S4"]}
    nodes = [PhysicalNode(s, NodeKind.SIDING) for s in sidings]
    nodes += [PhysicalNode(f"M{line}_{d}", NodeKind.MAINLINE) for line in LINES for d in "EW"]
    for side in "LR":
        for line in LINES:
            nodes.append(PhysicalNode(f"E{line}_{side}", NodeKind.ENTERING))
            nodes.append(PhysicalNode(f"L{line}_{side}", NodeKind.LEAVING))
    left = {"in_A": "SG1", "out_A": "SG3", "in_B": "SG5", "out_B": "SG7", "cross": "SG9",
            "fan_A": "SG11", "fan_B": "SG13"}
    right = {"in_A": "SG2", "out_A": "SG4", "in_B": "SG6", "out_B": "SG8", "cross": "SG10",
             "fan_A": "SG12", "fan_B": "SG14"}
    # eastbound trains arrive on the left onto M?_E and leave to the right from it
    routes = _throat_routes("L", left, near, {line: (f"M{line}_E", f"M{line}_W") for line in LINES})
    routes += _throat_routes("R", right, near, {line: (f"M{line}_W", f"M{line}_E") for line in LINES})
    sgs = [SwitchGroup(f"SG{i}") for i in range(1, 15)]
    return Station(tuple(nodes), tuple(routes), tuple(sgs), headway, headway, InterlockingMode(mode))


def large_station(headway: int = 30, mode: InterlockingMode | str = InterlockingMode.SECTIONAL_RELEASE,
                  track1_closed: bool = True) -> Station:
    """Synthetic two-line hub with 13 sidings and 4 mainlines.

    Each line serves its own fan of sidings directly; the other line's fan is
    reached through a crossover. Running time grows with the siding's distance
    from the line's mainline, so unbalanced use is the unconstrained optimum.
    Track 1 is closed all day by default (kept for dedicated units).
    """
    fan = {"A": [f"T{i}" for i in range(1, 8)], "B": [f"T{i}" for i in range(8, 14)]}
    nodes = [PhysicalNode(s, NodeKind.SIDING) for line in LINES for s in fan[line]]
    nodes += [PhysicalNode(f"M{line}_{d}", NodeKind.MAINLINE) for line in LINES for d in "EW"]
    for side in "LR":
        for line in LINES:
            nodes.append(PhysicalNode(f"E{line}_{side}", NodeKind.ENTERING))
            nodes.append(PhysicalNode(f"L{line}_{side}", NodeKind.LEAVING))
    sgs: list[str] = []
    routes = []
    for side, base in (("L", 1), ("R", 2)):
        def sg(i):
            name = f"SG{base + 2 * i}"
            if name not in sgs:
                sgs.append(name)
            return name
        g = {"in_A": sg(0), "out_A": sg(1), "in_B": sg(2), "out_B": sg(3), "cross": sg(4)}
        # two fan levels per line: near tracks and far tracks
        for line in LINES:
            g[f"fan1_{line}"] = sg(5 if line == "A" else 7)
            g[f"fan2_{line}"] = sg(6 if line == "A" else 8)
        mains = {line: (f"M{line}_E", f"M{line}_W") if side == "L" else (f"M{line}_W", f"M{line}_E")
                 for line in LINES}
        for line in LINES:
            enter, leave = f"E{line}_{side}", f"L{line}_{side}"
            for s_line in LINES:
                for rank, s in enumerate(sorted(fan[s_line], key=lambda x: -int(x[1:]) if s_line == "A"
                                                else int(x[1:]))):
                    far = rank >= 3
                    fans = [g[f"fan1_{s_line}"]] + ([g[f"fan2_{s_line}"]] if far else [])
                    base_t = 60 + 15 * rank
                    if s_line == line:
                        seq_in = [g[f"in_{line}"], *fans]
                    else:
                        seq_in = [g[f"in_{line}"], g["cross"], *fans]
                        base_t += 30
                    seq_out = [*reversed(seq_in[1:]), g[f"out_{line}"]]
                    offs = [min(30 * (i + 1), base_t) for i in range(len(seq_in) - 1)] + [base_t]
                    routes.append(_route(RouteKind.INBOUND, enter, s, zip(seq_in, offs), base_t))
                    routes.append(_route(RouteKind.OUTBOUND, s, leave, zip(seq_out, offs), base_t))
            arr_main, dep_main = mains[line]
            routes.append(_route(RouteKind.INBOUND, enter, arr_main, [(g[f"in_{line}"], 30)], 45))
            routes.append(_route(RouteKind.OUTBOUND, dep_main, leave, [(g[f"out_{line}"], 45)], 45))
    closures = (("T1", 0),) if track1_closed else ()
    return Station(tuple(nodes), tuple(routes), tuple(SwitchGroup(s) for s in sgs), headway, headway,
                   InterlockingMode(mode), closures)


@dataclass(frozen=True)
class TrainMix:
    stop_share: float = 0.75
    dwell_choices: tuple[int, ...] = (120, 180, 240)  # desired dwell, seconds
    arrival_window: tuple[int, int] = (0, 120)
    departure_window: tuple[int, int] = (0, 120)
    extra_dwell: int = 120
    long_dwell_share: float = 0.0  # originating/terminating-like trains
    long_dwell_choices: tuple[int, ...] = (600, 900, 1200)


def random_trains(rng: np.random.Generator, n: int, horizon: int, granularity: int,
                  start: int, end: int, mix: TrainMix = TrainMix(), prefix: str = "F") -> list[Train]:
    """Trains with desired arrivals uniform on ``[start, end]`` (multiples of ``granularity``)."""
    trains = []
    lo_a, hi_a = mix.arrival_window
    lo_d, hi_d = mix.departure_window
    for i in range(n):
        east = bool(rng.integers(2))
        side_in, side_out = ("L", "R") if east else ("R", "L")
        stops = bool(rng.random() < mix.stop_share)
        line_in = LINES[int(rng.integers(2))]
        line_out = LINES[int(rng.integers(2))] if stops else line_in
        if stops:
            choices = mix.long_dwell_choices if rng.random() < mix.long_dwell_share else mix.dwell_choices
            dwell = int(choices[int(rng.integers(len(choices)))])
        else:
            dwell = 0
        latest = horizon - dwell - hi_d - 300
        arr = int(rng.integers(start // granularity, min(end, latest) // granularity + 1)) * granularity
        if stops:
            d_min = -(-dwell // granularity)
            d_max = -(-(dwell + mix.extra_dwell) // granularity)
            w_a, w_d = (lo_a, hi_a), (lo_d, hi_d)
        else:
            d_min = d_max = 0
            w_a = w_d = (lo_a, hi_a)
        trains.append(Train(
            id=f"{prefix}{i + 1}", origin=f"E{line_in}_{side_in}", destination=f"L{line_out}_{side_out}",
            desired_arrival=arr, desired_departure=arr + dwell, arrival_window=w_a, departure_window=w_d,
            dwell_min=d_min, dwell_max=d_max, stops=stops,
        ))
    return trains


def generate_virtual_station(seed: int, n_trains: int, horizon: int = 2400, granularity: int = 15,
                             micro_granularity: int | None = None, headway: int = 30,
                             mode: InterlockingMode | str = InterlockingMode.SECTIONAL_RELEASE,
                             span: int | None = None, mix: TrainMix = TrainMix(),
                             weights: Weights = Weights(1, 1)) -> Instance:
    """Random instance on the small virtual station (40 min, 15 s, 30 s headways, unit weights)."""
    if n_trains < 1:
        raise ValueError("n_trains must be at least 1")
    latest = horizon - max(mix.dwell_choices) - mix.departure_window[1] - 300
    if latest < 120:
        raise InstanceError(f"horizon {horizon} s is too short for any feasible train")
    rng = np.random.default_rng(seed)
    first = 120
    last = latest if span is None else min(latest, first + span)
    trains = random_trains(rng, n_trains, horizon, granularity, first, last, mix)
    return Instance(virtual_station(headway, mode), TimeGrid(horizon, granularity, micro_granularity),
                    trains, weights, name=f"virtual-{n_trains}-s{seed}",
                    meta={"generator": "virtual_station", "seed": seed})


# W287 / E190 / M190 / L190 shapes: share of originating/terminating (long dwell) trains
LARGE_SETS = {"W287": (287, 0.15), "E190": (190, 0.3), "M190": (190, 0.05), "L190": (190, 0.3)}


def generate_large_station(seed: int, n_trains: int = 287, start: int = 0, duration: int = 72000,
                           granularity: int = 15, headway: int = 30, long_dwell_share: float = 0.15,
                           arrival_window: tuple[int, int] = (-600, 600), extra_dwell: int = 300,
                           mode: InterlockingMode | str = InterlockingMode.SECTIONAL_RELEASE,
                           balance: BalanceParams = BalanceParams()) -> Instance:
    """Synthetic timetable on the 13-siding hub (full day 04:30-00:30 by default).

    The real timetable is not public; trains are drawn to match its aggregate
    shape only and the instance is labelled synthetic.
    """
    rng = np.random.default_rng(seed)
    mix = TrainMix(stop_share=0.8, dwell_choices=(120, 180, 240, 300), arrival_window=arrival_window,
                   departure_window=(arrival_window[0], arrival_window[1] + extra_dwell),
                   extra_dwell=extra_dwell, long_dwell_share=long_dwell_share)
    margin = 600 + max(mix.long_dwell_choices) + mix.departure_window[1]
    horizon = start + duration + margin
    horizon += (-horizon) % granularity
    first = max(start, -arrival_window[0] + 120)
    trains = random_trains(rng, n_trains, horizon, granularity, first, start + duration, mix, prefix="G")
    trains.sort(key=lambda t: (t.desired_arrival, t.id))
    return Instance(large_station(headway, mode), TimeGrid(horizon, granularity), trains, Weights(1, 1),
                    balance, name=f"large-{n_trains}-s{seed}",
                    meta={"generator": "large_station", "seed": seed, "synthetic": True})


@dataclass(frozen=True)
class Delays:
    window: tuple[int, int]  # desired arrivals in this interval are delayed
    max_delay: int = 600
    seed: int = 0
    margin: int = 300  # extra flexibility beyond the delay


@dataclass(frozen=True)
class TrackOutage:
    node: str
    from_time: int


def perturb_instance(inst: Instance, scenario: Delays | TrackOutage | None) -> Instance:
    """Apply a disruption; returns a new instance."""
    if scenario is None:
        return inst
    if isinstance(scenario, TrackOutage):
        node = inst.station.node_by_id.get(scenario.node)
        if node is None or node.kind is not NodeKind.SIDING:
            raise InstanceError(f"no siding track {scenario.node!r} to take out of service")
        station = dataclasses.replace(inst.station,
                                      closures=inst.station.closures + ((scenario.node, scenario.from_time),))
        return dataclasses.replace(inst, station=station, meta={**inst.meta, "outage": [scenario.node,
                                                                                           scenario.from_time]})
    rng = np.random.default_rng(scenario.seed)
    g = inst.grid.macro_granularity
    lo, hi = scenario.window
    trains = []
    delayed = {}
    for t in inst.trains:
        if lo <= t.desired_arrival <= hi:
            delay = int(rng.integers(0, scenario.max_delay // g + 1)) * g
            # the plan stays the reference; the train cannot show up before its delay
            arr_w = (delay, delay + scenario.margin)
            dep_w = (t.departure_window[0], max(t.departure_window[1], delay + scenario.margin))
            horizon_room = inst.grid.horizon - t.desired_departure
            dep_w = (dep_w[0], min(dep_w[1], horizon_room))
            arr_w = (arr_w[0], min(arr_w[1], inst.grid.horizon - t.desired_arrival))
            t = dataclasses.replace(t, arrival_window=arr_w, departure_window=dep_w)
            delayed[t.id] = delay
        trains.append(t)
    return dataclasses.replace(inst, trains=trains, meta={**inst.meta, "delays": delayed})
