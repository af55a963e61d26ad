"""Instance and solution files (JSON), plus the balanced-track-use parameters."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any

from .infrastructure import (InterlockingMode, NodeKind, PhysicalNode, PhysicalRoute, RouteKind, Station,
                             SwitchGroup, validate_station)
from .network import SpaceTimeNetwork, TimeGrid, build_network
from .timetable import Solution, Train, Weights, objective_breakdown, shift_components

SCHEMA_VERSION = 1


class InstanceError(ValueError):
    pass


@dataclass(frozen=True)
class BalanceParams:
    """Cap of ``n_track + tolerance`` train arrivals per siding; ``tolerance=None`` disables it."""

    tolerance: float | None = None
    n_track: int | None = None  # average usage override

    @property
    def enabled(self) -> bool:
        return self.tolerance is not None and math.isfinite(self.tolerance)

    def average_usage(self, network: SpaceTimeNetwork) -> int:
        if self.n_track is not None:
            return self.n_track
        stopping = sum(1 for b in network.blocks.values() if (b.siding_slot >= 0).any())
        sidings = max(len(network.station.available_sidings()), 1)
        return -(-stopping // sidings)

    def cap(self, network: SpaceTimeNetwork) -> float:
        return self.average_usage(network) + self.tolerance if self.enabled else math.inf


@dataclass
class Instance:
    station: Station
    grid: TimeGrid
    trains: list[Train]
    weights: Weights = field(default_factory=Weights)
    balance: BalanceParams = field(default_factory=BalanceParams)
    name: str = ""
    meta: dict = field(default_factory=dict)

    def build(self) -> SpaceTimeNetwork:
        return build_network(self.station, self.trains, self.grid, self.weights)

    def validate(self) -> list[str]:
        errs = [f"{v.kind}: {v.element}: {v.message}" for v in validate_station(self.station)]
        nodes = self.station.node_by_id
        for t in self.trains:
            if nodes.get(t.origin) is None or nodes[t.origin].kind is not NodeKind.ENTERING:
                errs.append(f"train {t.id}: origin {t.origin!r} is not an entering node")
            if nodes.get(t.destination) is None or nodes[t.destination].kind is not NodeKind.LEAVING:
                errs.append(f"train {t.id}: destination {t.destination!r} is not a leaving node")
            if min(t.desired_arrival, t.desired_departure) < 0:
                errs.append(f"train {t.id}: negative desired time")
        return errs


def station_to_dict(s: Station) -> dict[str, Any]:
    return {
        "nodes": [{"id": n.id, "kind": n.kind.value} for n in s.nodes],
        "switch_groups": [g.id for g in s.switch_groups],
        "routes": [
            {"id": r.id, "origin": r.origin, "destination": r.destination, "running_time": r.running_time,
             "kind": r.kind.value, "sg_occupations": [[sg, off] for sg, off in r.sg_occupations]}
            for r in s.routes
        ],
        "sg_headway": s.sg_headway,
        "siding_headway": s.siding_headway,
        "interlocking_mode": s.interlocking_mode.value,
        "closures": [[n, t] for n, t in s.closures],
    }


def station_from_dict(d: dict[str, Any]) -> Station:
    return Station(
        nodes=tuple(PhysicalNode(n["id"], NodeKind(n["kind"])) for n in d["nodes"]),
        routes=tuple(
            PhysicalRoute(r["id"], r["origin"], r["destination"], int(r["running_time"]), RouteKind(r["kind"]),
                          tuple((sg, int(off)) for sg, off in r["sg_occupations"]))
            for r in d["routes"]
        ),
        switch_groups=tuple(SwitchGroup(g) for g in d["switch_groups"]),
        sg_headway=int(d["sg_headway"]),
        siding_headway=int(d["siding_headway"]),
        interlocking_mode=InterlockingMode(d.get("interlocking_mode", "sectional_release")),
        closures=tuple((n, int(t)) for n, t in d.get("closures", [])),
    )


def train_to_dict(t: Train) -> dict[str, Any]:
    d = asdict(t)
    d["arrival_window"] = list(t.arrival_window)
    d["departure_window"] = list(t.departure_window)
    if t.cancellation_cost is None:
        del d["cancellation_cost"]
    return d


def train_from_dict(d: dict[str, Any]) -> Train:
    return Train(
        id=str(d["id"]), origin=d["origin"], destination=d["destination"],
        desired_arrival=int(d["desired_arrival"]), desired_departure=int(d["desired_departure"]),
        arrival_window=tuple(int(v) for v in d.get("arrival_window", (0, 0))),
        departure_window=tuple(int(v) for v in d.get("departure_window", (0, 0))),
        dwell_min=int(d.get("dwell_min", 0)), dwell_max=int(d.get("dwell_max", 0)),
        stops=bool(d.get("stops", True)), cancellation_cost=d.get("cancellation_cost"),
    )


def instance_to_dict(inst: Instance) -> dict[str, Any]:
    out = {
        "schema": SCHEMA_VERSION,
        "name": inst.name,
        "station": station_to_dict(inst.station),
        "grid": {"horizon": inst.grid.horizon, "macro_granularity": inst.grid.macro_granularity,
                 "micro_granularity": inst.grid.micro_granularity},
        "weights": {"w1": inst.weights.w1, "w2": inst.weights.w2},
        "trains": [train_to_dict(t) for t in inst.trains],
    }
    if inst.balance.tolerance is not None or inst.balance.n_track is not None:
        out["balance"] = {"tolerance": inst.balance.tolerance, "n_track": inst.balance.n_track}
    if inst.meta:
        out["meta"] = inst.meta
    return out


def instance_from_dict(d: dict[str, Any]) -> Instance:
    try:
        g = d["grid"]
        b = d.get("balance") or {}
        inst = Instance(
            station=station_from_dict(d["station"]),
            grid=TimeGrid(int(g["horizon"]), int(g["macro_granularity"]), int(g.get("micro_granularity")
                                                                              or g["macro_granularity"])),
            trains=[train_from_dict(t) for t in d["trains"]],
            weights=Weights(**d.get("weights", {})),
            balance=BalanceParams(b.get("tolerance"), b.get("n_track")),
            name=d.get("name", ""),
            meta=d.get("meta", {}),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise InstanceError(f"malformed instance: {exc}") from exc
    return inst


def load_instance(path: str | Path) -> Instance:
    with open(path) as fh:
        return instance_from_dict(json.load(fh))


def save_instance(inst: Instance, path: str | Path) -> None:
    with open(path, "w") as fh:
        json.dump(instance_to_dict(inst), fh, indent=1)
        fh.write("\n")


def solution_to_dict(sol: Solution, network: SpaceTimeNetwork) -> dict[str, Any]:
    rows = []
    for t in network.trains:
        p = sol.paths[t.id]
        if p.cancelled:
            rows.append({"train": t.id, "status": "cancelled"})
            continue
        a_shift, d_shift = shift_components(p, t)
        rows.append({
            "train": t.id, "status": "scheduled", "platform": p.platform,
            "arrival": p.arrival_time, "departure": p.departure_time,
            "inbound_route": p.arrival_arc.physical, "outbound_route": p.departure_arc.physical,
            "arrival_start": p.arrival_arc.start * p.granularity,
            "departure_end": p.departure_arc.end * p.granularity,
            "travel_time": p.travel_time, "arrival_shift": a_shift, "departure_shift": d_shift,
        })
    br = objective_breakdown(sol.paths, network.trains, network.weights, network.grid.horizon)
    return {
        "trains": rows,
        "totals": {"travel": br.travel, "shift": br.shift, "cancellation": br.cancellation,
                   "cancelled": br.n_cancelled, "objective": br.total},
        "bounds": {"lower_bound": sol.lower_bound, "upper_bound": sol.objective, "gap": sol.gap,
                   "iterations": sol.iterations, "wall_time": sol.wall_time},
        "meta": sol.meta,
    }


def solution_from_dict(d: dict[str, Any], network: SpaceTimeNetwork) -> Solution:
    """Rebuild a solution's train paths on ``network`` from its per-train rows."""
    g = network.grid.macro_granularity
    choices = {}
    for row in d["trains"]:
        block = network.blocks[row["train"]]
        if row["status"] == "cancelled":
            choices[row["train"]] = None
            continue
        p = block.platforms.index(row["platform"])
        e = row["arrival"] // g - block.t0
        k = (row["departure"] - row["arrival"]) // g
        choices[row["train"]] = (p, e, k)
    missing = {t.id for t in network.trains} - set(choices)
    if missing:
        raise InstanceError(f"solution lacks trains {sorted(missing)}")
    paths = network.paths(choices)
    b = d.get("bounds", {})
    return Solution(paths, network.objective(choices), b.get("lower_bound"), b.get("iterations", 0),
                    b.get("wall_time", 0.0), d.get("meta", {}))
