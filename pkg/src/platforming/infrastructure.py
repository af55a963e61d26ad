"""Physical station model: nodes, routes, switch groups and interlocking timing."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum
from functools import cached_property


class NodeKind(str, Enum):
    ENTERING = "entering"
    LEAVING = "leaving"
    SIDING = "siding"
    MAINLINE = "mainline"


class RouteKind(str, Enum):
    INBOUND = "inbound"
    OUTBOUND = "outbound"


class InterlockingMode(str, Enum):
    SECTIONAL_RELEASE = "sectional_release"
    ROUTE_RELEASE = "route_release"


class MalformedStationError(ValueError):
    pass


@dataclass(frozen=True)
class PhysicalNode:
    id: str
    kind: NodeKind


@dataclass(frozen=True)
class SwitchGroup:
    id: str


@dataclass(frozen=True)
class PhysicalRoute:
    """Inbound or outbound route through one station throat.

    ``sg_occupations`` lists ``(switch group, offset)`` pairs, the offset being
    the seconds from route start until the group is released under sectional
    release.
    """

    id: str
    origin: str
    destination: str
    running_time: int
    kind: RouteKind
    sg_occupations: tuple[tuple[str, int], ...] = ()

    @property
    def switch_groups(self) -> tuple[str, ...]:
        return tuple(sg for sg, _ in self.sg_occupations)


@dataclass(frozen=True)
class Station:
    nodes: tuple[PhysicalNode, ...]
    routes: tuple[PhysicalRoute, ...]
    switch_groups: tuple[SwitchGroup, ...]
    sg_headway: int
    siding_headway: int
    interlocking_mode: InterlockingMode = InterlockingMode.SECTIONAL_RELEASE
    # (siding node, seconds): siding unusable from that instant on
    closures: tuple[tuple[str, int], ...] = field(default=())

    @cached_property
    def node_by_id(self) -> dict[str, PhysicalNode]:
        return {n.id: n for n in self.nodes}

    @cached_property
    def route_by_id(self) -> dict[str, PhysicalRoute]:
        return {r.id: r for r in self.routes}

    @cached_property
    def route_between(self) -> dict[tuple[str, str], PhysicalRoute]:
        return {(r.origin, r.destination): r for r in self.routes}

    def nodes_of(self, kind: NodeKind) -> list[str]:
        return [n.id for n in self.nodes if n.kind == kind]

    @property
    def sidings(self) -> list[str]:
        return self.nodes_of(NodeKind.SIDING)

    @property
    def mainlines(self) -> list[str]:
        return self.nodes_of(NodeKind.MAINLINE)

    def closure_time(self, node: str) -> int | None:
        times = [t for n, t in self.closures if n == node]
        return min(times) if times else None

    def available_sidings(self) -> list[str]:
        """Sidings not closed for the whole horizon."""
        return [s for s in self.sidings if self.closure_time(s) != 0]

    def with_mode(self, mode: InterlockingMode | str) -> Station:
        return replace(self, interlocking_mode=InterlockingMode(mode))


def effective_sg_offset(route: PhysicalRoute, sg: str, mode: InterlockingMode | str) -> int:
    """Release offset of ``sg`` on ``route``; route release holds every group to the route end."""
    for sg_id, offset in route.sg_occupations:
        if sg_id == sg:
            if InterlockingMode(mode) is InterlockingMode.ROUTE_RELEASE:
                return route.running_time
            return offset
    raise MalformedStationError(f"switch group {sg!r} is not on route {route.id!r}")


@dataclass(frozen=True)
class Violation:
    kind: str
    element: str
    message: str


_ROUTE_ENDS = {
    RouteKind.INBOUND: ({NodeKind.ENTERING}, {NodeKind.SIDING, NodeKind.MAINLINE}),
    RouteKind.OUTBOUND: ({NodeKind.SIDING, NodeKind.MAINLINE}, {NodeKind.LEAVING}),
}


def validate_station(station: Station) -> list[Violation]:
    out: list[Violation] = []

    def dup(items, what):
        seen = set()
        for i in items:
            if i in seen:
                out.append(Violation("duplicate-id", i, f"duplicate {what} id {i!r}"))
            seen.add(i)

    dup([n.id for n in station.nodes], "node")
    dup([s.id for s in station.switch_groups], "switch group")
    dup([r.id for r in station.routes], "route")

    if station.sg_headway <= 0:
        out.append(Violation("bad-headway", "sg_headway", "switch-group headway must be positive"))
    if station.siding_headway <= 0:
        out.append(Violation("bad-headway", "siding_headway", "siding headway must be positive"))

    nodes = station.node_by_id
    sgs = {s.id for s in station.switch_groups}
    pairs: set[tuple[str, str]] = set()
    for r in station.routes:
        if r.running_time <= 0:
            out.append(Violation("bad-running-time", r.id, "running time must be positive"))
        for end in (r.origin, r.destination):
            if end not in nodes:
                out.append(Violation("dangling-reference", r.id, f"unknown node {end!r}"))
        if r.origin in nodes and r.destination in nodes:
            ok_from, ok_to = _ROUTE_ENDS[r.kind]
            if nodes[r.origin].kind not in ok_from or nodes[r.destination].kind not in ok_to:
                out.append(Violation(
                    "kind-mismatch", r.id,
                    f"{r.kind.value} route {nodes[r.origin].kind.value}->{nodes[r.destination].kind.value}",
                ))
        if (r.origin, r.destination) in pairs:
            out.append(Violation("duplicate-route", r.id, "more than one route between the same nodes"))
        pairs.add((r.origin, r.destination))
        if not r.sg_occupations:
            out.append(Violation("no-switch-groups", r.id, "route crosses no switch group"))
        for sg, offset in r.sg_occupations:
            if sg not in sgs:
                out.append(Violation("dangling-reference", r.id, f"unknown switch group {sg!r}"))
            if not 0 < offset <= r.running_time:
                out.append(Violation("bad-offset", r.id, f"offset {offset} of {sg!r} outside (0, {r.running_time}]"))
        if len(set(r.switch_groups)) != len(r.sg_occupations):
            out.append(Violation("duplicate-id", r.id, "switch group listed twice on route"))

    for node, t in station.closures:
        if node not in nodes or nodes[node].kind is not NodeKind.SIDING:
            out.append(Violation("dangling-reference", node, "closure of a node that is not a siding"))
        if t < 0:
            out.append(Violation("bad-closure", node, "closure time must be nonnegative"))
    return out
