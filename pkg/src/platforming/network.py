"""Two-level space-time network.

The macroscopic level holds, per train, arrival arcs (indexed by their end
period), siding waiting arcs and departure arcs (indexed by their start period)
on every platform the train may use.  Each arc row is linked to the
microscopic switch-group and siding resources it locks through a sparse
incidence matrix, so the multiplier-aggregated arc costs are a single
mat-vec per train.
"""

from __future__ import annotations

import csv
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import IO, Iterable, Sequence

import numpy as np
import scipy.sparse as sp

from .infrastructure import NodeKind, PhysicalRoute, Station, effective_sg_offset
from .timetable import Train, TrainPath, Weights, cancellation_cost

ARRIVAL, WAIT, DEPARTURE = 0, 1, 2


class NetworkBuildError(ValueError):
    pass


@dataclass(frozen=True)
class TimeGrid:
    horizon: int
    macro_granularity: int = 15
    micro_granularity: int | None = None

    def __post_init__(self):
        if self.micro_granularity is None:
            object.__setattr__(self, "micro_granularity", self.macro_granularity)
        mg, ug = self.macro_granularity, self.micro_granularity
        if mg <= 0 or ug <= 0:
            raise ValueError("granularities must be positive")
        if self.horizon % mg or self.horizon % ug:
            raise ValueError(f"horizon {self.horizon} not divisible by granularities ({mg}, {ug})")
        if mg % ug:
            # keeps adjacent arcs of one train from sharing a micro period
            raise ValueError(f"micro granularity {ug} must divide macro granularity {mg}")

    @property
    def n_macro(self) -> int:
        return self.horizon // self.macro_granularity

    def periods(self, seconds: int) -> int:
        """Whole macro periods covering ``seconds`` (rounded up)."""
        return -(-seconds // self.macro_granularity)


@dataclass(frozen=True)
class STArc:
    kind: str
    physical: str | None
    start_node: str
    end_node: str
    start: int
    end: int
    running_time: int
    row: int = -1


@dataclass(frozen=True, order=True)
class MicroResource:
    kind: str  # "sg" or "siding"
    space: str
    time: int


@dataclass(frozen=True)
class LinkSets:
    phi_sg: frozenset[MicroResource] = frozenset()
    phi_st: frozenset[MicroResource] = frozenset()
    implicit_siding: frozenset[MicroResource] = frozenset()
    phi_ss: frozenset[MicroResource] = frozenset()

    def all(self) -> list[MicroResource]:
        return [*self.phi_sg, *self.phi_st, *self.implicit_siding, *self.phi_ss]


def micro_span(t0: int, t1: int, micro: int) -> range:
    """Micro periods whose interval ``[k*micro, (k+1)*micro)`` meets ``[t0, t1)``."""
    if t1 <= t0:
        return range(0)
    return range(t0 // micro, -(-t1 // micro))


def linking_sets(arc: STArc, station: Station, grid: TimeGrid) -> LinkSets:
    g, m = grid.macro_granularity, grid.micro_granularity
    t0 = arc.start * g
    if arc.kind in ("arrival", "departure"):
        route = station.route_by_id[arc.physical]
        phi_sg = frozenset(
            MicroResource("sg", sg, k)
            for sg, _ in route.sg_occupations
            for k in micro_span(t0, t0 + effective_sg_offset(route, sg, station.interlocking_mode)
                                + station.sg_headway, m)
        )
        if arc.kind == "arrival":
            if station.node_by_id[arc.end_node].kind is not NodeKind.SIDING:
                return LinkSets(phi_sg=phi_sg)
            return LinkSets(phi_sg=phi_sg, phi_st=frozenset(
                MicroResource("siding", arc.end_node, k) for k in micro_span(t0, arc.end * g, m)))
        if station.node_by_id[arc.start_node].kind is not NodeKind.SIDING:
            return LinkSets(phi_sg=phi_sg)
        return LinkSets(phi_sg=phi_sg, implicit_siding=frozenset(
            MicroResource("siding", arc.start_node, k) for k in micro_span(t0, t0 + station.siding_headway, m)))
    if arc.kind == "siding_wait":
        return LinkSets(phi_ss=frozenset(
            MicroResource("siding", arc.start_node, k) for k in micro_span(t0, arc.end * g, m)))
    return LinkSets()


@dataclass(frozen=True)
class ResourceIndex:
    """Dense numbering of microscopic resources: one block of micro periods per space."""

    sgs: tuple[str, ...]
    sidings: tuple[str, ...]
    n_micro: int

    @property
    def size(self) -> int:
        return (len(self.sgs) + len(self.sidings)) * self.n_micro

    def sg_base(self, sg: str) -> int:
        return self.sgs.index(sg) * self.n_micro

    def siding_base(self, siding: str) -> int:
        return (len(self.sgs) + self.sidings.index(siding)) * self.n_micro

    def index(self, r: MicroResource) -> int:
        base = self.sg_base(r.space) if r.kind == "sg" else self.siding_base(r.space)
        if not 0 <= r.time < self.n_micro:
            raise IndexError(f"{r} outside the micro horizon")
        return base + r.time

    def resource(self, i: int) -> MicroResource:
        space, t = divmod(int(i), self.n_micro)
        if space < len(self.sgs):
            return MicroResource("sg", self.sgs[space], t)
        return MicroResource("siding", self.sidings[space - len(self.sgs)], t)


def _expand(rows, lo, hi, base):
    """COO entries ``(row, base + c)`` for every ``c`` in ``[lo, hi)`` of each row."""
    rows, lo, hi = (np.asarray(a, dtype=np.int64) for a in (rows, lo, hi))
    n = np.maximum(hi - lo, 0)
    total = int(n.sum())
    r = np.repeat(rows, n)
    offs = np.arange(total, dtype=np.int64) - np.repeat(np.cumsum(n) - n, n)
    return r, base + np.repeat(lo, n) + offs


@dataclass
class TrainNetwork:
    """Macroscopic arcs of one train on a local time axis ``t0 .. t0+T-1``.

    Arc rows: ``kind * P * T + p * T + i`` with kind ARRIVAL (``i`` = end
    period), WAIT (``i`` -> ``i+1``) or DEPARTURE (``i`` = start period).
    """

    train: Train
    platforms: list[str]
    in_routes: list[PhysicalRoute]
    out_routes: list[PhysicalRoute]
    r_in: np.ndarray
    r_out: np.ndarray
    t0: int
    T: int
    exists: np.ndarray  # bool (3, P, T)
    base_cost: np.ndarray  # float (3, P, T), inf where no arc
    link: sp.csr_matrix  # (3*P*T, n_resources)
    cancel_cost: float
    siding_slot: np.ndarray  # per platform: index into network sidings, -1 for mainline
    granularity: int
    _link_csc: sp.csc_matrix | None = field(default=None, repr=False)

    @property
    def P(self) -> int:
        return len(self.platforms)

    @property
    def n_rows(self) -> int:
        return 3 * self.P * self.T

    @property
    def link_csc(self) -> sp.csc_matrix:
        if self._link_csc is None:
            self._link_csc = self.link.tocsc()
        return self._link_csc

    def row(self, kind: int, p: int, i: int) -> int:
        return (kind * self.P + p) * self.T + i

    def decode(self, row: int) -> tuple[int, int, int]:
        kind, rest = divmod(row, self.P * self.T)
        p, i = divmod(rest, self.T)
        return kind, p, i

    def choice_rows(self, choice) -> np.ndarray:
        """Arc rows of path ``(platform, arrival end, dwell)``; empty for cancellation."""
        if choice is None:
            return np.empty(0, dtype=np.int64)
        p, e, k = choice
        PT, T = self.P * self.T, self.T
        waits = PT + p * T + np.arange(e, e + k)
        return np.concatenate(([p * T + e], waits, [2 * PT + p * T + e + k])).astype(np.int64)

    def choice_cost(self, choice, costs: np.ndarray | None = None) -> float:
        if choice is None:
            return self.cancel_cost
        flat = (self.base_cost if costs is None else costs).reshape(-1)
        return float(flat[self.choice_rows(choice)].sum())

    def choice_resources(self, choice) -> np.ndarray:
        rows = self.choice_rows(choice)
        if rows.size == 0:
            return rows
        ptr, idx = self.link.indptr, self.link.indices
        return np.concatenate([idx[ptr[r]:ptr[r + 1]] for r in rows.tolist()]).astype(np.int64)

    def arc(self, row: int) -> STArc:
        kind, p, i = self.decode(row)
        if not self.exists[kind, p, i]:
            raise KeyError(f"train {self.train.id}: no arc at row {row}")
        t = self.t0 + i
        g = self.granularity
        plat = self.platforms[p]
        if kind == ARRIVAL:
            r = self.in_routes[p]
            return STArc("arrival", r.id, r.origin, plat, t - int(self.r_in[p]), t, int(self.r_in[p]) * g, row)
        if kind == WAIT:
            return STArc("siding_wait", plat, plat, plat, t, t + 1, g, row)
        r = self.out_routes[p]
        return STArc("departure", r.id, plat, r.destination, t, t + int(self.r_out[p]), int(self.r_out[p]) * g, row)

    def arcs(self) -> list[STArc]:
        """Every macroscopic arc available to the train, source/sink and virtual path included."""
        out = []
        for row in np.flatnonzero(self.exists.reshape(-1)):
            a = self.arc(int(row))
            out.append(a)
            if a.kind == "arrival":
                out.append(STArc("source", None, "source", a.start_node, a.start, a.start, 0))
            elif a.kind == "departure":
                out.append(STArc("sink", None, a.end_node, "sink", a.end, a.end, 0))
        out = list(dict.fromkeys(out))
        out.append(STArc("virtual_path", None, "source", "sink", 0, 0, 0))
        return out

    def path(self, choice) -> TrainPath:
        if choice is None:
            return TrainPath(self.train.id, (STArc("virtual_path", None, "source", "sink", 0, 0, 0),),
                             self.granularity)
        arcs = [self.arc(int(r)) for r in self.choice_rows(choice)]
        src = STArc("source", None, "source", arcs[0].start_node, arcs[0].start, arcs[0].start, 0)
        snk = STArc("sink", None, arcs[-1].end_node, "sink", arcs[-1].end, arcs[-1].end, 0)
        return TrainPath(self.train.id, (src, *arcs, snk), self.granularity)

    def choice_of(self, path: TrainPath):
        if path.cancelled:
            return None
        a, d = path.arrival_arc, path.departure_arc
        p = self.platforms.index(a.end_node)
        e = a.end - self.t0
        k = d.start - a.end
        choice = (p, e, k)
        rows = self.choice_rows(choice)
        if not (0 <= e and e + k < self.T) or not self.exists.reshape(-1)[rows].all():
            raise ValueError(f"path of train {self.train.id} uses arcs outside its network")
        return choice


@dataclass
class SpaceTimeNetwork:
    station: Station
    trains: tuple[Train, ...]
    grid: TimeGrid
    weights: Weights
    resources: ResourceIndex
    blocks: dict[str, TrainNetwork]

    @property
    def n_resources(self) -> int:
        return self.resources.size

    @property
    def sidings(self) -> tuple[str, ...]:
        return self.resources.sidings

    def path(self, train_id: str, choice) -> TrainPath:
        return self.blocks[train_id].path(choice)

    def paths(self, choices: dict) -> dict[str, TrainPath]:
        return {t.id: self.blocks[t.id].path(choices[t.id]) for t in self.trains}

    def choices(self, paths: dict[str, TrainPath]) -> dict:
        return {t.id: self.blocks[t.id].choice_of(paths[t.id]) for t in self.trains}

    def objective(self, choices: dict) -> float:
        return float(sum(self.blocks[t.id].choice_cost(choices[t.id]) for t in self.trains))

    def occupation_counts(self, choices: dict) -> np.ndarray:
        """Total occupation (theta + y + mu) of every microscopic resource."""
        parts = [self.blocks[t.id].choice_resources(choices[t.id]) for t in self.trains]
        parts = [p for p in parts if p.size]
        if not parts:
            return np.zeros(self.n_resources, dtype=np.int64)
        return np.bincount(np.concatenate(parts), minlength=self.n_resources)


def _platforms_for(train: Train, station: Station) -> list[str]:
    def reachable(nodes):
        return [n for n in nodes
                if (train.origin, n) in station.route_between and (n, train.destination) in station.route_between]

    if not train.stops:
        mains = reachable(station.mainlines)
        if mains:
            return mains
    return reachable(station.sidings)


def _build_train(train: Train, station: Station, grid: TimeGrid, weights: Weights,
                 res: ResourceIndex) -> TrainNetwork:
    g, m = grid.macro_granularity, grid.micro_granularity
    n_macro = grid.n_macro
    lo_a, hi_a = train.arrival_window
    lo_d, hi_d = train.departure_window
    if (train.desired_arrival + lo_a < 0 or train.desired_departure + hi_d > grid.horizon
            or train.desired_arrival + hi_a > grid.horizon or train.desired_departure + lo_d < 0):
        raise NetworkBuildError(f"train {train.id}: time window outside the horizon [0, {grid.horizon}]")

    platforms = _platforms_for(train, station)
    if not platforms:
        raise NetworkBuildError(f"train {train.id}: no platform joins {train.origin} to {train.destination}")
    in_routes = [station.route_between[(train.origin, p)] for p in platforms]
    out_routes = [station.route_between[(p, train.destination)] for p in platforms]
    r_in = np.array([grid.periods(r.running_time) for r in in_routes], dtype=np.int64)
    r_out = np.array([grid.periods(r.running_time) for r in out_routes], dtype=np.int64)

    e_lo = -(-(train.desired_arrival + lo_a) // g)
    e_hi = (train.desired_arrival + hi_a) // g
    d_lo = -(-(train.desired_departure + lo_d) // g)
    d_hi = (train.desired_departure + hi_d) // g
    t0 = max(0, e_lo)
    T = max(d_hi - t0 + 1, 1)
    P = len(platforms)
    t = t0 + np.arange(T)
    closes = np.array([station.closure_time(p) if station.closure_time(p) is not None else np.inf
                       for p in platforms])
    is_siding = np.array([station.node_by_id[p].kind is NodeKind.SIDING for p in platforms])

    arr = (t >= e_lo) & (t <= e_hi)
    arr = arr[None, :] & (t[None, :] - r_in[:, None] >= 0) & (t[None, :] * g <= closes[:, None])
    wait = is_siding[:, None] & (t[None, :] < t0 + T - 1) & ((t[None, :] + 1) * g <= closes[:, None])
    dep = (t >= d_lo) & (t <= d_hi)
    dep = dep[None, :] & (t[None, :] + r_out[:, None] <= n_macro) & (t[None, :] * g <= closes[:, None])
    exists = np.stack([arr, wait, dep])

    w1, w2 = weights.w1, weights.w2
    base = np.empty((3, P, T))
    base[ARRIVAL] = w1 * (r_in[:, None] * g) + w2 * np.abs(t[None, :] * g - train.desired_arrival)
    base[WAIT] = w1 * g
    base[DEPARTURE] = w1 * (r_out[:, None] * g) + w2 * np.abs(t[None, :] * g - train.desired_departure)
    base[~exists] = np.inf

    rows_all, cols_all = [], []
    PT = P * T
    for p in range(P):
        # arrival arcs: switch groups of the inbound route plus the locked siding
        ii = np.flatnonzero(exists[ARRIVAL, p])
        if ii.size:
            rows = p * T + ii
            start = (t[ii] - r_in[p]) * g
            for sg, _ in in_routes[p].sg_occupations:
                off = effective_sg_offset(in_routes[p], sg, station.interlocking_mode)
                r, c = _expand(rows, start // m, -(-(start + off + station.sg_headway) // m), res.sg_base(sg))
                rows_all.append(r), cols_all.append(c)
            if is_siding[p]:
                r, c = _expand(rows, start // m, -(-(t[ii] * g) // m), res.siding_base(platforms[p]))
                rows_all.append(r), cols_all.append(c)
        ii = np.flatnonzero(exists[WAIT, p])
        if ii.size:
            r, c = _expand(PT + p * T + ii, t[ii] * g // m, -(-((t[ii] + 1) * g) // m),
                           res.siding_base(platforms[p]))
            rows_all.append(r), cols_all.append(c)
        ii = np.flatnonzero(exists[DEPARTURE, p])
        if ii.size:
            rows = 2 * PT + p * T + ii
            start = t[ii] * g
            for sg, _ in out_routes[p].sg_occupations:
                off = effective_sg_offset(out_routes[p], sg, station.interlocking_mode)
                r, c = _expand(rows, start // m, -(-(start + off + station.sg_headway) // m), res.sg_base(sg))
                rows_all.append(r), cols_all.append(c)
            if is_siding[p]:
                r, c = _expand(rows, start // m, -(-(start + station.siding_headway) // m),
                               res.siding_base(platforms[p]))
                rows_all.append(r), cols_all.append(c)

    if rows_all:
        rows = np.concatenate(rows_all)
        cols = np.concatenate(cols_all)
    else:
        rows = cols = np.empty(0, dtype=np.int64)
    link = sp.csr_matrix((np.ones(rows.size), (rows, cols)), shape=(3 * PT, res.size))
    link.sum_duplicates()
    link.sort_indices()

    slot = np.array([res.sidings.index(p) if s else -1 for p, s in zip(platforms, is_siding)], dtype=np.int64)
    return TrainNetwork(
        train=train, platforms=platforms, in_routes=in_routes, out_routes=out_routes,
        r_in=r_in, r_out=r_out, t0=t0, T=T, exists=exists, base_cost=base, link=link,
        cancel_cost=cancellation_cost(train, weights, grid.horizon), siding_slot=slot, granularity=g,
    )


def build_network(station: Station, trains: Sequence[Train], grid: TimeGrid,
                  weights: Weights = Weights()) -> SpaceTimeNetwork:
    """Build every train's macroscopic arcs and their microscopic linking matrix."""
    m = grid.micro_granularity
    tail = max(station.sg_headway, station.siding_headway)
    n_micro = -(-(grid.horizon + tail) // m)
    res = ResourceIndex(tuple(s.id for s in station.switch_groups), tuple(station.sidings), n_micro)
    ids = [t.id for t in trains]
    if len(set(ids)) != len(ids):
        raise NetworkBuildError("duplicate train ids")
    blocks = {t.id: _build_train(t, station, grid, weights, res) for t in trains}
    return SpaceTimeNetwork(station, tuple(trains), grid, weights, res, blocks)


def occupied_resources(path: TrainPath, network: SpaceTimeNetwork) -> Counter:
    """Multiset of microscopic resources locked, actually or implicitly, by ``path``."""
    if path.cancelled:
        return Counter()
    block = network.blocks[path.train]
    rows = block.choice_rows(block.choice_of(path))
    return Counter(network.resources.resource(i) for i in block.link[rows].indices)


def dump_linking_csv(network: SpaceTimeNetwork, out: IO[str], trains: Iterable[str] | None = None) -> None:
    """Write ``train, arc, kind, resource kind, space, micro time`` rows for every linked arc."""
    w = csv.writer(out)
    w.writerow(["train", "arc_row", "arc_kind", "arc_start", "resource_kind", "space", "micro_time"])
    for tid in trains or [t.id for t in network.trains]:
        block = network.blocks[tid]
        link = block.link
        for row in np.flatnonzero(block.exists.reshape(-1)):
            arc = block.arc(int(row))
            for i in link.indices[link.indptr[row]:link.indptr[row + 1]]:
                r = network.resources.resource(i)
                w.writerow([tid, int(row), arc.kind, arc.start, r.kind, r.space, r.time])
