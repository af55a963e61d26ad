import io

import numpy as np
import pytest
from hypothesis import given, strategies as st

from platforming.generators import generate_virtual_station, virtual_station
from platforming.infrastructure import NodeKind, PhysicalNode, PhysicalRoute, RouteKind, Station, SwitchGroup
from platforming.network import (MicroResource, NetworkBuildError, STArc, TimeGrid, build_network,
                                 dump_linking_csv, linking_sets, micro_span, occupied_resources)
from platforming.timetable import Train, Weights

from oracles import brute_linking


def line_station(sg_offset=20, headway=30, siding_headway=30, mode="sectional_release"):
    nodes = (PhysicalNode("E", NodeKind.ENTERING), PhysicalNode("S", NodeKind.SIDING),
             PhysicalNode("L", NodeKind.LEAVING))
    routes = (PhysicalRoute("in", "E", "S", 60, RouteKind.INBOUND, (("SG1", sg_offset),)),
              PhysicalRoute("out", "S", "L", 60, RouteKind.OUTBOUND, (("SG2", 60),)))
    return Station(nodes, routes, (SwitchGroup("SG1"), SwitchGroup("SG2")), headway, siding_headway, mode)


def seconds(resources, m=15):
    return sorted(r.time * m for r in resources)


def test_macro_periods_of_default_grid():
    assert TimeGrid(2400, 15).n_macro == 160


@pytest.mark.parametrize("args", [(2400, 15, 7), (2400, 0), (2401, 15), (2400, 15, 10)])
def test_grid_rejects_bad_granularity(args):
    with pytest.raises(ValueError):
        TimeGrid(*args)


def test_sg_link_example():
    arc = STArc("arrival", "in", "E", "S", 20, 24, 60)  # starts at 300 s
    ls = linking_sets(arc, line_station(), TimeGrid(2400, 15))
    assert seconds(ls.phi_sg) == [300, 315, 330, 345]


def test_implicit_departure_example():
    arc = STArc("departure", "out", "S", "L", 40, 44, 60)  # starts at 600 s
    ls = linking_sets(arc, line_station(), TimeGrid(2400, 15))
    assert seconds(ls.implicit_siding) == [600, 615]
    assert not ls.phi_st and not ls.phi_ss


def test_arrival_siding_covers_route_interval():
    arc = STArc("arrival", "in", "E", "S", 8, 12, 60)
    assert seconds(linking_sets(arc, line_station(), TimeGrid(2400, 15)).phi_st) == [120, 135, 150, 165]


def test_route_release_shares_release_end():
    st_ = virtual_station(mode="route_release")
    r = st_.route_by_id["EA_L-S3"]
    ls = linking_sets(STArc("arrival", r.id, "EA_L", "S3", 10, 16, 90), st_, TimeGrid(2400, 15))
    ends = {sg: max(x.time for x in ls.phi_sg if x.space == sg) for sg in r.switch_groups}
    assert set(ends.values()) == {(150 + 90 + 30) // 15 - 1}


def test_mixed_granularity_rounds_outward():
    assert list(micro_span(10, 20, 15)) == [0, 1]
    assert list(micro_span(15, 30, 15)) == [1]
    assert list(micro_span(5, 5, 15)) == []


def test_virtual_station_route_count():
    net = generate_virtual_station(0, 4).build()
    assert len(net.station.routes) == 40


def _sample_arcs(net, rng, n):
    rows = []
    for b in net.blocks.values():
        for r in np.flatnonzero(b.exists.reshape(-1)):
            rows.append((b, int(r)))
    pick = rng.choice(len(rows), size=min(n, len(rows)), replace=False)
    return [rows[i] for i in pick]


@pytest.mark.parametrize("macro,micro", [(15, 15), (15, 5), (30, 15), (60, 15)])
@pytest.mark.parametrize("mode", ["sectional_release", "route_release"])
def test_link_rows_match_brute_force(macro, micro, mode):
    inst = generate_virtual_station(3, 6, granularity=macro, micro_granularity=micro, mode=mode)
    net = inst.build()
    n_micro = net.resources.n_micro
    for b, row in _sample_arcs(net, np.random.default_rng(0), 150):
        arc = b.arc(row)
        expect = brute_linking(arc, net.station, net.grid, n_micro)
        assert set(linking_sets(arc, net.station, net.grid).all()) == expect
        got = {net.resources.resource(i) for i in b.link[row].indices}
        assert got == expect


@given(st.integers(0, 100), st.integers(1, 80), st.integers(0, 60), st.integers(0, 60))
def test_headways_are_monotone(start, off, dr, ds):
    off = min(off, 60)
    grid = TimeGrid(2400, 15)
    arc_a = STArc("arrival", "in", "E", "S", start + 4, start + 8, 60)
    arc_d = STArc("departure", "out", "S", "L", start, start + 4, 60)
    for arc in (arc_a, arc_d):
        small = set(linking_sets(arc, line_station(off, 1 + dr, 1 + ds), grid).all())
        big = set(linking_sets(arc, line_station(off, 31 + dr, 31 + ds), grid).all())
        assert small <= big


@given(st.sampled_from(virtual_station().routes), st.integers(0, 100))
def test_route_release_superset(route, start):
    grid = TimeGrid(2400, 15)
    t = grid.periods(route.running_time)
    if route.kind is RouteKind.INBOUND:
        arc = STArc("arrival", route.id, route.origin, route.destination, start, start + t, route.running_time)
    else:
        arc = STArc("departure", route.id, route.origin, route.destination, start, start + t, route.running_time)
    sec = linking_sets(arc, virtual_station(mode="sectional_release"), grid).phi_sg
    rr = linking_sets(arc, virtual_station(mode="route_release"), grid).phi_sg
    assert sec <= rr and len(sec) > 0


def test_no_arc_outside_windows():
    net = generate_virtual_station(5, 8).build()
    g = net.grid.macro_granularity
    for t in net.trains:
        b = net.blocks[t.id]
        for a in b.arcs():
            if a.kind == "arrival":
                assert t.desired_arrival + t.arrival_window[0] <= a.end * g <= t.desired_arrival + t.arrival_window[1]
            elif a.kind == "departure":
                lo, hi = t.departure_window
                assert t.desired_departure + lo <= a.start * g <= t.desired_departure + hi
                assert a.end <= net.grid.n_macro


def test_window_outside_horizon_names_train():
    t = Train("late", "EA_L", "LA_R", 2350, 2380, (0, 120), (0, 120), 0, 4)
    with pytest.raises(NetworkBuildError, match="late"):
        build_network(virtual_station(), [t], TimeGrid(2400, 15))


def test_nonstop_trains_use_mainlines_only():
    t = Train("x", "EA_L", "LA_R", 300, 300, stops=False)
    net = build_network(virtual_station(), [t], TimeGrid(2400, 15))
    assert net.blocks["x"].platforms == ["MA_E"]
    # a mainline carries no siding resources
    p = net.path("x", (0, net.blocks["x"].exists[0, 0].nonzero()[0][0], 0))
    assert {r.kind for r in occupied_resources(p, net)} == {"sg"}


def test_stopping_trains_use_sidings_only():
    t = Train("x", "EA_L", "LA_R", 300, 420, (0, 60), (0, 60), 8, 12)
    assert build_network(virtual_station(), [t], TimeGrid(2400, 15)).blocks["x"].platforms == ["S1", "S2", "S3", "S4"]


def test_arrival_running_time_rounded_up():
    nodes = line_station().nodes
    routes = (PhysicalRoute("in", "E", "S", 50, RouteKind.INBOUND, (("SG1", 20),)),
              PhysicalRoute("out", "S", "L", 60, RouteKind.OUTBOUND, (("SG2", 60),)))
    s = Station(nodes, routes, (SwitchGroup("SG1"), SwitchGroup("SG2")), 30, 30)
    net = build_network(s, [Train("x", "E", "L", 300, 420, (0, 0), (0, 0), 8, 8)], TimeGrid(2400, 15))
    arc = [a for a in net.blocks["x"].arcs() if a.kind == "arrival"][0]
    assert arc.end - arc.start == 4 and arc.running_time == 60


def test_cancelled_occupies_nothing():
    net = generate_virtual_station(1, 3).build()
    assert occupied_resources(net.path("F1", None), net) == {}


def test_single_arrival_arc_is_sg_plus_siding():
    net = generate_virtual_station(1, 3).build()
    b = net.blocks["F1"]
    row = int(np.flatnonzero(b.exists[0].reshape(-1))[0])
    arc = b.arc(row)
    ls = linking_sets(arc, net.station, net.grid)
    assert {net.resources.resource(i) for i in b.link[row].indices} == set(ls.phi_sg | ls.phi_st)


def test_siding_locked_from_route_start_to_headway_after_departure():
    st_ = line_station()
    net = build_network(st_, [Train("x", "E", "L", 300, 420, (0, 0), (0, 0), 8, 8)], TimeGrid(2400, 15))
    b = net.blocks["x"]
    p = net.path("x", (0, 300 // 15 - b.t0, 8))
    siding = sorted(r.time * 15 for r in occupied_resources(p, net) if r.kind == "siding")
    assert siding == list(range(240, 420 + 30, 15))  # inbound start 240, departure 420, plus 30 s
    assert max(occupied_resources(p, net).values()) == 1


def test_closure_removes_late_arcs():
    st_ = virtual_station()
    closed = Station(st_.nodes, st_.routes, st_.switch_groups, 30, 30, closures=(("S1", 600),))
    t = Train("x", "EA_L", "LA_R", 480, 660, (0, 240), (0, 240), 8, 20)
    net = build_network(closed, [t], TimeGrid(2400, 15))
    b = net.blocks["x"]
    p = b.platforms.index("S1")
    for a in b.arcs():
        if a.kind == "arrival" and a.end_node == "S1":
            assert a.end * 15 <= 600
    assert not b.exists[2, p, (660 - 15 * b.t0) // 15:].any()


def test_linking_csv_dump():
    net = generate_virtual_station(1, 2).build()
    buf = io.StringIO()
    dump_linking_csv(net, buf, ["F1"])
    lines = buf.getvalue().splitlines()
    assert lines[0].startswith("train,arc_row")
    assert len(lines) - 1 == net.blocks["F1"].link.nnz
