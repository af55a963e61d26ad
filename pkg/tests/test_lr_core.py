import io
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from platforming.generators import generate_virtual_station, virtual_station
from platforming.instance import BalanceParams
from platforming.lr_core import (LRParams, MultiplierPool, aggregated_costs, dynamic_pool_update, gap,
                                 lower_bound, run, step_size, subgradient_update)
from platforming.network import ARRIVAL, MicroResource, TimeGrid, build_network
from platforming.oracle import check_feasibility, solve_exact
from platforming.timetable import Train, Weights
from platforming.train_dp import solve_block

from oracles import brute_optimum


def small_net(seed=0, n=3, span=300):
    return generate_virtual_station(seed, n, span=span).build()


@pytest.mark.parametrize("m,ma,alpha", [(0, 20, 1), (3, 10, 0.25), (50, 10, 1 / 11)])
def test_step_size(m, ma, alpha):
    assert step_size(m, ma) == pytest.approx(alpha)


@pytest.mark.parametrize("lam,occ,alpha,new", [(0, 3, 1, 2), (0.5, 0, 0.25, 0.25), (0.1, 0, 0.5, 0)])
def test_subgradient_formula(lam, occ, alpha, new):
    assert subgradient_update(np.array([lam]), np.array([occ]), alpha)[0] == pytest.approx(new)
    pool = MultiplierPool({0: lam} if lam else {})
    got, _ = dynamic_pool_update(pool, {0: occ} if occ else {}, alpha)
    assert got.get(0) == pytest.approx(new)
    assert (0 in got.values) == (new > 0)


def test_gap_of_reported_run():
    assert round(100 * gap(201720, 197951), 2) == 1.87


def test_zero_pool_arrival_cost():
    t = Train("x", "EA_L", "LA_R", 300, 480, (-60, 60), (0, 0), 12, 20)
    net = build_network(virtual_station(), [t], TimeGrid(2400, 15))
    b = net.blocks["x"]
    c = aggregated_costs(net, MultiplierPool())["x"]
    p = b.platforms.index("S1")  # 60 s route
    e = 240 // 15 - b.t0  # arrival 60 s early
    assert c[ARRIVAL, p, e] == 120


def test_one_multiplier_adds_to_arc():
    net = small_net()
    b = net.blocks["F1"]
    row = int(np.flatnonzero(b.exists[0].reshape(-1))[0])
    r = int(b.link[row].indices[0])
    assert net.resources.resource(r).kind == "sg"
    base = aggregated_costs(net, MultiplierPool())["F1"].reshape(-1)[row]
    assert aggregated_costs(net, MultiplierPool({r: 2.0}))["F1"].reshape(-1)[row] == base + 2


def _random_pool(net, rng, k=60):
    keys = rng.choice(net.n_resources, size=k, replace=False)
    return MultiplierPool({int(i): float(rng.integers(1, 8)) for i in keys})


def test_lagrangian_decomposition():
    # Z_LR evaluated directly from the occupations equals sum of blocks minus sum of multipliers
    net = small_net(1, 2)
    rng = np.random.default_rng(0)
    for _ in range(20):
        pool = _random_pool(net, rng)
        lam = pool.dense(net.n_resources)
        costs = aggregated_costs(net, pool)
        blocks = {t.id: solve_block(net.blocks[t.id], costs[t.id]) for t in net.trains}
        choices = {k: v.choice for k, v in blocks.items()}
        direct = net.objective(choices) + float(lam @ (net.occupation_counts(choices) - 1))
        assert lower_bound(blocks, pool) == pytest.approx(direct)


def test_empty_pool_lb_single_train_is_optimal():
    net = small_net(2, 1)
    sol, rec = run(net)
    assert rec.history[0].lb == pytest.approx(brute_optimum(net)[0])


def test_weak_duality_random_pools():
    net = generate_virtual_station(4, 3, span=120).build()
    opt, _ = brute_optimum(net)
    rng = np.random.default_rng(1)
    for _ in range(100):
        pool = _random_pool(net, rng, 40)
        costs = aggregated_costs(net, pool)
        blocks = {t.id: solve_block(net.blocks[t.id], costs[t.id]) for t in net.trains}
        assert lower_bound(blocks, pool) <= opt + 1e-9


@given(st.integers(0, 10 ** 6))
def test_aggregation_identity(seed):
    rng = np.random.default_rng(seed)
    net = small_net(seed % 40, 2)
    pool = MultiplierPool({int(i): int(rng.integers(1, 9)) for i in rng.choice(net.n_resources, 80, replace=False)})
    costs = aggregated_costs(net, pool)
    for t in net.trains:
        b = net.blocks[t.id]
        ch = solve_block(b, rng=rng).choice
        if ch is None:
            continue
        lam_sum = sum(pool.get(int(r)) for r in b.choice_resources(ch))
        assert b.choice_cost(ch, costs[t.id]) - b.choice_cost(ch) == lam_sum


def test_violated_sg_enters_route_pool():
    net = small_net()
    b = net.blocks["F1"]
    row = int(np.flatnonzero(b.exists[0].reshape(-1))[0])
    r = int(b.link[row].indices[0])
    pool, routes = dynamic_pool_update(MultiplierPool(), {r: 2}, 1.0, network=net)
    assert pool.values == {r: 1.0}
    assert ("F1", row) in routes
    for tid, arc_row in routes:
        kind = net.blocks[tid].decode(arc_row)[0]
        assert kind != 1 and r in net.blocks[tid].link[arc_row].indices


def test_no_violation_keeps_pool_empty():
    pool, routes = dynamic_pool_update(MultiplierPool(), {3: 1, 7: 1}, 0.5)
    assert len(pool) == 0 and not routes


@pytest.mark.parametrize("seed", range(4))
def test_dynamic_pool_matches_dense(seed):
    net = generate_virtual_station(seed, 5, span=300).build()
    _, rec, state = run(net, LRParams(max_iterations=60, gap_tolerance=0, integer_objective=False,
                                      seed=seed), keep_trace=True)
    lam = np.zeros(net.n_resources)
    for m, choices in enumerate(state.lb_choices):
        assert np.array_equal(state.pools[m].dense(net.n_resources), lam)
        lam = subgradient_update(lam, net.occupation_counts(choices), step_size(m))


def test_single_free_train_stops_at_once():
    t = Train("x", "EA_L", "LA_R", 300, 480, (0, 60), (0, 60), 12, 16)
    net = build_network(virtual_station(), [t], TimeGrid(2400, 15))
    sol, rec = run(net)
    assert len(rec.history) == 1 and rec.ub_best == rec.lb_best


@pytest.mark.parametrize("seed", [11, 12, 13])
def test_eight_train_sandwich(seed):
    net = generate_virtual_station(seed, 8, span=600).build()
    sol, rec = run(net, LRParams(max_iterations=400))
    opt, _ = solve_exact(net)
    assert all(h.lb <= opt + 1e-6 for h in rec.history)
    assert rec.lb_best <= opt + 1e-6 <= rec.ub_best + 2e-6
    assert sol.gap is not None and sol.gap >= -1e-9
    assert check_feasibility(sol, net).ok


def test_bounds_monotone_and_csv():
    net = generate_virtual_station(9, 7, span=300).build()
    _, rec = run(net, LRParams(max_iterations=80))
    lbs = [h.lb_best for h in rec.history]
    ubs = [h.ub_best for h in rec.history]
    assert lbs == sorted(lbs) and ubs == sorted(ubs, reverse=True)
    buf = io.StringIO()
    rec.write_csv(buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "m,lb,ub,lb_best,ub_best,alpha,pool_size,violated" and len(lines) == len(rec.history) + 1


def test_final_policy_keeps_lb_trajectory():
    net = generate_virtual_station(21, 7, span=300).build()
    kw = dict(max_iterations=50, gap_tolerance=0, integer_objective=False, seed=5)
    _, a = run(net, LRParams(ub_policy="iterative", **kw))
    _, b = run(net, LRParams(ub_policy="final", **kw))
    assert [h.lb for h in a.history] == [h.lb for h in b.history]
    assert math.isfinite(b.ub_best)


def test_same_seed_same_run():
    net = generate_virtual_station(22, 6, span=300).build()
    a = run(net, LRParams(max_iterations=40, seed=3))
    b = run(net, LRParams(max_iterations=40, seed=3))
    assert [h.ub for h in a[1].history] == [h.ub for h in b[1].history]
    assert net.choices(a[0].paths) == net.choices(b[0].paths)


def test_time_limit_still_returns_plan():
    net = generate_virtual_station(23, 8, span=300).build()
    sol, rec = run(net, LRParams(time_limit=0.0))
    assert len(rec.history) == 1 and math.isfinite(sol.objective)


@pytest.mark.parametrize("seed", range(3))
def test_balance_mode_bounds(seed):
    inst = generate_virtual_station(seed, 5, span=900)
    net = inst.build()
    bal = BalanceParams(0)
    opt, _ = solve_exact(net, bal)
    sol, rec = run(net, LRParams(max_iterations=200, balance=bal))
    assert rec.lb_best <= opt + 1e-6 <= rec.ub_best + 2e-6
    assert check_feasibility(sol, net, bal).ok
