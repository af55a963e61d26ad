"""Independent brute-force references used by the tests."""

import itertools

from platforming.infrastructure import NodeKind
from platforming.network import MicroResource


def overlaps(k, micro, lo, hi):
    """Does micro period ``k`` share any instant with ``[lo, hi)``?"""
    return lo < hi and k * micro < hi and lo < (k + 1) * micro


def brute_linking(arc, station, grid, n_micro):
    """Every micro resource an arc locks, found by walking all micro periods one at a time."""
    g, m = grid.macro_granularity, grid.micro_granularity
    start, end = arc.start * g, arc.end * g
    intervals = []  # (kind, space, lo, hi)
    if arc.kind in ("arrival", "departure"):
        route = station.route_by_id[arc.physical]
        for sg, off in route.sg_occupations:
            release = route.running_time if station.interlocking_mode.value == "route_release" else off
            intervals.append(("sg", sg, start, start + release + station.sg_headway))
        if arc.kind == "arrival" and station.node_by_id[arc.end_node].kind is NodeKind.SIDING:
            intervals.append(("siding", arc.end_node, start, end))
        if arc.kind == "departure" and station.node_by_id[arc.start_node].kind is NodeKind.SIDING:
            intervals.append(("siding", arc.start_node, start, start + station.siding_headway))
    elif arc.kind == "siding_wait":
        intervals.append(("siding", arc.start_node, start, end))
    out = set()
    for kind, space, lo, hi in intervals:
        for k in range(n_micro):
            if overlaps(k, m, lo, hi):
                out.add(MicroResource(kind, space, k))
    return out


def enumerate_block_paths(block, costs=None):
    """All (choice, cost) of one train by direct walks over its arc table."""
    c = block.base_cost if costs is None else costs
    P, T = c.shape[1:]
    tr = block.train
    out = []
    for p, e in itertools.product(range(P), range(T)):
        if not block.exists[0, p, e]:
            continue
        total = c[0, p, e]
        for k in range(0, tr.dwell_max + 1):
            if k > 0:
                if e + k - 1 >= T or not block.exists[1, p, e + k - 1]:
                    break
                total += c[1, p, e + k - 1]
            if k >= tr.dwell_min and e + k < T and block.exists[2, p, e + k]:
                out.append(((p, e, k), float(total + c[2, p, e + k])))
    return out


def brute_optimum(network, balance_cap=float("inf")):
    """Exhaustive minimum over the product of per-train path sets (tiny instances only)."""
    per_train = []
    for t in network.trains:
        b = network.blocks[t.id]
        opts = [(None, b.cancel_cost, ())]
        for ch, cost in enumerate_block_paths(b):
            opts.append((ch, cost, tuple(b.choice_resources(ch).tolist())))
        per_train.append(opts)
    best = float("inf")
    best_ch = None
    for combo in itertools.product(*per_train):
        used = [r for _, _, rs in combo for r in rs]
        if len(used) != len(set(used)):
            continue
        if balance_cap != float("inf"):
            counts = {}
            for t, (ch, _, _) in zip(network.trains, combo):
                b = network.blocks[t.id]
                if ch is not None and b.siding_slot[ch[0]] >= 0:
                    counts[ch[0], t.id] = b.platforms[ch[0]]
            per = {}
            for s in counts.values():
                per[s] = per.get(s, 0) + 1
            if any(n > balance_cap for n in per.values()):
                continue
        total = sum(c for _, c, _ in combo)
        if total < best:
            best, best_ch = total, {t.id: ch for t, (ch, _, _) in zip(network.trains, combo)}
    return best, best_ch
