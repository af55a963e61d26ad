"""Priority-rule sequential scheduling used to build upper bounds."""

from __future__ import annotations

import math

import numpy as np

from .network import ARRIVAL, SpaceTimeNetwork
from .train_dp import solve_block


def conflict_counts(choices: dict, network: SpaceTimeNetwork) -> dict[str, int]:
    """For every train, how many other trains share an over-used resource with it."""
    occ = network.occupation_counts(choices)
    users: dict[int, set[str]] = {}
    for t in network.trains:
        res = network.blocks[t.id].choice_resources(choices[t.id])
        for r in np.unique(res[occ[res] > 1]).tolist():
            users.setdefault(r, set()).add(t.id)
    rivals: dict[str, set[str]] = {t.id: set() for t in network.trains}
    for ids in users.values():
        for tid in ids:
            rivals[tid] |= ids
    return {tid: len(s - {tid}) for tid, s in rivals.items()}


def prioritized_order(counts: dict[str, int], rng: np.random.Generator | None = None) -> list[str]:
    """Trains with fewer conflicts first; ties are shuffled when ``rng`` is given."""
    ids = list(counts)
    if rng is not None:
        ids = [ids[i] for i in rng.permutation(len(ids))]
    return sorted(ids, key=lambda tid: counts[tid])  # stable, keeps the shuffle inside ties


def schedule_sequentially(order: list[str], network: SpaceTimeNetwork, rng: np.random.Generator | None = None,
                          balance_cap: float = math.inf) -> dict:
    """Fix trains one at a time on their cheapest path avoiding resources already taken.

    A train with no such path (or whose best option is cancellation) is cancelled.
    With a finite ``balance_cap`` a siding closes once it holds that many trains.
    """
    claimed = np.zeros(network.n_resources)
    use = dict.fromkeys(network.sidings, 0)
    choices: dict = {}
    for tid in order:
        block = network.blocks[tid]
        costs = block.base_cost.copy()
        blocked = (block.link @ claimed > 0).reshape(costs.shape)
        costs[blocked] = np.inf
        if math.isfinite(balance_cap):
            for p, slot in enumerate(block.siding_slot):
                if slot >= 0 and use[block.platforms[p]] >= balance_cap:
                    costs[ARRIVAL, p] = np.inf
        ch = solve_block(block, costs, rng).choice
        if ch is not None:
            res = block.choice_resources(ch)
            if np.unique(res).size < res.size:
                ch = None  # the path collides with itself
            else:
                claimed[res] = 1
                if block.siding_slot[ch[0]] >= 0:
                    use[block.platforms[ch[0]]] += 1
        choices[tid] = ch
    return {t.id: choices[t.id] for t in network.trains}


def heuristic_solve(network: SpaceTimeNetwork, seed: int = 0, balance_cap: float = math.inf) -> dict:
    """Stand-alone heuristic: relaxed shortest paths give the conflict counts, then one sequential pass."""
    rng = np.random.default_rng(seed)
    relaxed = {t.id: solve_block(network.blocks[t.id], rng=rng).choice for t in network.trains}
    order = prioritized_order(conflict_counts(relaxed, network), rng)
    return schedule_sequentially(order, network, rng, balance_cap)
