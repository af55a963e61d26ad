"""Exact branch-and-bound reference solver and the capacity checker."""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .instance import BalanceParams
from .network import MicroResource, SpaceTimeNetwork
from .timetable import Solution
from .ub_heuristic import heuristic_solve


class EnumerationCapExceeded(RuntimeError):
    pass


@dataclass
class FeasibilityReport:
    violations: list[tuple[MicroResource, tuple[str, ...], int]] = field(default_factory=list)
    balance_violations: list[tuple[str, int, float]] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations and not self.balance_violations

    def __bool__(self) -> bool:  # truthy when something is wrong
        return not self.ok

    def lines(self) -> list[str]:
        out = [f"{r.kind} {r.space} @{r.time}: occupation {n} by {', '.join(ts)}" for r, ts, n in self.violations]
        out += [f"siding {s}: {n} trains > cap {cap:g}" for s, n, cap in self.balance_violations]
        return out


def check_feasibility(solution: Solution | dict, network: SpaceTimeNetwork,
                      balance: BalanceParams | None = None) -> FeasibilityReport:
    """Aggregate every train's occupations and report each over-used resource.

    ``solution`` may be a :class:`Solution` or a dict of per-train choices.
    """
    choices = network.choices(solution.paths) if isinstance(solution, Solution) else solution
    total: Counter = Counter()
    who: dict[int, list[str]] = {}
    per_siding = Counter()
    for t in network.trains:
        ch = choices[t.id]
        block = network.blocks[t.id]
        for r in block.choice_resources(ch).tolist():
            total[r] += 1
            who.setdefault(r, []).append(t.id)
        if ch is not None and block.siding_slot[ch[0]] >= 0:
            per_siding[block.platforms[ch[0]]] += 1
    rep = FeasibilityReport()
    for r in sorted(r for r, n in total.items() if n > 1):
        rep.violations.append((network.resources.resource(r), tuple(sorted(set(who[r]))), total[r]))
    if balance is not None and balance.enabled:
        cap = balance.cap(network)
        rep.balance_violations = [(s, n, cap) for s, n in sorted(per_siding.items()) if n > cap]
    return rep


@dataclass(frozen=True)
class Candidate:
    choice: tuple[int, int, int] | None
    cost: float
    mask: int  # bitmask over resource indices
    siding: int  # index into network sidings, -1 for mainline or cancellation


def candidate_paths(network: SpaceTimeNetwork, train_id: str) -> list[Candidate]:
    """All self-consistent paths of one train plus cancellation, cheapest first."""
    block = network.blocks[train_id]
    A, W, D = block.base_cost
    P, T = A.shape
    dmin, dmax = block.train.dwell_min, block.train.dwell_max
    out = []
    V = A  # cost of arriving at e and waiting k periods
    for k in range(min(dmax, T - 1) + 1):
        n = T - k
        if k > 0:
            V = V[:, :n] + W[:, k - 1:k - 1 + n]
        if k < dmin:
            continue
        cost = V + D[:, k:]
        for p, e in np.argwhere(np.isfinite(cost)):
            ch = (int(p), int(e), k)
            res = block.choice_resources(ch).tolist()
            mask = 0
            for r in res:
                mask |= 1 << r
            if mask.bit_count() != len(res):
                continue  # locks a resource twice on its own
            out.append(Candidate(ch, float(cost[p, e]), mask, int(block.siding_slot[p])))
    out.append(Candidate(None, float(block.cancel_cost), 0, -1))
    out.sort(key=lambda c: (c.cost, c.choice is not None, c.choice or ()))
    return out


def _components(cands: dict[str, list[Candidate]]) -> list[list[str]]:
    """Groups of trains whose candidate paths can share a resource, directly or through others."""
    ids = list(cands)
    reach = {tid: 0 for tid in ids}
    for tid in ids:
        for c in cands[tid]:
            reach[tid] |= c.mask
    parent = {tid: tid for tid in ids}

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for i, a in enumerate(ids):
        for b in ids[i + 1:]:
            if reach[a] & reach[b]:
                parent[find(a)] = find(b)
    groups: dict[str, list[str]] = {}
    for tid in ids:
        groups.setdefault(find(tid), []).append(tid)
    return list(groups.values())


class _Search:
    """Depth-first branch and bound with memoized completion bounds.

    Trains are branched chronologically. A search state keeps only the claimed
    resources that trains still to come could touch (plus the siding counts
    under a balance cap), so equal partial schedules are recognised and their
    bounds reused; the search stays exact.
    """

    def __init__(self, network, cands, cap, node_cap):
        self.network, self.cands, self.cap, self.node_cap = network, cands, cap, node_cap
        self.nodes = 0

    def run(self, group: list[str], incumbent_cost: float, incumbent: dict) -> tuple[float, dict]:
        trains = {t.id: t for t in self.network.trains}
        order = sorted(group, key=lambda tid: (trains[tid].desired_arrival, tid))
        cands = [self.cands[tid] for tid in order]
        n, cap = len(order), self.cap
        reach = [0] * (n + 1)
        for i in range(n - 1, -1, -1):
            m = reach[i + 1]
            for c in cands[i]:
                m |= c.mask
            reach[i] = m
        balanced = math.isfinite(cap)
        memo: dict = {}  # state -> (bound, exact, best candidate)

        def fits(c, mask, use):
            return not c.mask & mask and (not balanced or c.siding < 0 or use[c.siding] + 1 <= cap)

        def cheapest(j, mask, use):
            for c in cands[j]:
                if fits(c, mask, use):
                    return c.cost
            return math.inf  # unreachable: cancellation always fits

        def solve(i, mask, use, budget):
            """Cheapest completion from train ``i`` if below ``budget``, else a lower bound >= budget."""
            if i == n:
                return 0.0
            mask &= reach[i]
            key = (i, mask, use) if balanced else (i, mask)
            hit = memo.get(key)
            if hit is not None and (hit[1] or hit[0] >= budget):
                return hit[0]
            mins = [cheapest(j, mask, use) for j in range(i, n)]
            h = sum(mins)
            if hit is not None:
                h = max(h, hit[0])
            if h >= budget:
                memo[key] = (h, False, None)
                return h
            self.nodes += 1
            if self.nodes > self.node_cap:
                raise EnumerationCapExceeded(f"search exceeded {self.node_cap} nodes")
            tail = sum(mins[1:])
            best, arg, pruned = math.inf, None, math.inf
            for c in cands[i]:
                limit = min(budget, best)
                if c.cost + tail >= limit:
                    pruned = min(pruned, c.cost + tail)
                    break  # candidates are sorted by cost
                if not fits(c, mask, use):
                    continue
                nu = use
                if balanced and c.siding >= 0:
                    nu = use[:c.siding] + (use[c.siding] + 1,) + use[c.siding + 1:]
                v = c.cost + solve(i + 1, mask | c.mask, nu, limit - c.cost)
                if v < best:
                    best, arg = v, c
            if best < budget:
                memo[key] = (best, True, arg)
                return best
            lb = min(best, pruned)
            memo[key] = (lb, False, None)
            return lb

        use0 = tuple([0] * len(self.network.sidings)) if balanced else ()
        budget = incumbent_cost + 1e-9
        value = solve(0, 0, use0, budget)
        if value >= budget:
            return incumbent_cost, dict(incumbent)
        # walk the exact memo entries back down
        choice, mask, use = {}, 0, use0
        for i in range(n):
            mask &= reach[i]
            c = memo[(i, mask, use) if balanced else (i, mask)][2]
            choice[order[i]] = c.choice
            mask |= c.mask
            if balanced and c.siding >= 0:
                use = use[:c.siding] + (use[c.siding] + 1,) + use[c.siding + 1:]
        return value, choice


def solve_exact(network: SpaceTimeNetwork, balance: BalanceParams | None = None,
                node_cap: int = 10 ** 7, incumbent: dict | None = None) -> tuple[float, Solution]:
    """Exact optimum by branch and bound over per-train candidate paths.

    Without a balance cap, trains that can never meet are solved as separate
    groups. ``incumbent`` (any feasible plan) only serves as the initial cut.
    Raises :class:`EnumerationCapExceeded` once ``node_cap`` nodes are spent.
    """
    cap = balance.cap(network) if balance is not None else math.inf
    cands = {t.id: candidate_paths(network, t.id) for t in network.trains}
    if incumbent is None:
        incumbent = heuristic_solve(network, balance_cap=cap)
    groups = _components(cands) if math.isinf(cap) else [list(cands)]
    search = _Search(network, cands, cap, node_cap)
    choices = {}
    for group in groups:
        inc = {tid: incumbent[tid] for tid in group}
        inc_cost = sum(network.blocks[tid].choice_cost(inc[tid]) for tid in group)
        _, found = search.run(group, inc_cost, inc)
        choices.update(found)
    choices = {t.id: choices[t.id] for t in network.trains}
    opt = network.objective(choices)
    sol = Solution(network.paths(choices), opt, opt, meta={"method": "exact", "nodes": search.nodes,
                                                            "groups": len(groups)})
    return opt, sol
