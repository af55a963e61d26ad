"""Two-level Lagrangian relaxation.

Capacity constraints on the microscopic switch-group and siding resources are
dualized; the multipliers are aggregated onto macroscopic arcs and every train
block is solved independently. A priority heuristic turns each lower-bound
solution into a feasible plan.
"""

from __future__ import annotations

import csv
import logging
import math
import time
from dataclasses import dataclass, field
from typing import IO

import numpy as np

from .instance import BalanceParams
from .network import ARRIVAL, SpaceTimeNetwork
from .timetable import Solution
from .train_dp import BlockResult, solve_block
from .ub_heuristic import conflict_counts, prioritized_order, schedule_sequentially

log = logging.getLogger(__name__)


@dataclass
class MultiplierPool:
    """Strictly positive multipliers only; a missing resource has multiplier zero."""

    values: dict[int, float] = field(default_factory=dict)
    balance: dict[str, float] = field(default_factory=dict)  # siding -> multiplier

    def __len__(self) -> int:
        return len(self.values)

    def get(self, resource: int) -> float:
        return self.values.get(resource, 0.0)

    def total(self) -> float:
        return float(sum(self.values.values()))

    def is_zero(self) -> bool:
        return not self.values and not any(self.balance.values())

    def dense(self, n: int) -> np.ndarray:
        lam = np.zeros(n)
        if self.values:
            keys = np.fromiter(self.values.keys(), dtype=np.int64, count=len(self.values))
            lam[keys] = np.fromiter(self.values.values(), dtype=float, count=len(self.values))
        return lam

    def copy(self) -> MultiplierPool:
        return MultiplierPool(dict(self.values), dict(self.balance))


@dataclass
class IterationRecord:
    m: int
    lb: float
    ub: float
    lb_best: float
    ub_best: float
    alpha: float
    pool_size: int
    violated: int


@dataclass
class BoundsRecord:
    ub_best: float = math.inf
    lb_best: float = -math.inf
    history: list[IterationRecord] = field(default_factory=list)

    @property
    def gap(self) -> float:
        return gap(self.ub_best, self.lb_best)

    def write_csv(self, out: IO[str]) -> None:
        w = csv.writer(out)
        w.writerow(["m", "lb", "ub", "lb_best", "ub_best", "alpha", "pool_size", "violated"])
        for r in self.history:
            w.writerow([r.m, r.lb, r.ub, r.lb_best, r.ub_best, r.alpha, r.pool_size, r.violated])


def gap(ub: float, lb: float) -> float:
    """Relative optimality gap ``(UB - LB) / UB``."""
    if not math.isfinite(ub) or not math.isfinite(lb):
        return math.inf
    return (ub - lb) / ub


def step_size(m: int, m_alpha: int = 20) -> float:
    return 1.0 / (min(m, m_alpha) + 1)


def aggregated_costs(network: SpaceTimeNetwork, pool: MultiplierPool,
                     lam: np.ndarray | None = None) -> dict[str, np.ndarray]:
    """Per-train arc costs: raw objective terms plus the multipliers of every resource the arc locks."""
    if lam is None:
        lam = pool.dense(network.n_resources)
    bal = np.array([pool.balance.get(s, 0.0) for s in network.sidings] + [0.0])
    out = {}
    for t in network.trains:
        block = network.blocks[t.id]
        c = block.base_cost + (block.link @ lam).reshape(block.base_cost.shape)
        if pool.balance:
            c[ARRIVAL] += bal[block.siding_slot][:, None]
        out[t.id] = c
    return out


def lower_bound(blocks: dict[str, BlockResult], pool: MultiplierPool, balance_cap: float = math.inf) -> float:
    lb = sum(b.cost for b in blocks.values()) - pool.total()
    if math.isfinite(balance_cap):
        lb -= balance_cap * sum(pool.balance.values())
    return lb


def arrival_counts(network: SpaceTimeNetwork, choices: dict) -> dict[str, int]:
    """Trains assigned to each siding."""
    counts = dict.fromkeys(network.sidings, 0)
    for tid, ch in choices.items():
        if ch is None:
            continue
        block = network.blocks[tid]
        if block.siding_slot[ch[0]] >= 0:
            counts[block.platforms[ch[0]]] += 1
    return counts


def subgradient_update(lam: np.ndarray, occupation: np.ndarray, step: float) -> np.ndarray:
    """Dense projected subgradient step over every resource."""
    return np.maximum(0.0, lam + step * (occupation - 1))


def dynamic_pool_update(pool: MultiplierPool, occupations: dict[int, int], step: float,
                        route_arc_pool: set | None = None, network: SpaceTimeNetwork | None = None,
                        ) -> tuple[MultiplierPool, set]:
    """Update only the multipliers that can change.

    ``occupations`` maps every occupied resource to its total occupation.
    Violated switch-group resources pull the arrival/departure arcs that lock
    them into ``route_arc_pool`` (when ``network`` is given).
    """
    route_arc_pool = set() if route_arc_pool is None else set(route_arc_pool)
    if network is not None:
        n_sg = len(network.resources.sgs) * network.resources.n_micro
        hot = [r for r, occ in occupations.items() if occ > 1 and r < n_sg]
        if hot:
            for t in network.trains:
                block = network.blocks[t.id]
                rows = block.link_csc[:, hot].tocoo().row
                route_arc_pool.update((t.id, int(r)) for r in np.unique(rows))
    new: dict[int, float] = {}
    old = pool.values
    for r, occ in occupations.items():
        if r in old:
            new[r] = old[r] + step * (occ - 1)
        elif occ > 1:
            new[r] = step * (occ - 1)
    for r, v in old.items():
        if r not in occupations:
            v = max(0.0, v + step * (0 - 1))
            if v != 0:
                new[r] = v
    return MultiplierPool(new, dict(pool.balance)), route_arc_pool


def balance_update(pool: MultiplierPool, counts: dict[str, int], cap: float, step: float) -> None:
    for s, n in counts.items():
        v = max(0.0, pool.balance.get(s, 0.0) + step * (n - cap))
        pool.balance[s] = v


@dataclass
class LRParams:
    max_iterations: int = 1500
    time_limit: float | None = None  # seconds
    gap_tolerance: float = 1e-4
    m_alpha: int = 20
    seed: int = 0
    ub_policy: str = "iterative"  # or "final"
    integer_objective: bool | None = None  # None: infer the cost granule from the data
    balance: BalanceParams = field(default_factory=BalanceParams)
    track_route_pool: bool = False


def cost_granule(network: SpaceTimeNetwork) -> int:
    """Largest integer dividing every arc and cancellation cost; 0 if some cost is fractional.

    Every plan then costs a multiple of it, so ``UB* - LB*`` below the granule proves optimality.
    """
    vals = [np.unique(b.base_cost[np.isfinite(b.base_cost)]) for b in network.blocks.values()]
    vals.append(np.array([b.cancel_cost for b in network.blocks.values()], dtype=float))
    v = np.concatenate(vals)
    if not np.all(v == np.round(v)):
        return 0
    return int(np.gcd.reduce(np.abs(v).astype(np.int64))) or 1


@dataclass
class LRState:
    """Everything one run produced, for inspection and tests."""

    bounds: BoundsRecord
    lb_choices: list[dict] = field(default_factory=list)
    pools: list[MultiplierPool] = field(default_factory=list)
    route_arc_pool: set = field(default_factory=set)


def _upper_bound(network, choices, counts, rng, cap):
    order = prioritized_order(counts, rng)
    return schedule_sequentially(order, network, rng=rng, balance_cap=cap)


def run(network: SpaceTimeNetwork, params: LRParams = LRParams(), keep_trace: bool = False,
        ) -> tuple[Solution, BoundsRecord] | tuple[Solution, BoundsRecord, LRState]:
    """Subgradient loop with per-iteration (or final) upper bounding.

    Stops on a small gap, a proven integer optimum (``UB* - LB* < 1``),
    the iteration cap or the time limit; at least one iteration always runs.
    """
    t_start = time.perf_counter()
    # separate streams: upper bounding must not perturb the lower-bound trajectory
    rng_lb, rng = (np.random.default_rng(s) for s in np.random.SeedSequence(params.seed).spawn(2))
    cap = params.balance.cap(network)
    if params.integer_objective is None:
        granule = cost_granule(network)
    else:
        granule = 1 if params.integer_objective else 0
    n_res = network.n_resources
    pool = MultiplierPool()
    if math.isfinite(cap):
        pool.balance = dict.fromkeys(network.sidings, 0.0)
    lam = np.zeros(n_res)
    rec = BoundsRecord()
    state = LRState(rec)
    ub_choices = None
    last_lb_choices = None
    last_counts = None
    m = 0
    while True:
        alpha = step_size(m, params.m_alpha)
        costs = aggregated_costs(network, pool, lam)
        blocks = {t.id: solve_block(network.blocks[t.id], costs[t.id], rng_lb) for t in network.trains}
        lb = lower_bound(blocks, pool, cap)
        choices = {tid: b.choice for tid, b in blocks.items()}
        if lb > rec.lb_best:
            rec.lb_best = lb

        occ = network.occupation_counts(choices)
        violated = int((occ > 1).sum())
        arrivals = arrival_counts(network, choices) if math.isfinite(cap) else {}
        bal_violated = sum(1 for n in arrivals.values() if n > cap)
        feasible = violated == 0 and bal_violated == 0

        ub = math.inf
        ub_ch = None
        counts = None if feasible else conflict_counts(choices, network)
        if feasible:
            ub_ch = choices
        elif params.ub_policy == "iterative":
            ub_ch = _upper_bound(network, choices, counts, rng, cap)
        if ub_ch is not None:
            ub = network.objective(ub_ch)
            if ub < rec.ub_best:
                rec.ub_best, ub_choices = ub, ub_ch
        if keep_trace:
            state.lb_choices.append(choices)
            state.pools.append(pool.copy())

        # multiplier step
        nz = np.flatnonzero(occ)
        occupations = dict(zip(nz.tolist(), occ[nz].tolist()))
        lam_was_zero = pool.is_zero()
        new_pool, state.route_arc_pool = dynamic_pool_update(
            pool, occupations, alpha, state.route_arc_pool, network if params.track_route_pool else None)
        if math.isfinite(cap):
            balance_update(new_pool, arrivals, cap, alpha)
        touched = set(pool.values) | set(new_pool.values)
        if touched:
            idx = np.fromiter(touched, dtype=np.int64, count=len(touched))
            lam[idx] = [new_pool.values.get(int(i), 0.0) for i in idx]
        pool = new_pool
        last_lb_choices, last_counts = choices, counts

        if feasible and lam_was_zero:
            rec.ub_best, ub_choices = rec.lb_best, choices
        rec.history.append(IterationRecord(m, lb, ub, rec.lb_best, rec.ub_best, alpha, len(pool), violated))
        log.debug("m=%d lb=%.2f ub=%.2f best=[%.2f, %.2f] pool=%d", m, lb, ub, rec.lb_best, rec.ub_best, len(pool))

        elapsed = time.perf_counter() - t_start
        if (rec.gap <= params.gap_tolerance
                or (granule and rec.ub_best - rec.lb_best < granule - 1e-9)
                or m + 1 >= params.max_iterations
                or (params.time_limit is not None and elapsed >= params.time_limit)):
            break
        m += 1

    if params.ub_policy == "final" and last_counts is not None:
        ub_ch = _upper_bound(network, last_lb_choices, last_counts, rng, cap)
        ub = network.objective(ub_ch)
        if ub < rec.ub_best:
            rec.ub_best, ub_choices = ub, ub_ch
        rec.history[-1].ub = ub
        rec.history[-1].ub_best = rec.ub_best
    if ub_choices is None:
        ub_choices = {t.id: None for t in network.trains}
        rec.ub_best = network.objective(ub_choices)

    sol = Solution(network.paths(ub_choices), rec.ub_best, rec.lb_best, len(rec.history),
                   time.perf_counter() - t_start, {"method": "lr", "ub_policy": params.ub_policy,
                                                  "seed": params.seed})
    if keep_trace:
        return sol, rec, state
    return sol, rec
