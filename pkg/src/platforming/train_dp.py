"""Train blocks: shortest source-sink path with dwell bounds under arbitrary arc costs."""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass

import numpy as np

from .network import TrainNetwork


@dataclass(frozen=True)
class BlockResult:
    choice: tuple[int, int, int] | None  # (platform, arrival end, dwell) or None if cancelled
    cost: float


def solve_block(block: TrainNetwork, costs: np.ndarray | None = None,
                rng: np.random.Generator | None = None) -> BlockResult:
    """Minimum-cost path of one train.

    Dynamic program over the dwell resource: ``V`` holds, for every platform
    and arrival period, the cost of arriving there and waiting ``k`` periods;
    departing after ``k`` waits is allowed for ``dwell_min <= k <= dwell_max``.
    Ties between minimum-cost paths are broken uniformly at random when
    ``rng`` is given, otherwise the first one found is kept.
    """
    c = block.base_cost if costs is None else costs
    A, W, D = c[0], c[1], c[2]
    T = A.shape[1]
    dmin, dmax = block.train.dwell_min, block.train.dwell_max
    best = math.inf
    ties: list[tuple[int, np.ndarray]] = []
    V = A
    for k in range(min(dmax, T - 1) + 1):
        n = T - k
        if k >= dmin:
            cand = V + D[:, k:]
            v = cand.min()
            if v < best:
                best, ties = v, [(k, cand)]
            elif v == best and v < math.inf:
                ties.append((k, cand))
        if k == dmax or n <= 1:
            break
        V = V[:, :n - 1] + W[:, k:k + n - 1]
        if not np.isfinite(V).any():
            break

    if best == math.inf or block.cancel_cost < best:
        return BlockResult(None, float(block.cancel_cost))
    if rng is None:
        k, cand = ties[0]
        p, e = np.unravel_index(int(np.argmin(cand)), cand.shape)
        return BlockResult((int(p), int(e), k), float(best))
    options = [(int(p), int(e), k) for k, cand in ties for p, e in np.argwhere(cand == best)]
    return BlockResult(options[int(rng.integers(len(options)))], float(best))


@dataclass
class Label:
    node: str
    time: int
    cost: float
    dwell: int
    pred: "Label | None" = None
    row: int = -1  # arc row that produced the label


def dominance(a: Label, b: Label, dwell_min: int) -> bool:
    """Whether ``a`` (weakly) dominates ``b`` at the same node and time.

    ``a`` must be no costlier and leave every future departure open that ``b``
    leaves open: it may not have dwelt longer (``dwell_max`` comes closer) and,
    unless it already meets ``dwell_min``, not shorter either.
    """
    if a.cost > b.cost:
        return False
    return min(b.dwell, dwell_min) <= a.dwell <= b.dwell


def solve_block_labels(block: TrainNetwork, costs: np.ndarray | None = None) -> BlockResult:
    """Label-setting reference solver walking the explicit arc list."""
    flat = (block.base_cost if costs is None else costs).reshape(-1)
    train = block.train
    dmin, dmax = train.dwell_min, train.dwell_max
    out_arcs = defaultdict(list)
    for a in block.arcs():
        if a.kind in ("arrival", "siding_wait", "departure"):
            out_arcs[(a.start_node, a.start)].append(a)
    buckets: dict[int, dict[str, list[Label]]] = defaultdict(lambda: defaultdict(list))
    for (node, t), arcs in out_arcs.items():
        if node == train.origin:
            buckets[t][node].append(Label(node, t, 0.0, 0))

    best: Label | None = None
    for t in sorted({t for _, t in out_arcs}):
        for node, labels in buckets.pop(t, {}).items():
            for lab in labels:
                for arc in out_arcs.get((node, t), ()):
                    cost = lab.cost + float(flat[arc.row])
                    if not math.isfinite(cost):
                        continue
                    dwell = lab.dwell
                    if arc.kind == "siding_wait":
                        dwell += 1
                        if dwell > dmax:
                            continue
                    elif arc.kind == "departure" and dwell < dmin:
                        continue
                    new = Label(arc.end_node, arc.end, cost, dwell, lab, arc.row)
                    if arc.kind == "departure":
                        if best is None or new.cost < best.cost:
                            best = new
                        continue
                    bucket = buckets[arc.end][arc.end_node]
                    if any(dominance(old, new, dmin) for old in bucket):
                        continue
                    bucket[:] = [old for old in bucket if not dominance(new, old, dmin)]
                    bucket.append(new)

    if best is None or block.cancel_cost < best.cost:
        return BlockResult(None, float(block.cancel_cost))
    rows = []
    lab = best
    while lab is not None and lab.row >= 0:
        rows.append(lab.row)
        lab = lab.pred
    arrival = block.decode(rows[-1])
    departure = block.decode(rows[0])
    return BlockResult((arrival[1], arrival[2], departure[2] - arrival[2]), float(best.cost))
